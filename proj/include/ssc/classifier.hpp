#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ssc/core.hpp"
#include "ssc/layers.hpp"
#include "ssc/losses.hpp"
#include "ssc/optimizer.hpp"
#include "ssc/tensor.hpp"

namespace ssc {

/// Fully-connected softmax head on the latent code: logits = W z + b.
class Classifier {
 public:
  Classifier() = default;

  Classifier(int k, Eigen::Index latent_dim, Rng& rng)
      : W_(k, latent_dim), b_(k), grad_W_(k, latent_dim), grad_b_(k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(latent_dim));
    for (Eigen::Index i = 0; i < W_.size(); ++i) W_.data()[i] = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < b_.size(); ++i) b_(i) = rng.uniform(-bound, bound);
    zero_grad();
  }

  bool empty() const { return W_.size() == 0; }
  int k() const { return static_cast<int>(W_.rows()); }
  Eigen::Index latent_dim() const { return W_.cols(); }
  Eigen::MatrixXd& weight() { return W_; }
  const Eigen::MatrixXd& weight() const { return W_; }
  Eigen::VectorXd& bias() { return b_; }
  const Eigen::VectorXd& bias() const { return b_; }

  /// Batch logits, one column per sample.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& Z) const {
    require(Z.rows() == W_.cols(), "classifier: latent dim mismatch");
    return (W_ * Z).colwise() + b_;
  }

  /// Single-sample path: logits and softmax probabilities.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> classify(const Eigen::VectorXd& z) const {
    require(z.size() == W_.cols(), "classifier: latent dim mismatch");
    Eigen::VectorXd y = W_ * z + b_;
    return {y, softmax(y)};
  }

  /// Accumulates parameter gradients from the gradient wrt logits and returns
  /// the gradient wrt the latent code.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& g_logits) {
    require(g_logits.rows() == W_.rows() && g_logits.cols() == Z.cols(),
            "classifier backward: shape mismatch");
    grad_W_.noalias() += g_logits * Z.transpose();
    grad_b_ += g_logits.rowwise().sum();
    return W_.transpose() * g_logits;
  }

  void zero_grad() {
    grad_W_.setZero();
    grad_b_.setZero();
  }

  std::vector<ParamRef> params() {
    return {{"classifier.w", W_.data(), grad_W_.data(), static_cast<std::size_t>(W_.size())},
            {"classifier.b", b_.data(), grad_b_.data(), static_cast<std::size_t>(b_.size())}};
  }

 private:
  Eigen::MatrixXd W_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd grad_W_;
  Eigen::VectorXd grad_b_;
};

/// Per-cluster means of the logit columns. A cluster with no members keeps
/// its previous centroid row.
inline void update_centroids(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                             Eigen::MatrixXd& centroids) {
  require(static_cast<std::size_t>(logits.cols()) == labels.size(),
          "update_centroids: logits/labels length mismatch");
  require(centroids.cols() == logits.rows(), "update_centroids: centroid dim mismatch");
  const int k = static_cast<int>(centroids.rows());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, logits.rows());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int l = labels[static_cast<std::size_t>(j)];
    require(l >= 0 && l < k, "update_centroids: label out of range");
    sums.row(l) += logits.col(j).transpose();
    counts(l) += 1.0;
  }
  for (int c = 0; c < k; ++c)
    if (counts(c) > 0.0) centroids.row(c) = sums.row(c) / counts(c);
}

/// Out-of-sample path: encode raw samples and take the argmax class. Never
/// touches the self-expression layer.
inline std::vector<int> predict_unseen(const Tensor& samples, Network& encoder,
                                       const Classifier& clf) {
  Tensor h = encoder.forward(samples);
  require(h.rank() == 2, "predict_unseen: encoder must end in a flat code");
  const Eigen::MatrixXd Z = to_feature_matrix(h);
  const Eigen::MatrixXd Y = clf.logits(Z);
  std::vector<int> out(static_cast<std::size_t>(Y.cols()));
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    Eigen::Index arg = 0;
    Y.col(j).maxCoeff(&arg);
    out[static_cast<std::size_t>(j)] = static_cast<int>(arg);
  }
  return out;
}

}  // namespace ssc

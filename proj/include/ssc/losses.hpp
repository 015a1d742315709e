#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ssc/core.hpp"

namespace ssc {

/// Width and distance form of the Gaussian correntropy kernel. The squared
/// euclidean form is the default; the literal unsquared form is kept as an
/// option for comparison.
struct CimConfig {
  enum class Distance { kSquaredEuclidean, kEuclidean };
  double sigma = 1.0;
  Distance distance = Distance::kSquaredEuclidean;

  void validate() const { require(sigma > 0.0, "CimConfig: sigma must be > 0"); }
};

/// Trade-off constants for the six loss terms plus the self-expression
/// regularizer weight.
struct LossWeights {
  double lambda1 = 1.0;  // reconstruction
  double lambda2 = 1.0;  // self-expression objective
  double lambda3 = 1.0;  // C-Q suppression
  double lambda4 = 1.0;  // cross-entropy
  double lambda5 = 1.0;  // center loss
  double lambda6 = 1.0;  // symmetry loss
  double gamma = 1.0;    // representation regularizer inside the self-expression objective

  void validate() const {
    for (double w : {lambda1, lambda2, lambda3, lambda4, lambda5, lambda6, gamma})
      require(w >= 0.0, "LossWeights: weights must be nonnegative");
  }
};

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;
};

namespace detail {
inline double kernel_from_sqdist(double sqdist, const CimConfig& cfg) {
  const double arg = (cfg.distance == CimConfig::Distance::kSquaredEuclidean)
                         ? sqdist
                         : std::sqrt(sqdist);
  return std::exp(-arg / (2.0 * cfg.sigma * cfg.sigma));
}
}  // namespace detail

/// Gaussian kernel kappa_sigma(s, t) in (0, 1]; equals 1 iff s == t.
inline double correntropy_kernel(const Eigen::VectorXd& s, const Eigen::VectorXd& t,
                                 const CimConfig& cfg) {
  cfg.validate();
  require(s.size() == t.size(), "correntropy_kernel: length mismatch");
  return detail::kernel_from_sqdist((s - t).squaredNorm(), cfg);
}

/// Empirical correntropy: mean of the kernel over matched columns.
inline double correntropy_mean(const Eigen::MatrixXd& S, const Eigen::MatrixXd& T,
                               const CimConfig& cfg) {
  cfg.validate();
  require(S.rows() == T.rows() && S.cols() == T.cols(), "correntropy: shape mismatch");
  require(S.cols() > 0, "correntropy: empty input");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < S.cols(); ++j)
    acc += detail::kernel_from_sqdist((S.col(j) - T.col(j)).squaredNorm(), cfg);
  return acc / static_cast<double>(S.cols());
}

/// Correntropy-induced metric: (kappa(0,0) - V(S,T))^(1/2), in [0, 1].
inline double cim(const Eigen::MatrixXd& S, const Eigen::MatrixXd& T, const CimConfig& cfg) {
  const double v = correntropy_mean(S, T, cfg);
  return std::sqrt(std::max(0.0, 1.0 - v));
}

/// Squared CIM of a residual matrix against zero: 1 - V(E, 0), with the
/// analytic gradient wrt E. Each column's influence on the loss is bounded
/// by 1/N regardless of its magnitude.
inline LossGrad cim_loss_and_grad(const Eigen::MatrixXd& E, const CimConfig& cfg) {
  cfg.validate();
  require(E.allFinite(), "cim_loss_and_grad: non-finite input");
  require(E.cols() > 0, "cim_loss_and_grad: empty input");
  const double n = static_cast<double>(E.cols());
  const double inv_two_sigma2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);

  LossGrad out;
  out.grad.setZero(E.rows(), E.cols());
  double vhat = 0.0;
  for (Eigen::Index j = 0; j < E.cols(); ++j) {
    const double sq = E.col(j).squaredNorm();
    if (cfg.distance == CimConfig::Distance::kSquaredEuclidean) {
      const double k = std::exp(-sq * inv_two_sigma2);
      vhat += k;
      out.grad.col(j) = (2.0 * inv_two_sigma2 * k / n) * E.col(j);
    } else {
      const double d = std::sqrt(sq);
      const double k = std::exp(-d * inv_two_sigma2);
      vhat += k;
      if (d > 0.0) out.grad.col(j) = (inv_two_sigma2 * k / (n * d)) * E.col(j);
      // subgradient 0 at the kink e_j = 0
    }
  }
  out.loss = 1.0 - vhat / n;
  return out;
}

/// MSE counterpart of the self-expression error, (1/2N)||E||_F^2. Used by the
/// non-robust ablation variants.
inline LossGrad mse_loss_and_grad(const Eigen::MatrixXd& E) {
  require(E.cols() > 0, "mse_loss_and_grad: empty input");
  const double n = static_cast<double>(E.cols());
  LossGrad out;
  out.loss = E.squaredNorm() / (2.0 * n);
  out.grad = E / n;
  return out;
}

/// Autoencoder reconstruction loss (1/2N)||X - Xhat||_F^2 with gradient wrt Xhat.
inline LossGrad reconstruction_loss_and_grad(const Eigen::MatrixXd& X,
                                             const Eigen::MatrixXd& X_hat) {
  require(X.rows() == X_hat.rows() && X.cols() == X_hat.cols(),
          "reconstruction_loss: shape mismatch");
  require(X.cols() > 0, "reconstruction_loss: empty input");
  const double n = static_cast<double>(X.cols());
  LossGrad out;
  out.loss = (X - X_hat).squaredNorm() / (2.0 * n);
  out.grad = (X_hat - X) / n;
  return out;
}

inline double reconstruction_loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X_hat) {
  return reconstruction_loss_and_grad(X, X_hat).loss;
}

/// One-hot rows from integer labels.
inline Eigen::MatrixXd one_hot(const std::vector<int>& labels, int k) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < k, cat("one_hot: label ", labels[i], " out of [0,", k, ")"));
    Q(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return Q;
}

/// Pseudo-label suppression term sum_ij |c_ij| ||q_i - q_j||^2 / 2.
/// Penalizes representation mass between samples with different pseudo-labels.
inline double cq_loss(const Eigen::MatrixXd& C, const Eigen::MatrixXd& Q) {
  require(C.rows() == C.cols(), "cq_loss: C must be square");
  require(Q.rows() == C.rows(), "cq_loss: C/Q row mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      const double d = (Q.row(i) - Q.row(j)).squaredNorm();
      if (d != 0.0) acc += std::abs(C(i, j)) * d * 0.5;
    }
  return acc;
}

/// Subgradient of cq_loss wrt C (Q held fixed); 0 where c_ij = 0.
inline Eigen::MatrixXd cq_grad(const Eigen::MatrixXd& C, const Eigen::MatrixXd& Q) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(C.rows(), C.cols());
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      if (C(i, j) == 0.0) continue;
      const double d = (Q.row(i) - Q.row(j)).squaredNorm();
      G(i, j) = (C(i, j) > 0.0 ? 1.0 : -1.0) * d * 0.5;
    }
  return G;
}

/// Numerically stable column softmax.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& Y) {
  Eigen::MatrixXd P(Y.rows(), Y.cols());
  for (Eigen::Index j = 0; j < Y.cols(); ++j) P.col(j) = softmax(Y.col(j));
  return P;
}

/// Categorical cross-entropy of logits (k x N, column per sample) against
/// one-hot targets (N x k). Gradient is wrt the logits.
inline LossGrad cross_entropy_loss_and_grad(const Eigen::MatrixXd& logits,
                                            const Eigen::MatrixXd& Q) {
  require(logits.cols() == Q.rows() && logits.rows() == Q.cols(),
          "cross_entropy: logits (k x N) and targets (N x k) disagree");
  require(logits.cols() > 0, "cross_entropy: empty input");
  const double n = static_cast<double>(logits.cols());
  LossGrad out;
  out.grad.resize(logits.rows(), logits.cols());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Eigen::VectorXd p = softmax(logits.col(j));
    for (Eigen::Index c = 0; c < logits.rows(); ++c) {
      if (Q(j, c) != 0.0) acc -= Q(j, c) * std::log(std::max(p(c), 1e-300));
    }
    out.grad.col(j) = (p - Q.row(j).transpose()) / n;
  }
  out.loss = acc / n;
  return out;
}

inline double cross_entropy_loss(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& Q) {
  return cross_entropy_loss_and_grad(logits, Q).loss;
}

/// Center loss: mean squared distance of each logit column to the centroid of
/// its pseudo-cluster. Centroids are treated as constants.
inline LossGrad center_loss_and_grad(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                                     const Eigen::MatrixXd& centroids) {
  require(static_cast<std::size_t>(logits.cols()) == labels.size(),
          "center_loss: logits/labels length mismatch");
  require(centroids.cols() == logits.rows(), "center_loss: centroid dim mismatch");
  require(logits.cols() > 0, "center_loss: empty input");
  const double n = static_cast<double>(logits.cols());
  LossGrad out;
  out.grad.resize(logits.rows(), logits.cols());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int lab = labels[static_cast<std::size_t>(j)];
    require(lab >= 0 && lab < centroids.rows(), cat("center_loss: label ", lab, " out of range"));
    const Eigen::VectorXd diff = logits.col(j) - centroids.row(lab).transpose();
    acc += diff.squaredNorm();
    out.grad.col(j) = 2.0 * diff / n;
  }
  out.loss = acc / n;
  return out;
}

inline double center_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                          const Eigen::MatrixXd& centroids) {
  return center_loss_and_grad(logits, labels, centroids).loss;
}

/// Symmetric affinity A = (|C| + |C^T|) / 2.
inline Eigen::MatrixXd symmetric_affinity(const Eigen::MatrixXd& C) {
  require(C.rows() == C.cols(), "symmetric_affinity: C must be square");
  return 0.5 * (C.cwiseAbs() + C.cwiseAbs().transpose());
}

/// Symmetry loss (1/2)||C - A||_F^2 with A = (|C|+|C^T|)/2; zero iff C
/// already equals its symmetric affinity.
inline LossGrad symmetry_loss_and_grad(const Eigen::MatrixXd& C) {
  require(C.rows() == C.cols(), "symmetry_loss: C must be square");
  const Eigen::MatrixXd A = symmetric_affinity(C);
  const Eigen::MatrixXd R = C - A;
  LossGrad out;
  out.loss = 0.5 * R.squaredNorm();
  // d/dc_ij picks up the direct residual plus A's dependence on |c_ij|,
  // which feeds both r_ij and r_ji.
  out.grad = R;
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      if (C(i, j) == 0.0) continue;
      const double s = C(i, j) > 0.0 ? 1.0 : -1.0;
      out.grad(i, j) -= 0.5 * s * (R(i, j) + R(j, i));
    }
  return out;
}

inline double symmetry_loss(const Eigen::MatrixXd& C) { return symmetry_loss_and_grad(C).loss; }

/// The six loss parts of the total objective, in fixed order.
struct LossParts {
  double rec = 0.0;   // reconstruction
  double sx = 0.0;    // self-expression objective (error + gamma * regularizer)
  double cq = 0.0;    // C-Q suppression
  double ce = 0.0;    // cross-entropy
  double cnt = 0.0;   // center loss
  double sym = 0.0;   // symmetry loss
};

/// Weighted total loss: lambda1*REC + lambda2*SX + lambda3*CQ + lambda4*CE
/// + lambda5*CNT + lambda6*SYM.
inline double total_loss(const LossParts& p, const LossWeights& w) {
  w.validate();
  const double parts[6] = {p.rec, p.sx, p.cq, p.ce, p.cnt, p.sym};
  for (double v : parts) require(std::isfinite(v), "total_loss: non-finite part");
  return w.lambda1 * p.rec + w.lambda2 * p.sx + w.lambda3 * p.cq + w.lambda4 * p.ce +
         w.lambda5 * p.cnt + w.lambda6 * p.sym;
}

/// Median of pairwise column distances, the default kernel-width heuristic.
/// Frozen for a whole epoch by the caller. Falls back to the mean column norm
/// (then 1.0) when the median vanishes.
inline double median_pairwise_sigma(const Eigen::MatrixXd& E) {
  const Eigen::Index n = E.cols();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((E.col(i) - E.col(j)).norm());
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  double med = d[d.size() / 2];
  if (med > 1e-12) return med;
  double mean_norm = E.colwise().norm().mean();
  return mean_norm > 1e-12 ? mean_norm : 1.0;
}

}  // namespace ssc

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ssc/hungarian.hpp"
#include "ssc/losses.hpp"
#include "ssc/self_expression.hpp"
#include "ssc/spectral.hpp"

namespace ssc {

/// Cluster assignments produced by the spectral module, with the one-hot
/// matrix consumed by the C-Q loss and the per-cluster logit centroids
/// consumed by the center loss.
struct PseudoLabelState {
  std::vector<int> labels;
  Eigen::MatrixXd q_onehot;   // N x k
  Eigen::MatrixXd centroids;  // k x (logit dim)
  int epoch = 0;

  int count_nonempty(int k) const {
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int l : labels) seen[static_cast<std::size_t>(l)] = true;
    int n = 0;
    for (bool s : seen) n += s ? 1 : 0;
    return n;
  }
};

/// Post-process C, build the affinity, embed, and cluster. Centroids are
/// zero-initialized; the classifier side fills them from logits.
inline PseudoLabelState make_pseudo_labels(const Eigen::MatrixXd& C, int k,
                                           const PostprocessConfig& pp, std::uint64_t seed,
                                           const EigOptions& eig = {}) {
  SpectralConfig sc;
  sc.k = k;
  sc.eig = eig;
  sc.seed = seed;
  const Eigen::MatrixXd C_pp = postprocess_c(C, pp);
  SpectralResult sr = spectral_clustering(symmetric_affinity(C_pp), sc);

  PseudoLabelState st;
  st.labels = std::move(sr.labels);
  st.q_onehot = one_hot(st.labels, k);
  st.centroids = Eigen::MatrixXd::Zero(k, k);
  return st;
}

/// Renames new cluster ids to maximize co-occurrence with the previous
/// assignment (optimal assignment on the k x k contingency matrix), so the
/// classifier's logit indices keep their meaning across refinements.
inline std::vector<int> align_labels(const std::vector<int>& previous,
                                     const std::vector<int>& fresh, int k) {
  require(previous.size() == fresh.size(), "align_labels: length mismatch");
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    require(fresh[i] >= 0 && fresh[i] < k && previous[i] >= 0 && previous[i] < k,
            "align_labels: label out of range");
    overlap(fresh[i], previous[i]) += 1.0;
  }
  const std::vector<int> to_old = solve_assignment_max(overlap);
  std::vector<int> out(fresh.size());
  for (std::size_t i = 0; i < fresh.size(); ++i)
    out[i] = to_old[static_cast<std::size_t>(fresh[i])];
  return out;
}

}  // namespace ssc

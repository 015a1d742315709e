#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ssc/core.hpp"

namespace ssc {

/// Degrees of a weighted undirected graph given its affinity matrix.
inline Eigen::VectorXd degree_vector(const Eigen::MatrixXd& A) {
  require(A.rows() == A.cols(), "degree_vector: A must be square");
  return A.rowwise().sum();
}

/// Symmetric normalized Laplacian L = I - D^(-1/2) A D^(-1/2).
/// Zero-degree nodes take D^(-1/2) = 0, so an isolated node contributes a
/// unit diagonal entry (eigenvalue 1 with its own indicator eigenvector).
inline Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& A) {
  require(A.rows() == A.cols(), "normalized_laplacian: A must be square");
  require(A.allFinite(), "normalized_laplacian: non-finite affinity");
  const Eigen::Index n = A.rows();
  Eigen::VectorXd d = degree_vector(A);
  Eigen::VectorXd dis(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(d(i) >= -1e-12, "normalized_laplacian: negative degree");
    dis(i) = d(i) > 0.0 ? 1.0 / std::sqrt(d(i)) : 0.0;
  }
  Eigen::MatrixXd L = -(dis.asDiagonal() * A * dis.asDiagonal());
  L.diagonal().array() += 1.0;
  return 0.5 * (L + L.transpose());
}

/// Connected component labels (0-based, by first appearance) of the graph
/// whose edges are entries with |A_ij| > tol, ignoring the diagonal.
inline std::vector<int> connected_components(const Eigen::MatrixXd& A, double tol = 0.0) {
  require(A.rows() == A.cols(), "connected_components: A must be square");
  const Eigen::Index n = A.rows();
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> stack;
  int next = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    if (label[static_cast<std::size_t>(s)] != -1) continue;
    label[static_cast<std::size_t>(s)] = next;
    stack.assign(1, s);
    while (!stack.empty()) {
      const Eigen::Index u = stack.back();
      stack.pop_back();
      for (Eigen::Index v = 0; v < n; ++v) {
        if (v == u || label[static_cast<std::size_t>(v)] != -1) continue;
        if (std::abs(A(u, v)) > tol || std::abs(A(v, u)) > tol) {
          label[static_cast<std::size_t>(v)] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return label;
}

inline int count_components(const Eigen::MatrixXd& A, double tol = 0.0) {
  const auto lab = connected_components(A, tol);
  int k = 0;
  for (int v : lab) k = std::max(k, v + 1);
  return k;
}

}  // namespace ssc

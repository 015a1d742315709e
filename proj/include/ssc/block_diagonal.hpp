#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ssc/affinity.hpp"
#include "ssc/eigs.hpp"
#include "ssc/losses.hpp"

namespace ssc {

/// Whether the subgradient differentiates through the degree matrix or treats
/// it as a constant of the current iterate.
enum class DegreeMode { kFull, kFrozen };

struct BdResult {
  double value = 0.0;
  Eigen::MatrixXd grad;        // wrt C
  Eigen::VectorXd eigenvalues; // the k smallest Laplacian eigenvalues
};

/// Block-diagonal norm of C: sum of the k smallest eigenvalues of the
/// normalized Laplacian of A = (|C| + |C^T|)/2. Zero exactly when the graph
/// of A has at least k connected components.
inline double bd_norm(const Eigen::MatrixXd& C, int k, const EigOptions& opt = {}) {
  const Eigen::MatrixXd L = normalized_laplacian(symmetric_affinity(C));
  const EigResult e = smallest_eigs(L, k, opt);
  return e.values.sum();
}

/// Value and subgradient of the block-diagonal norm. With M the projector
/// onto the k smallest eigenvectors of L and dis = D^(-1/2) (0 on zero-degree
/// rows), the affinity-space gradient is G = -dis M dis plus, in full mode,
/// the degree feedback t_p = d_p^(-3/2) (A dis M)_pp added per row. Chaining
/// through A gives grad_C(i,j) = sign(c_ij) * (G_ij + (t_i + t_j)/2), a valid
/// subgradient choice of 0 where c_ij = 0.
inline BdResult bd_norm_and_subgradient(const Eigen::MatrixXd& C, int k,
                                        DegreeMode mode = DegreeMode::kFull,
                                        const EigOptions& opt = {}) {
  require(C.rows() == C.cols(), "bd_norm_and_subgradient: C must be square");
  const Eigen::Index n = C.rows();
  require(k >= 1 && static_cast<Eigen::Index>(k) <= n, "bd_norm_and_subgradient: k out of range");

  const Eigen::MatrixXd A = symmetric_affinity(C);
  const Eigen::VectorXd d = degree_vector(A);
  Eigen::VectorXd dis(n);
  for (Eigen::Index i = 0; i < n; ++i) dis(i) = d(i) > 0.0 ? 1.0 / std::sqrt(d(i)) : 0.0;

  Eigen::MatrixXd L = -(dis.asDiagonal() * A * dis.asDiagonal());
  L.diagonal().array() += 1.0;
  L = 0.5 * (L + L.transpose());

  const EigResult e = smallest_eigs(L, k, opt);
  const Eigen::MatrixXd M = e.vectors * e.vectors.transpose();

  const Eigen::MatrixXd G = -(dis.asDiagonal() * M * dis.asDiagonal());
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n);
  if (mode == DegreeMode::kFull) {
    const Eigen::MatrixXd ADisM = A * dis.asDiagonal() * M;
    for (Eigen::Index p = 0; p < n; ++p)
      if (d(p) > 0.0) t(p) = ADisM(p, p) / (d(p) * std::sqrt(d(p)));
  }

  BdResult out;
  out.value = e.values.sum();
  out.eigenvalues = e.values;
  out.grad.setZero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = C(i, j);
      if (c == 0.0) continue;
      const double s = c > 0.0 ? 1.0 : -1.0;
      out.grad(i, j) = s * (G(i, j) + 0.5 * (t(i) + t(j)));
    }
  return out;
}

}  // namespace ssc

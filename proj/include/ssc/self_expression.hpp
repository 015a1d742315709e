#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ssc/block_diagonal.hpp"
#include "ssc/losses.hpp"

namespace ssc {

enum class SxError { kCim, kMse };
enum class SxReg { kBd, kL2 };

/// Configuration of the self-expression objective err(Z - ZC) + gamma * reg(C).
struct SelfExpressionConfig {
  SxError error = SxError::kCim;
  SxReg reg = SxReg::kBd;
  double gamma = 1.0;
  CimConfig cim;
  int k = 0;  // cluster count, required for the block-diagonal regularizer
  DegreeMode degree_mode = DegreeMode::kFull;
  EigOptions eig;

  void validate() const {
    require(gamma >= 0.0, "SelfExpressionConfig: gamma must be >= 0");
    if (reg == SxReg::kBd) require(k >= 1, "SelfExpressionConfig: k required for bd regularizer");
    if (error == SxError::kCim) cim.validate();
  }
};

struct SxValueGrad {
  double error = 0.0;      // err(E) with E = Z - ZC
  double reg = 0.0;        // regularizer value
  double objective = 0.0;  // error + gamma * reg
  Eigen::MatrixXd grad_E;  // wrt E of the error term
  Eigen::MatrixXd grad_C;  // wrt C of the full objective, diagonal zeroed
};

inline void zero_diagonal(Eigen::MatrixXd& C) { C.diagonal().setZero(); }

/// Self-expression residual E = Z - ZC.
inline Eigen::MatrixXd self_expression_residual(const Eigen::MatrixXd& Z,
                                                const Eigen::MatrixXd& C) {
  require(C.rows() == C.cols(), "self_expression_residual: C must be square");
  require(Z.cols() == C.rows(), "self_expression_residual: Z/C size mismatch");
  return Z - Z * C;
}

/// Value and gradient of err(Z - ZC) + gamma * reg(C) wrt C, with Z treated
/// as constant. The diagonal of the gradient is zeroed to respect the
/// diag(C) = 0 constraint.
inline SxValueGrad self_expression_objective(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& C,
                                             const SelfExpressionConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd E = self_expression_residual(Z, C);

  SxValueGrad out;
  LossGrad err = (cfg.error == SxError::kCim) ? cim_loss_and_grad(E, cfg.cim)
                                              : mse_loss_and_grad(E);
  out.error = err.loss;
  out.grad_E = std::move(err.grad);
  out.grad_C.noalias() = -(Z.transpose() * out.grad_E);

  if (cfg.gamma > 0.0) {
    if (cfg.reg == SxReg::kBd) {
      BdResult bd = bd_norm_and_subgradient(C, cfg.k, cfg.degree_mode, cfg.eig);
      out.reg = bd.value;
      out.grad_C += cfg.gamma * bd.grad;
    } else {
      out.reg = C.squaredNorm();
      out.grad_C += (2.0 * cfg.gamma) * C;
    }
  } else if (cfg.reg == SxReg::kL2) {
    out.reg = C.squaredNorm();
  } else {
    out.reg = bd_norm(C, cfg.k, cfg.eig);
  }

  out.objective = out.error + cfg.gamma * out.reg;
  zero_diagonal(out.grad_C);
  return out;
}

/// Two-step cleanup of a learned C before spectral clustering. Step one keeps
/// per row the shortest large-magnitude prefix covering keep_ratio of the
/// row's absolute mass (ties broken by column index). Step two projects the
/// result onto its svd_rank leading singular triplets; 0 skips the step.
struct PostprocessConfig {
  double keep_ratio = 1.0;
  int svd_rank = 0;

  void validate() const {
    require(keep_ratio > 0.0 && keep_ratio <= 1.0, "PostprocessConfig: keep_ratio in (0,1]");
    require(svd_rank >= 0, "PostprocessConfig: svd_rank must be >= 0");
  }
};

inline Eigen::MatrixXd keep_row_mass(const Eigen::MatrixXd& C, double keep_ratio) {
  require(keep_ratio > 0.0 && keep_ratio <= 1.0, "keep_row_mass: keep_ratio in (0,1]");
  const Eigen::Index n = C.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(C.rows(), n);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double ma = std::abs(C(i, a)), mb = std::abs(C(i, b));
      if (ma != mb) return ma > mb;
      return a < b;
    });
    const double total = C.row(i).cwiseAbs().sum();
    if (total <= 0.0) continue;
    const double target = keep_ratio * total;
    double acc = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index j = idx[static_cast<std::size_t>(r)];
      out(i, j) = C(i, j);
      acc += std::abs(C(i, j));
      if (acc >= target) break;
    }
  }
  return out;
}

inline Eigen::MatrixXd svd_truncate(const Eigen::MatrixXd& C, int rank) {
  require(rank >= 1, "svd_truncate: rank must be >= 1");
  const Eigen::Index r = std::min<Eigen::Index>(rank, std::min(C.rows(), C.cols()));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

inline Eigen::MatrixXd postprocess_c(const Eigen::MatrixXd& C, const PostprocessConfig& cfg) {
  cfg.validate();
  require(C.rows() == C.cols(), "postprocess_c: C must be square");
  Eigen::MatrixXd out = (cfg.keep_ratio < 1.0) ? keep_row_mass(C, cfg.keep_ratio) : C;
  if (cfg.svd_rank > 0) out = svd_truncate(out, cfg.svd_rank);
  return out;
}

}  // namespace ssc

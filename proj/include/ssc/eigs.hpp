#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ssc/core.hpp"

namespace ssc {

enum class EigMethod { kAuto, kDense, kLanczos };

struct EigOptions {
  EigMethod method = EigMethod::kAuto;
  // Krylov dimension for the first sweep is restart_multiple * k (with a
  // small floor); each further restart doubles it, and the last restart uses
  // the full deflated space.
  int restart_multiple = 10;
  int max_restarts = 8;
  // Residual tolerance, relative to the spectral scale of the matrix.
  double tol = 1e-10;
  std::uint64_t seed = 0x00005eed;
  // Auto: dense at or below this size, Lanczos above.
  Eigen::Index dense_cutoff = 512;

  void validate() const {
    require(restart_multiple >= 1, "EigOptions: restart_multiple must be >= 1");
    require(max_restarts >= 1, "EigOptions: max_restarts must be >= 1");
    require(tol > 0.0, "EigOptions: tol must be > 0");
  }
};

struct EigResult {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns matched to values
  bool converged = false;
  int iterations = 0;       // matrix-vector products spent (0 for dense)
  bool used_dense = false;
};

/// k smallest eigenpairs by full dense decomposition.
inline EigResult dense_smallest_eigs(const Eigen::MatrixXd& S, int k) {
  require(S.rows() == S.cols(), "dense_smallest_eigs: matrix must be square");
  require(k >= 1 && k <= S.rows(), "dense_smallest_eigs: k out of range");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  require(es.info() == Eigen::Success, "dense_smallest_eigs: eigensolver failed");
  EigResult r;
  r.values = es.eigenvalues().head(k);
  r.vectors = es.eigenvectors().leftCols(k);
  r.converged = true;
  r.used_dense = true;
  return r;
}

namespace detail {

/// One Lanczos sweep with full reorthogonalization against both the Krylov
/// basis and the locked subspace. Returns the basis, the tridiagonal
/// coefficients, and the trailing beta (0 on invariant-subspace breakdown).
struct LanczosSweep {
  Eigen::MatrixXd V;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;  // beta(j) couples v_j and v_{j+1}
  double beta_last = 0.0;
  int steps = 0;
};

inline void reorthogonalize(Eigen::VectorXd& w, const Eigen::MatrixXd& basis, Eigen::Index cols) {
  if (cols <= 0) return;
  const auto B = basis.leftCols(cols);
  w.noalias() -= B * (B.transpose() * w);
  w.noalias() -= B * (B.transpose() * w);
}

inline LanczosSweep lanczos_sweep(const Eigen::MatrixXd& S, const Eigen::MatrixXd& locked,
                                  Eigen::Index locked_count, Eigen::Index m, Rng& rng,
                                  double breakdown_tol) {
  const Eigen::Index n = S.rows();
  LanczosSweep sw;
  sw.V.resize(n, m);
  sw.alpha.resize(m);
  sw.beta = Eigen::VectorXd::Zero(m);

  Eigen::VectorXd v(n);
  double vnorm = 0.0;
  do {
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
    reorthogonalize(v, locked, locked_count);
    vnorm = v.norm();
  } while (vnorm < breakdown_tol);
  sw.V.col(0) = v / vnorm;

  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd w = S * sw.V.col(j);
    sw.alpha(j) = sw.V.col(j).dot(w);
    w -= sw.alpha(j) * sw.V.col(j);
    if (j > 0) w -= sw.beta(j - 1) * sw.V.col(j - 1);
    reorthogonalize(w, sw.V, j + 1);
    reorthogonalize(w, locked, locked_count);
    const double b = w.norm();
    sw.steps = static_cast<int>(j) + 1;
    if (j + 1 == m || b < breakdown_tol) {
      sw.beta_last = b < breakdown_tol ? 0.0 : b;
      break;
    }
    sw.beta(j) = b;
    sw.V.col(j + 1) = w / b;
  }
  sw.V.conservativeResize(n, sw.steps);
  sw.alpha.conservativeResize(sw.steps);
  sw.beta.conservativeResize(std::max<Eigen::Index>(sw.steps - 1, 0));
  return sw;
}

}  // namespace detail

namespace detail {

/// Ritz pairs of one sweep: eigen-decomposition of the tridiagonal plus the
/// per-pair residual bound |beta_last * s_mi|.
struct RitzPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;    // in the original space, sw.V * s_i
  Eigen::VectorXd residuals;
};

inline RitzPairs ritz_pairs(const LanczosSweep& sw) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(sw.steps, sw.steps);
  T.diagonal() = sw.alpha;
  if (sw.steps > 1) {
    T.diagonal(1) = sw.beta;
    T.diagonal(-1) = sw.beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  require(es.info() == Eigen::Success, "lanczos_smallest_eigs: tridiagonal solve failed");
  RitzPairs rp;
  rp.values = es.eigenvalues();
  rp.vectors = sw.V * es.eigenvectors();
  rp.residuals = (sw.beta_last * es.eigenvectors().row(sw.steps - 1)).cwiseAbs();
  return rp;
}

}  // namespace detail

/// k smallest eigenpairs by restarted Lanczos with full reorthogonalization
/// and locking. One Krylov sweep exposes at most one copy of a repeated
/// eigenvalue, so locked pairs are only trusted as the k smallest after a
/// verification sweep on the deflated operator confirms nothing smaller is
/// left; each failed verification swaps the hidden copy in and repeats.
inline EigResult lanczos_smallest_eigs(const Eigen::MatrixXd& S, int k,
                                       const EigOptions& opt = {}) {
  opt.validate();
  require(S.rows() == S.cols(), "lanczos_smallest_eigs: matrix must be square");
  require(S.allFinite(), "lanczos_smallest_eigs: non-finite input");
  const Eigen::Index n = S.rows();
  require(k >= 1 && static_cast<Eigen::Index>(k) <= n, "lanczos_smallest_eigs: k out of range");

  const double scale = std::max(1.0, S.cwiseAbs().rowwise().sum().maxCoeff());
  const double res_tol = opt.tol * scale;
  const double breakdown_tol = 1e-14 * scale;

  EigResult r;
  r.values.resize(k);
  r.vectors.resize(n, k);
  Eigen::Index locked = 0;
  Rng rng(opt.seed);

  const Eigen::Index base = std::max<Eigen::Index>(
      2 * k + 10, static_cast<Eigen::Index>(opt.restart_multiple) * k);
  Eigen::Index m_fill = std::min(base, n);
  Eigen::Index m_verify = std::min(base, n);
  // Growth restarts plus up to one verification swap per requested pair.
  const int budget = opt.max_restarts + k + 4;
  bool verified = false;

  for (int sweep = 0; sweep < budget && !verified; ++sweep) {
    const bool filling = locked < k;
    // Late sweeps span the whole deflated space, which cannot stall.
    if (!filling && n - locked < 1) {
      verified = true;  // nothing left outside the locked subspace
      break;
    }
    Eigen::Index m = std::min(filling ? m_fill : m_verify, n - locked);
    if (sweep + 1 >= opt.max_restarts) m = n - locked;
    if (m < 1) break;

    const detail::LanczosSweep sw =
        detail::lanczos_sweep(S, r.vectors, locked, m, rng, breakdown_tol);
    r.iterations += sw.steps;
    if (sw.steps < 1) continue;
    const detail::RitzPairs rp = detail::ritz_pairs(sw);

    if (filling) {
      // Lock converged Ritz pairs from the small end, stopping at the first
      // unconverged one so the locked set stays contiguous at the bottom of
      // the sweep's view of the deflated spectrum.
      const Eigen::Index before = locked;
      for (Eigen::Index i = 0; i < sw.steps && locked < k; ++i) {
        if (rp.residuals(i) > res_tol) break;
        Eigen::VectorXd x = rp.vectors.col(i);
        detail::reorthogonalize(x, r.vectors, locked);
        const double xn = x.norm();
        if (xn < 0.5) continue;  // collapsed onto the locked subspace
        r.values(locked) = rp.values(i);
        r.vectors.col(locked) = x / xn;
        ++locked;
      }
      if (locked == before) m_fill = std::min(m_fill * 2, n);
      continue;
    }

    // Verification: the smallest converged Ritz value of the deflated
    // operator must not undercut the worst locked value.
    if (rp.residuals(0) > res_tol) {
      m_verify = std::min(m_verify * 2, n);
      continue;
    }
    Eigen::Index worst = 0;
    r.values.maxCoeff(&worst);
    if (rp.values(0) < r.values(worst) - res_tol) {
      Eigen::VectorXd x = rp.vectors.col(0);
      detail::reorthogonalize(x, r.vectors, locked);
      const double xn = x.norm();
      if (xn >= 0.5) {
        r.values(worst) = rp.values(0);
        r.vectors.col(worst) = x / xn;
        continue;
      }
    }
    verified = true;
  }

  if (locked < k || !verified) {
    r.converged = false;
    r.values.conservativeResize(locked);
    r.vectors.conservativeResize(n, locked);
    return r;
  }

  // Restarted locking can interleave values from different sweeps; put the
  // final pairs in ascending order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return r.values(a) < r.values(b); });
  Eigen::VectorXd vals(k);
  Eigen::MatrixXd vecs(n, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    vals(i) = r.values(order[static_cast<std::size_t>(i)]);
    vecs.col(i) = r.vectors.col(order[static_cast<std::size_t>(i)]);
  }
  r.values = vals;
  r.vectors = vecs;
  r.converged = true;
  return r;
}

/// Policy entry point: dense for small problems, Lanczos with dense fallback
/// for large ones, or exactly the requested method.
inline EigResult smallest_eigs(const Eigen::MatrixXd& S, int k, const EigOptions& opt = {}) {
  opt.validate();
  switch (opt.method) {
    case EigMethod::kDense:
      return dense_smallest_eigs(S, k);
    case EigMethod::kLanczos: {
      EigResult r = lanczos_smallest_eigs(S, k, opt);
      if (!r.converged) return dense_smallest_eigs(S, k);
      return r;
    }
    case EigMethod::kAuto:
    default: {
      if (S.rows() <= opt.dense_cutoff) return dense_smallest_eigs(S, k);
      EigResult r = lanczos_smallest_eigs(S, k, opt);
      if (!r.converged) return dense_smallest_eigs(S, k);
      return r;
    }
  }
}

}  // namespace ssc

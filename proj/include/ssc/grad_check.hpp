#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ssc/core.hpp"

namespace ssc {

/// Outcome of a finite-difference check over one parameter block.
struct GradCheckResult {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  std::size_t count = 0;

  bool ok(double tol) const { return max_rel_err < tol; }
};

/// Central-difference derivative of a scalar function along one coordinate.
/// The coordinate is restored before returning.
template <typename F>
double central_difference(F&& f, double& x, double step) {
  const double saved = x;
  x = saved + step;
  const double fp = f();
  x = saved - step;
  const double fm = f();
  x = saved;
  return (fp - fm) / (2.0 * step);
}

/// Compares an analytic gradient against central differences over a raw
/// parameter block. The relative error denominator is floored so agreement
/// near zero is judged on absolute terms.
template <typename F>
GradCheckResult check_gradient(F&& f, double* params, const double* analytic, std::size_t count,
                               double step = 1e-5, double denom_floor = 1e-6) {
  GradCheckResult r;
  r.count = count;
  for (std::size_t i = 0; i < count; ++i) {
    const double fd = central_difference(f, params[i], step);
    const double abs_err = std::abs(fd - analytic[i]);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), denom_floor});
    const double rel_err = abs_err / denom;
    if (abs_err > r.max_abs_err) r.max_abs_err = abs_err;
    if (rel_err > r.max_rel_err) {
      r.max_rel_err = rel_err;
      r.worst_index = i;
    }
  }
  return r;
}

/// Same check over an Eigen matrix parameter.
template <typename F>
GradCheckResult check_gradient(F&& f, Eigen::MatrixXd& params, const Eigen::MatrixXd& analytic,
                               double step = 1e-5, double denom_floor = 1e-6) {
  require(params.rows() == analytic.rows() && params.cols() == analytic.cols(),
          "check_gradient: analytic gradient shape mismatch");
  return check_gradient(std::forward<F>(f), params.data(), analytic.data(),
                        static_cast<std::size_t>(params.size()), step, denom_floor);
}

/// Subsampled variant for large blocks: checks `samples` coordinates chosen
/// deterministically from the given seed instead of every entry.
template <typename F>
GradCheckResult check_gradient_sampled(F&& f, double* params, const double* analytic,
                                       std::size_t count, std::size_t samples, std::uint64_t seed,
                                       double step = 1e-5, double denom_floor = 1e-6) {
  GradCheckResult r;
  r.count = std::min(samples, count);
  Rng rng(seed);
  for (std::size_t s = 0; s < r.count; ++s) {
    const std::size_t i =
        (samples >= count) ? s : static_cast<std::size_t>(rng.uniform_int(count));
    const double fd = central_difference(f, params[i], step);
    const double abs_err = std::abs(fd - analytic[i]);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), denom_floor});
    const double rel_err = abs_err / denom;
    if (abs_err > r.max_abs_err) r.max_abs_err = abs_err;
    if (rel_err > r.max_rel_err) {
      r.max_rel_err = rel_err;
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace ssc

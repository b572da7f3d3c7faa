#pragma once

// Adaptive composite Simpson integration with an interval-doubling
// (Richardson) convergence test. The accumulated |S_fine - S_coarse| / 15
// is an error ESTIMATE, not a rigorous bound; callers that need honest
// accounting must report it separately from analytic certificates.

#include <cmath>
#include <cstdint>
#include <functional>

#include "cubevar/errors.hpp"

namespace cubevar {

struct QuadratureResult {
  double value{};
  double error_estimate{};
  std::int64_t evals{};
};

namespace detail {

template <typename F>
double simpson_adaptive(const F& f, double a, double b, double fa, double fm, double fb, double s,
                        double tol, int depth, double& err_acc, std::int64_t& evals) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  evals += 2;
  const double h = b - a;
  const double sl = (h / 12.0) * (fa + 4.0 * flm + fm);
  const double sr = (h / 12.0) * (fm + 4.0 * frm + fb);
  const double d = (sl + sr) - s;
  if (depth <= 0 || std::fabs(d) <= 15.0 * tol || !(lm > a && rm > m)) {
    err_acc += std::fabs(d) / 15.0;
    return sl + sr + d / 15.0;
  }
  return simpson_adaptive(f, a, m, fa, flm, fm, sl, 0.5 * tol, depth - 1, err_acc, evals) +
         simpson_adaptive(f, m, b, fm, frm, fb, sr, 0.5 * tol, depth - 1, err_acc, evals);
}

}  // namespace detail

template <typename F>
QuadratureResult integrate_adaptive(const F& f, double a, double b, double tol,
                                    int max_depth = 48) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw precondition_error("integration bounds must be finite");
  if (!(tol > 0.0)) throw precondition_error("quadrature tol must be positive");
  if (a == b) return {0.0, 0.0, 0};
  QuadratureResult r;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  r.evals = 3;
  const double s = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  r.value = detail::simpson_adaptive(f, a, b, fa, fm, fb, s, tol, max_depth, r.error_estimate,
                                     r.evals);
  return r;
}

}  // namespace cubevar

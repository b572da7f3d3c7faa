#pragma once

// Asymptotic covariance structure of the pair (W_{a_n}, W_{b_n}) for each
// regime of mesh sequences:
//
//   degenerate          L_n -> 0 or infinity     rho = 0
//   rational constant   L_n = L = p/q eventually rho = (3/4p) sum_{j=1}^q f_L(j/q)
//   integral constant   L_n -> L, L_n != L       rho = (3/4L) int_0^1 f_L
//   mod-k               b_n = k mod a_n          rho(t) = (3/4L) f^_L(kt)
//
// plus the cumulative covariance int_0^t rho, the asymptotic correlation
// gamma(t) = (1/kappa^2 t) int_0^t rho, the diffusion matrix sigma(t) with
// sigma sigma^T = [[kappa^2, rho], [rho, kappa^2]], and exact Gaussian
// sampling of the limit process X^rho.
//
// For the integral-constant regime without gcd(a_n,b_n) -> infinity the
// convergence is established only at t = 1; values at other t are an
// extrapolation. Regimes are declared, never inferred; validate_regime is
// a sanity filter over finitely many pairs and cannot certify an
// asymptotic property.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <variant>
#include <vector>

#include "cubevar/errors.hpp"
#include "cubevar/quadrature.hpp"
#include "cubevar/rng.hpp"
#include "cubevar/series.hpp"

namespace cubevar {

struct Degenerate {
  bool to_infinity{false};  // L_n -> infinity instead of 0
};
struct RationalConstant {
  std::int64_t p{1};
  std::int64_t q{1};  // L = p/q in lowest terms
};
struct IntegralConstant {
  double L{1.0};
};
struct ModK {
  double L{1.0};
  std::int64_t k{1};
};
using RegimeSpec = std::variant<Degenerate, RationalConstant, IntegralConstant, ModK>;

struct RhoFunction {
  RegimeSpec regime;
  TruncationBudget budget{TruncationBudget::tolerance(1e-8)};
};

using Mat2 = std::array<std::array<double, 2>, 2>;

struct SigmaMatrix {
  Mat2 entries{};
};

namespace detail {

inline void check_rational(const RationalConstant& rc) {
  if (rc.p < 1 || rc.q < 1) throw precondition_error("rational regime: p, q must be positive");
  if (std::gcd(rc.p, rc.q) != 1) throw precondition_error("rational regime: p/q must be coprime");
}

inline void check_integral(const IntegralConstant& ic) {
  if (!(ic.L > 0.0) || !std::isfinite(ic.L))
    throw precondition_error("integral regime: L must be positive and finite");
}

inline void check_modk(const ModK& mk) {
  if (!(mk.L > 0.0) || !std::isfinite(mk.L))
    throw precondition_error("mod-k regime: L must be positive and finite");
  if (mk.k < 1) throw precondition_error("mod-k regime: k must be a positive integer");
}

struct FIntegral {
  double value{};
  double series_error{};    // rigorous: length * tail bound
  double quad_estimate{};   // heuristic Richardson estimate
  std::int64_t cutoff{};
};

// int_0^c f_L(x) dx, c in [0,1], with the series cutoff fixed across the
// whole quadrature so the integrand is a single truncated function.
inline FIntegral integrate_f_l(double L, double c, std::int64_t m_cutoff, double quad_tol) {
  FIntegral out;
  out.cutoff = m_cutoff;
  if (c <= 0.0) return out;
  const auto q = integrate_adaptive(
      [L, m_cutoff](double x) { return f_sum_truncated(L, x, m_cutoff); }, 0.0, c, quad_tol);
  out.value = q.value;
  out.series_error = c * series_tail_bound(m_cutoff, L);
  out.quad_estimate = q.error_estimate;
  return out;
}

// Resolve a budget into a cutoff such that `scale * tail <= tol/2` in
// tolerance mode, leaving the other half of the budget to quadrature.
inline std::int64_t cutoff_for_scaled(const TruncationBudget& budget, double L, double scale) {
  if (budget.has_tolerance())
    return cutoff_for_tolerance(budget.tol() / (2.0 * std::max(scale, 1e-300)), L);
  return resolve_cutoff(budget, L, 1.0);
}

}  // namespace detail

// Asymptotic instantaneous covariance rho(t) for the declared regime.
// Constant in t except in the mod-k regime. The degenerate regime returns
// exactly zero with a zero certificate.
inline CertifiedValue rho_value(const RhoFunction& rf, double t) {
  if (!std::isfinite(t) || t < 0.0) throw precondition_error("rho_value: t must be >= 0");
  if (std::holds_alternative<Degenerate>(rf.regime)) return {0.0, 0.0, 0};

  if (const auto* rc = std::get_if<RationalConstant>(&rf.regime)) {
    detail::check_rational(*rc);
    const double L = static_cast<double>(rc->p) / static_cast<double>(rc->q);
    const double scale = 3.0 / (4.0 * static_cast<double>(rc->p));
    // q terms share one cutoff; budget covers the summed certificate
    TruncationBudget inner =
        rf.budget.has_tolerance()
            ? TruncationBudget::tolerance(rf.budget.tol() /
                                          (scale * static_cast<double>(rc->q)))
            : rf.budget;
    const std::int64_t m = detail::resolve_cutoff(inner, L, 1.0);
    detail::CompensatedSum acc;
    for (std::int64_t j = 1; j <= rc->q; ++j)
      acc.add(detail::f_sum_truncated(L, static_cast<double>(j) / static_cast<double>(rc->q), m));
    const double tail = series_tail_bound(m, L);
    return {scale * acc.get(), scale * static_cast<double>(rc->q) * tail, m};
  }

  if (const auto* ic = std::get_if<IntegralConstant>(&rf.regime)) {
    detail::check_integral(*ic);
    const double scale = 3.0 / (4.0 * ic->L);
    const std::int64_t m = detail::cutoff_for_scaled(rf.budget, ic->L, scale);
    const double quad_tol =
        rf.budget.has_tolerance() ? rf.budget.tol() / (2.0 * scale)
                                  : series_tail_bound(m, ic->L);
    const auto integral = detail::integrate_f_l(ic->L, 1.0, m, quad_tol);
    return {scale * integral.value,
            scale * (integral.series_error + integral.quad_estimate), m};
  }

  const auto& mk = std::get<ModK>(rf.regime);
  detail::check_modk(mk);
  const double scale = 3.0 / (4.0 * mk.L);
  TruncationBudget inner = rf.budget.has_tolerance()
                               ? TruncationBudget::tolerance(rf.budget.tol() / scale)
                               : rf.budget;
  const CertifiedValue f = f_hat_l(mk.L, static_cast<double>(mk.k) * t, inner);
  return {scale * f.value, scale * f.error_bound, f.cutoff_used};
}

// Cumulative covariance int_0^t rho(x) dx. For the mod-k regime this uses
// the change-of-variable decomposition
//   int_0^t f^_L(kx) dx = (floor(kt)/k) int_0^1 f_L + (1/k) int_0^{kt-floor(kt)} f_L.
inline CertifiedValue cum_cov(const RhoFunction& rf, double t) {
  if (!std::isfinite(t) || t < 0.0) throw precondition_error("cum_cov: t must be >= 0");
  if (std::holds_alternative<Degenerate>(rf.regime)) return {0.0, 0.0, 0};
  if (t == 0.0) return {0.0, 0.0, 0};

  if (const auto* mk = std::get_if<ModK>(&rf.regime)) {
    detail::check_modk(*mk);
    const double scale = 3.0 / (4.0 * mk->L);
    const double kt = static_cast<double>(mk->k) * t;
    const double whole = std::floor(kt);
    const double frac = kt - whole;
    const double kd = static_cast<double>(mk->k);
    // coefficient in front of the rigorous tail: scale * (whole + frac)/k = scale * t
    const std::int64_t m = detail::cutoff_for_scaled(rf.budget, mk->L, scale * t);
    const double quad_tol = rf.budget.has_tolerance()
                                ? rf.budget.tol() / (4.0 * scale * std::max(whole / kd, 1.0))
                                : series_tail_bound(m, mk->L);
    detail::FIntegral unit;
    if (whole >= 1.0) unit = detail::integrate_f_l(mk->L, 1.0, m, quad_tol);
    detail::FIntegral part;
    if (frac > 0.0) part = detail::integrate_f_l(mk->L, frac, m, quad_tol);
    const double value = scale * ((whole / kd) * unit.value + part.value / kd);
    const double err = scale * ((whole / kd) * (unit.series_error + unit.quad_estimate) +
                                (part.series_error + part.quad_estimate) / kd);
    return {value, err, m};
  }

  // constant-rho regimes
  TruncationBudget inner = rf.budget.has_tolerance()
                               ? TruncationBudget::tolerance(rf.budget.tol() / std::max(t, 1.0))
                               : rf.budget;
  const CertifiedValue rho = rho_value({rf.regime, inner}, 0.0);
  return {rho.value * t, rho.error_bound * t, rho.cutoff_used};
}

namespace detail {

inline CertifiedValue interval_quotient(const CertifiedValue& num, const CertifiedValue& den) {
  const double nl = num.value - num.error_bound, nh = num.value + num.error_bound;
  const double dl = den.value - den.error_bound, dh = den.value + den.error_bound;
  if (!(dl > 0.0)) throw internal_error("interval quotient: denominator not certified positive");
  const std::array<double, 4> q{nl / dl, nl / dh, nh / dl, nh / dh};
  const double lo = *std::min_element(q.begin(), q.end());
  const double hi = *std::max_element(q.begin(), q.end());
  return {0.5 * (lo + hi), 0.5 * (hi - lo), num.cutoff_used};
}

}  // namespace detail

// Asymptotic correlation gamma(t) = cum_cov(t) / (kappa^2 t), with interval
// propagation over the two certificates. For constant-rho regimes t cancels
// and gamma is evaluated as rho / kappa^2, identical for every t.
inline CertifiedValue gamma_corr(const RhoFunction& rf, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw precondition_error("gamma: t must be positive");
  const CertifiedValue ks = kappa_sq(rf.budget);
  if (!std::holds_alternative<ModK>(rf.regime))
    return detail::interval_quotient(rho_value(rf, 0.0), ks);
  CertifiedValue c = cum_cov(rf, t);
  CertifiedValue den{ks.value * t, ks.error_bound * t, ks.cutoff_used};
  return detail::interval_quotient(c, den);
}

// sigma(t) such that sigma sigma^T = [[kappa^2, rho], [rho, kappa^2]].
inline SigmaMatrix sigma_matrix(double rho_t, double kappa_sq_val) {
  if (!(kappa_sq_val > 0.0) || !std::isfinite(kappa_sq_val) || !std::isfinite(rho_t))
    throw std::domain_error("sigma_matrix: need finite rho and positive kappa^2");
  if (std::fabs(rho_t) > kappa_sq_val)
    throw std::domain_error("sigma_matrix: |rho| exceeds kappa^2");
  const double kappa = std::sqrt(kappa_sq_val);
  const double ratio = rho_t / kappa_sq_val;
  const double rad = std::max(0.0, 1.0 - ratio * ratio);
  SigmaMatrix s;
  s.entries[0][0] = kappa * std::sqrt(rad);
  s.entries[0][1] = kappa * ratio;  // = rho / kappa
  s.entries[1][0] = 0.0;
  s.entries[1][1] = kappa;
  return s;
}

// Cov(X^rho(s), X^rho(t)): both components are kappa^2-variance Brownian
// motions, cross-covariance cum_cov(s ^ t).
inline Mat2 limit_cov(const RhoFunction& rf, double s, double t) {
  if (!std::isfinite(s) || !std::isfinite(t) || s < 0.0 || t < 0.0)
    throw precondition_error("limit_cov: times must be >= 0");
  const double m = std::min(s, t);
  const double var = kappa_sq(rf.budget).value * m;
  const double cross = cum_cov(rf, m).value;
  return {{{var, cross}, {cross, var}}};
}

// Exact Gaussian sampler for (X^{rho,1}, X^{rho,2}) on a fixed grid.
// The per-interval increment covariance
//   [[kappa^2 dt, dC], [dC, kappa^2 dt]],  dC = cum_cov(t_{i+1}) - cum_cov(t_i),
// is factored once at construction; draws are then two normals per step.
class LimitProcessSampler {
 public:
  LimitProcessSampler(const RhoFunction& rf, std::vector<double> grid) : grid_(std::move(grid)) {
    if (grid_.empty()) throw precondition_error("limit process sampler: empty grid");
    if (!std::isfinite(grid_[0]) || grid_[0] < 0.0)
      throw precondition_error("limit process sampler: grid must start at or after 0");
    for (std::size_t i = 1; i < grid_.size(); ++i)
      if (!(grid_[i] > grid_[i - 1]))
        throw precondition_error("limit process sampler: grid must be strictly increasing");
    const double ks = kappa_sq(rf.budget).value;
    double t_prev = 0.0, cum_prev = 0.0;
    steps_.reserve(grid_.size());
    for (double g : grid_) {
      Step st;
      const double dt = g - t_prev;
      if (dt > 0.0) {
        const double cum_here = cum_cov(rf, g).value;
        const double dv = ks * dt;
        const double dc = cum_here - cum_prev;
        st.l11 = std::sqrt(dv);
        st.l21 = dc / st.l11;
        st.l22 = std::sqrt(std::max(0.0, dv - st.l21 * st.l21));
        st.draw = true;
        t_prev = g;
        cum_prev = cum_here;
      }
      steps_.push_back(st);
    }
  }

  std::size_t size() const { return grid_.size(); }
  const std::vector<double>& grid() const { return grid_; }

  void sample_into(GaussianStream& stream, std::vector<double>& x1,
                   std::vector<double>& x2) const {
    x1.assign(grid_.size(), 0.0);
    x2.assign(grid_.size(), 0.0);
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      if (steps_[i].draw) {
        const double z1 = stream.normal();
        const double z2 = stream.normal();
        v1 += steps_[i].l11 * z1;
        v2 += steps_[i].l21 * z1 + steps_[i].l22 * z2;
      }
      x1[i] = v1;
      x2[i] = v2;
    }
  }

 private:
  struct Step {
    double l11{}, l21{}, l22{};
    bool draw{false};
  };
  std::vector<double> grid_;
  std::vector<Step> steps_;
};

// One sample of the limit process at the grid points; deterministic given
// the seed.
inline std::pair<std::vector<double>, std::vector<double>> sample_limit_process(
    const RhoFunction& rf, const std::vector<double>& grid, std::uint64_t seed) {
  LimitProcessSampler sampler(rf, grid);
  GaussianStream stream(seed);
  std::vector<double> x1, x2;
  sampler.sample_into(stream, x1, x2);
  return {std::move(x1), std::move(x2)};
}

// Consistency filter: does the declared regime fit finitely many observed
// (a_n, b_n)? Necessarily heuristic; membership is an asymptotic property.
inline bool validate_regime(const RegimeSpec& spec,
                            const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs) {
  if (pairs.empty()) throw precondition_error("validate_regime: empty pair list");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].first < 1 || pairs[i].second < 1)
      throw precondition_error("validate_regime: mesh counts must be positive");
    if (i > 0 && (pairs[i].first <= pairs[i - 1].first || pairs[i].second <= pairs[i - 1].second))
      throw precondition_error("validate_regime: pairs must increase in both coordinates");
  }
  auto ratio = [](const std::pair<std::int64_t, std::int64_t>& ab) {
    return static_cast<double>(ab.second) / static_cast<double>(ab.first);
  };

  if (const auto* d = std::get_if<Degenerate>(&spec)) {
    for (std::size_t i = 1; i < pairs.size(); ++i) {
      const double prev = ratio(pairs[i - 1]), cur = ratio(pairs[i]);
      if (d->to_infinity ? cur < prev : cur > prev) return false;
    }
    return pairs.size() < 2 || (d->to_infinity ? ratio(pairs.back()) > ratio(pairs.front())
                                               : ratio(pairs.back()) < ratio(pairs.front()));
  }

  if (const auto* rc = std::get_if<RationalConstant>(&spec)) {
    detail::check_rational(*rc);
    // exact ratio must hold from some index onward, including the last
    bool seen = false;
    for (const auto& ab : pairs) {
      const bool holds = ab.second * rc->q == ab.first * rc->p;
      if (seen && !holds) return false;
      seen = seen || holds;
    }
    return seen;
  }

  if (const auto* ic = std::get_if<IntegralConstant>(&spec)) {
    detail::check_integral(*ic);
    bool left_exact = false;  // L_n = L allowed only as a prefix
    double prev_dev = -1.0;
    for (const auto& ab : pairs) {
      const double dev = std::fabs(ratio(ab) - ic->L);
      if (dev == 0.0 && left_exact) return false;
      if (dev > 0.0) left_exact = true;
      if (prev_dev >= 0.0 && dev > prev_dev * (1.0 + 1e-12)) return false;
      prev_dev = dev;
    }
    return std::fabs(ratio(pairs.back()) - ic->L) > 0.0;
  }

  const auto& mk = std::get<ModK>(spec);
  detail::check_modk(mk);
  double prev_dev = -1.0;
  for (const auto& ab : pairs) {
    if (ab.second % ab.first != mk.k % ab.first) return false;
    const double dev = std::fabs(ratio(ab) - mk.L);
    if (prev_dev >= 0.0 && dev > prev_dev * (1.0 + 1e-12)) return false;
    prev_dev = dev;
  }
  return true;
}

}  // namespace cubevar

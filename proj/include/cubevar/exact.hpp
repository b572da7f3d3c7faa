#pragma once

// Exact finite-n covariances of the cubic-variation processes
//
//   E[W~_a(s) W~_b(t)] = (3/4) sum_{j=1}^{floor(as)} sum_{k=1}^{floor(bt)}
//                        Phi_n^{a,b}(j,k)^3
//
// via a full O(ab) double sum or a certified band-truncated fast mode, plus
// the fBm scaling identity relating (a,b,rt) to (ra,rb,t).
//
// All Phi_n values are formed from exact integer differences: with
// e = j*b - k*a,
//
//   Phi_n(j,k) = (ab)^{-1/3} (|e+a|^{1/3} + |e-b|^{1/3}
//                             - |e-b+a|^{1/3} - |e|^{1/3}),
//
// so grid arguments are never accumulated and the term is bit-symmetric
// under (a,j) <-> (b,k).

#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <variant>
#include <vector>

#include "cubevar/errors.hpp"
#include "cubevar/kernel.hpp"

namespace cubevar {

// h_3(x) = x^3 - 3x, the third Hermite polynomial.
inline double hermite3(double x) { return x * x * x - 3.0 * x; }

struct FullMode {};
struct BandedMode {
  std::int64_t band{};
};
using CovMode = std::variant<FullMode, BandedMode>;

struct CovRequest {
  GridPair g;
  double s{};
  double t{};
  CovMode mode{FullMode{}};
};

struct CovResult {
  double value{};
  double certified_remainder{};
};

namespace detail {

struct CompensatedSumE {
  double sum{0.0};
  double comp{0.0};
  void add(double v) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double get() const { return sum + comp; }
};

// Row sum over k in [k_lo, k_hi] of (|e+a|^{1/3} + |e-b|^{1/3} - |e-b+a|^{1/3}
// - |e|^{1/3})^3 with e = j*b - k*a. Stepping k forward shifts e by -a, so two
// of the four cube roots carry over between iterations.
inline double row_sum_raw(std::int64_t j, std::int64_t a, std::int64_t b, std::int64_t k_lo,
                          std::int64_t k_hi) {
  if (k_lo > k_hi) return 0.0;
  CompensatedSumE acc;
  std::int64_t e = j * b - k_lo * a;
  double c_ea = cbrt_abs(static_cast<double>(e + a));
  double c_e = cbrt_abs(static_cast<double>(e));
  double c_eb = cbrt_abs(static_cast<double>(e - b));
  double c_eba = cbrt_abs(static_cast<double>(e - b + a));
  for (std::int64_t k = k_lo;;) {
    const double p = (c_ea + c_eb) - (c_eba + c_e);
    acc.add(p * p * p);
    if (k == k_hi) break;
    ++k;
    e -= a;
    c_ea = c_e;
    c_eba = c_eb;
    c_e = cbrt_abs(static_cast<double>(e));
    c_eb = cbrt_abs(static_cast<double>(e - b));
  }
  return acc.get();
}

// Rows are grouped into fixed-size chunks; each chunk is reduced in row
// order and chunk totals are combined in order, so the result is identical
// for any thread count.
inline constexpr std::int64_t kRowChunk = 1024;

template <typename RowRange>
double banded_sum(std::int64_t a, std::int64_t b, std::int64_t jmax, const RowRange& range,
                  int threads) {
  const std::int64_t nchunks = (jmax + kRowChunk - 1) / kRowChunk;
  std::vector<double> chunk_vals(static_cast<std::size_t>(nchunks), 0.0);
  auto run_chunk = [&](std::int64_t c) {
    const std::int64_t j_lo = c * kRowChunk + 1;
    const std::int64_t j_hi = std::min(jmax, (c + 1) * kRowChunk);
    CompensatedSumE acc;
    for (std::int64_t j = j_lo; j <= j_hi; ++j) {
      const auto [k_lo, k_hi] = range(j);
      acc.add(row_sum_raw(j, a, b, k_lo, k_hi));
    }
    chunk_vals[static_cast<std::size_t>(c)] = acc.get();
  };
  if (threads <= 1 || nchunks <= 1) {
    for (std::int64_t c = 0; c < nchunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::int64_t c = next.fetch_add(1);
        if (c >= nchunks) return;
        run_chunk(c);
      }
    };
    std::vector<std::thread> pool;
    const int nt = static_cast<int>(std::min<std::int64_t>(threads, nchunks));
    pool.reserve(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  CompensatedSumE total;
  for (double v : chunk_vals) total.add(v);
  return total.get();
}

inline void check_request(const CovRequest& req) {
  if (req.g.a < 1 || req.g.b < 1) throw precondition_error("mesh counts must be >= 1");
  if (!std::isfinite(req.s) || !std::isfinite(req.t) || req.s < 0.0 || req.t < 0.0)
    throw precondition_error("times must be finite and nonnegative");
}

inline std::int64_t floor_time_index(std::int64_t n, double t) {
  const double x = std::floor(static_cast<double>(n) * t);
  if (x > 9.0e15) throw resource_error("time index too large");
  return static_cast<std::int64_t>(x);
}

inline void check_integer_range(std::int64_t a, std::int64_t b, std::int64_t jmax,
                                std::int64_t kmax) {
  // e = j*b - k*a must stay exactly representable in double
  const double lim = 4.5e15;
  if (static_cast<double>(jmax) * static_cast<double>(b) > lim ||
      static_cast<double>(kmax) * static_cast<double>(a) > lim)
    throw resource_error("request too large for exact integer differencing");
}

inline std::int64_t ceil_ratio(std::int64_t b, std::int64_t a) { return (b + a - 1) / a; }

}  // namespace detail

// E[W~_a(s) W~_b(t)]. Full mode is exact up to floating summation
// (certified_remainder = 0). Banded mode keeps only the diagonal band
// |k - floor(j b / a)| <= band and certifies the rest: with
// M0 = max(2, ceil(b/a)), every omitted band index m satisfies
// sum_j |Phi_n(j, m + floor(jL))|^3 <= 27 (floor(as)/a) (|m| - M0)^{-3},
// and integral comparison closes the sum over |m| > band.
inline CovResult exact_cov_tilde(const CovRequest& req, int threads = 1) {
  detail::check_request(req);
  std::int64_t a = req.g.a, b = req.g.b;
  double s = req.s, t = req.t;

  if (std::holds_alternative<FullMode>(req.mode)) {
    // canonical orientation: rows on the coarser mesh, so that
    // exact_cov_tilde(a,b,s,t) and exact_cov_tilde(b,a,t,s) reduce in the
    // same order and agree bit-for-bit
    if (b < a || (a == b && t < s)) {
      std::swap(a, b);
      std::swap(s, t);
    }
    const std::int64_t jmax = detail::floor_time_index(a, s);
    const std::int64_t kmax = detail::floor_time_index(b, t);
    if (jmax <= 0 || kmax <= 0) return {0.0, 0.0};
    detail::check_integer_range(a, b, jmax, kmax);
    const double raw = detail::banded_sum(
        a, b, jmax, [kmax](std::int64_t) { return std::pair<std::int64_t, std::int64_t>{1, kmax}; },
        threads);
    const double inv_ab = 1.0 / (static_cast<double>(a) * static_cast<double>(b));
    return {0.75 * inv_ab * raw, 0.0};
  }

  const auto banded = std::get<BandedMode>(req.mode);
  const std::int64_t m0 = std::max<std::int64_t>(2, detail::ceil_ratio(b, a));
  if (banded.band < std::max<std::int64_t>(3, detail::ceil_ratio(b, a) + 1))
    throw precondition_error("banded mode: band must be >= max(3, ceil(b/a)+1)");
  const std::int64_t jmax = detail::floor_time_index(a, s);
  const std::int64_t kmax = detail::floor_time_index(b, t);
  if (jmax <= 0 || kmax <= 0) return {0.0, 0.0};
  detail::check_integer_range(a, b, jmax, kmax);
  const std::int64_t band = banded.band;
  const double raw = detail::banded_sum(
      a, b, jmax,
      [=](std::int64_t j) {
        const std::int64_t kc = (j * b) / a;  // floor(j L_n), exact
        return std::pair<std::int64_t, std::int64_t>{std::max<std::int64_t>(1, kc - band),
                                                     std::min(kmax, kc + band)};
      },
      threads);
  const double inv_ab = 1.0 / (static_cast<double>(a) * static_cast<double>(b));
  const double s_eff = static_cast<double>(jmax) / static_cast<double>(a);
  const double remainder =
      0.75 * s_eff * 27.0 / (static_cast<double>(band - m0) * static_cast<double>(band - m0));
  return {0.75 * inv_ab * raw, remainder};
}

// E[W_a(s) W_b(t)] = E[W~_a(s) W~_b(t)] + 9 (ab)^{-1/3} R(floor(as)/a,
// floor(bt)/b); the first- and third-chaos components are uncorrelated, so
// the decomposition is exact.
inline CovResult exact_cov_w(const CovRequest& req, int threads = 1) {
  detail::check_request(req);
  CovResult r = exact_cov_tilde(req, threads);
  const std::int64_t jmax = detail::floor_time_index(req.g.a, req.s);
  const std::int64_t kmax = detail::floor_time_index(req.g.b, req.t);
  if (jmax <= 0 || kmax <= 0) return r;
  const double sa = static_cast<double>(jmax) / static_cast<double>(req.g.a);
  const double tb = static_cast<double>(kmax) / static_cast<double>(req.g.b);
  const double scale =
      9.0 / (cbrt_abs(static_cast<double>(req.g.a)) * cbrt_abs(static_cast<double>(req.g.b)));
  r.value += scale * cov_r(sa, tb);
  return r;
}

struct ScalingCheckResult {
  double lhs{};
  double rhs{};
};

// Finite-n scaling identity: E[W~_a(rt) W~_b(rt)] = r E[W~_{ra}(t) W~_{rb}(t)]
// holds exactly term by term; both sides are evaluated in full mode.
inline ScalingCheckResult scaling_check(const GridPair& g, std::int64_t r, double t,
                                        int threads = 1) {
  if (r < 1) throw precondition_error("scaling_check: r must be a positive integer");
  if (!(t > 0.0) || !std::isfinite(t)) throw precondition_error("scaling_check: t must be positive");
  if (g.a > (std::int64_t{1} << 40) / r || g.b > (std::int64_t{1} << 40) / r)
    throw resource_error("scaling_check: scaled mesh overflows");
  const double rd = static_cast<double>(r);
  CovResult lhs = exact_cov_tilde({g, rd * t, rd * t, FullMode{}}, threads);
  CovResult rhs = exact_cov_tilde({{g.a * r, g.b * r}, t, t, FullMode{}}, threads);
  return {lhs.value, rd * rhs.value};
}

// E[W~_a(s) B(t)] = 0 for every a, s, t: the third and first Wiener chaoses
// are orthogonal. Exposed as the structural zero the MC tests target.
inline double cross_chaos_cov(std::int64_t a, double s, double t) {
  if (a < 1) throw precondition_error("cross_chaos_cov: mesh must be >= 1");
  if (!std::isfinite(s) || !std::isfinite(t) || s < 0.0 || t < 0.0)
    throw precondition_error("cross_chaos_cov: times must be finite and nonnegative");
  return 0.0;
}

}  // namespace cubevar

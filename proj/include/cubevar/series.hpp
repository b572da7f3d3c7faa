#pragma once

// The family f_{m,L}(x) = Phi(x, x+1, m, m+L)^3, its absolutely convergent
// sum f_L = sum_{m in Z} f_{m,L}, the period-1 extension f^_L, and the
// variance constants kappa^2 and kappa_L^2.
//
// Every summed quantity carries a rigorous truncation certificate built from
// the sup-norm bounds
//
//   ||f_{m,L}||_inf <= L^{3/4} |m + L|^{-5/2}   (m < -L)
//   ||f_{m,L}||_inf <= L^{3/4} |m - 2|^{-5/2}   (m > 2)
//   ||f_{m,L}||_inf <= 8                        (otherwise)
//
// closed by integral comparison: the omitted tail over |m| > M is at most
// (2/3) L^{3/4} ((M - L)^{-3/2} + (M - 2)^{-3/2}).
//
// Floating-point summation error is controlled separately (compensated
// summation in a fixed order) and is not part of the analytic certificate.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cubevar/errors.hpp"
#include "cubevar/kernel.hpp"

namespace cubevar {

// Absolute-error budget for a truncated series: either a tolerance the
// certificate must meet, or an explicit symmetric cutoff |m| <= M.
class TruncationBudget {
 public:
  static TruncationBudget tolerance(double tol) {
    if (!(tol > 0.0) || !std::isfinite(tol))
      throw precondition_error("TruncationBudget: tol must be positive and finite");
    TruncationBudget b;
    b.tol_ = tol;
    return b;
  }
  static TruncationBudget cutoff(std::int64_t m) {
    if (m < 1) throw precondition_error("TruncationBudget: cutoff must be positive");
    TruncationBudget b;
    b.cutoff_ = m;
    return b;
  }

  bool has_tolerance() const { return tol_ > 0.0; }
  double tol() const { return tol_; }
  std::int64_t explicit_cutoff() const { return cutoff_; }

 private:
  TruncationBudget() = default;
  double tol_{-1.0};
  std::int64_t cutoff_{-1};
};

// A numeric result with a rigorous absolute error bound: the true quantity
// lies in [value - error_bound, value + error_bound].
struct CertifiedValue {
  double value{};
  double error_bound{};
  std::int64_t cutoff_used{};
};

namespace detail {

// Largest cutoff the summation engine will accept before declaring the
// budget unreachable. tail(2^26, 1) ~ 2.4e-12, the practical floor.
inline constexpr std::int64_t kMaxCutoff = std::int64_t{1} << 26;

inline void check_fl_args(double L, double x) {
  if (!(L > 0.0) || !std::isfinite(L)) throw precondition_error("L must be positive and finite");
  if (!std::isfinite(x) || x < 0.0 || x > 1.0)
    throw precondition_error("x must lie in [0,1]");
}

}  // namespace detail

// f_{m,L}(x) = (|x-m+1|^{1/3} + |x-m-L|^{1/3} - |x-m|^{1/3} - |x-m+1-L|^{1/3})^3.
inline double f_ml(std::int64_t m, double L, double x) {
  detail::check_fl_args(L, x);
  const double u = x - static_cast<double>(m);
  const double p = (cbrt_abs(u + 1.0) + cbrt_abs(u - L)) - (cbrt_abs(u) + cbrt_abs(u + 1.0 - L));
  return p * p * p;
}

// Proven bound on sup_{x in [0,1]} |f_{m,L}(x)|.
inline double f_ml_sup_bound(std::int64_t m, double L) {
  if (!(L > 0.0) || !std::isfinite(L)) throw precondition_error("L must be positive and finite");
  const double md = static_cast<double>(m);
  if (md < -L) return std::pow(L, 0.75) * std::pow(std::fabs(md + L), -2.5);
  if (m > 2) return std::pow(L, 0.75) * std::pow(md - 2.0, -2.5);
  return 8.0;
}

// Proven bound on sum_{|m| > M} ||f_{m,L}||_inf. Requires M > max(2, ceil(L)).
inline double series_tail_bound(std::int64_t m_cut, double L) {
  if (!(L > 0.0) || !std::isfinite(L)) throw precondition_error("L must be positive and finite");
  const double md = static_cast<double>(m_cut);
  if (!(md > std::max(2.0, std::ceil(L))))
    throw precondition_error("series_tail_bound: cutoff must exceed max(2, ceil(L))");
  return (2.0 / 3.0) * std::pow(L, 0.75) * (std::pow(md - L, -1.5) + std::pow(md - 2.0, -1.5));
}

namespace detail {

inline std::int64_t next_pow2_i64(std::int64_t v) {
  std::int64_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

// Smallest power-of-two cutoff whose closed-form tail certificate meets tol.
inline std::int64_t cutoff_for_tolerance(double tol, double L) {
  const std::int64_t m_min = static_cast<std::int64_t>(std::max(2.0, std::ceil(L))) + 1;
  // Invert the dominant term to seed the search, then walk to the smallest
  // admissible M before rounding up.
  const double lead = (4.0 / 3.0) * std::pow(L, 0.75) / tol;
  std::int64_t guess =
      m_min + static_cast<std::int64_t>(std::ceil(std::pow(std::max(lead, 1.0), 2.0 / 3.0)));
  guess = std::max(guess, m_min);
  while (guess > m_min && series_tail_bound(guess - 1, L) <= tol) --guess;
  while (series_tail_bound(guess, L) > tol) {
    ++guess;
    if (guess > kMaxCutoff)
      throw resource_error("truncation budget unreachable: required cutoff exceeds limit");
  }
  std::int64_t m = next_pow2_i64(guess);
  if (m > kMaxCutoff)
    throw resource_error("truncation budget unreachable: required cutoff exceeds limit");
  return std::max(m, m_min);
}

inline std::int64_t resolve_cutoff(const TruncationBudget& budget, double L, double scale) {
  if (budget.has_tolerance()) return cutoff_for_tolerance(budget.tol() * scale, L);
  const std::int64_t m = budget.explicit_cutoff();
  if (!(static_cast<double>(m) > std::max(2.0, std::ceil(L))))
    throw precondition_error("explicit cutoff must exceed max(2, ceil(L))");
  return m;
}

// Neumaier-compensated accumulator.
struct CompensatedSum {
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

// One f_{m,L}(x) term with all four cube roots formed from (x, integer)
// directly; shared with the rolling evaluation below, which must reproduce
// these exact argument values.
inline double f_term(double x, std::int64_t m, double L) {
  const double u = x - static_cast<double>(m);
  const double p = (cbrt_abs(u + 1.0) + cbrt_abs(u - L)) - (cbrt_abs(u) + cbrt_abs(u + 1.0 - L));
  return p * p * p;
}

// Sum of f_{m,L}(x) + f_{-m,L}(x) over m = hi..lo (descending), compensated.
// Rolling cube-root reuse: stepping m -> m-1 on the positive side shifts
// u = x - m by +1, so two of the four roots carry over; likewise on the
// negative side. New roots are formed from x and the integer index directly,
// never by accumulation.
inline void sum_pair_block(double x, double L, std::int64_t lo, std::int64_t hi,
                           CompensatedSum& acc) {
  if (lo > hi) return;
  // positive side, m descending from hi to lo
  {
    double up = x - static_cast<double>(hi);
    double c_u = cbrt_abs(up);                // |x - m|
    double c_u1 = cbrt_abs(up + 1.0);         // |x - m + 1|
    double c_uL = cbrt_abs(up - L);           // |x - m - L|
    double c_u1L = cbrt_abs(up + 1.0 - L);    // |x - m + 1 - L|
    for (std::int64_t m = hi;;) {
      const double p = (c_u1 + c_uL) - (c_u + c_u1L);
      acc.add(p * p * p);
      if (m == lo) break;
      --m;
      // u grows by one: |x-m| <- |x-m+1|, |x-m-L| <- |x-m+1-L|
      c_u = c_u1;
      c_uL = c_u1L;
      const double u = x - static_cast<double>(m);
      c_u1 = cbrt_abs(u + 1.0);
      c_u1L = cbrt_abs(u + 1.0 - L);
    }
  }
  // negative side, m ascending from -hi to -lo
  {
    double un = x + static_cast<double>(hi);
    double c_u = cbrt_abs(un);
    double c_u1 = cbrt_abs(un + 1.0);
    double c_uL = cbrt_abs(un - L);
    double c_u1L = cbrt_abs(un + 1.0 - L);
    for (std::int64_t m = -hi;;) {
      const double p = (c_u1 + c_uL) - (c_u + c_u1L);
      acc.add(p * p * p);
      if (m == -lo) break;
      ++m;
      // u shrinks by one: |x-m+1| <- |x-m|, |x-m+1-L| <- |x-m-L|
      c_u1 = c_u;
      c_u1L = c_uL;
      const double u = x - static_cast<double>(m);
      c_u = cbrt_abs(u);
      c_uL = cbrt_abs(u - L);
    }
  }
}

// Block layout for the truncated sum over |m| <= M: a pure function of M,
// so the reduction shape (and therefore the result, bit for bit) never
// depends on how many threads execute it.
inline constexpr std::int64_t kSeriesBlocks = 64;

inline std::int64_t series_block_count(std::int64_t m_cut) {
  return m_cut >= 4096 ? kSeriesBlocks : 1;
}

// boundaries of block i (outermost block first): [lo_i, hi_i] in |m|
inline std::pair<std::int64_t, std::int64_t> series_block_bounds(std::int64_t m_cut,
                                                                 std::int64_t nblocks,
                                                                 std::int64_t i) {
  const std::int64_t hi = m_cut - (m_cut * i) / nblocks;
  const std::int64_t lo = m_cut - (m_cut * (i + 1)) / nblocks + 1;
  return {lo, hi};
}

// Truncated sum over |m| <= M: outside-in within each fixed block, block
// values combined outermost first, the m = 0 term last. Threads only change
// which worker evaluates a block, never the reduction shape.
inline double f_sum_truncated(double L, double x, std::int64_t m_cut, int threads = 1) {
  const std::int64_t nblocks = series_block_count(m_cut);
  std::vector<double> block_vals(static_cast<std::size_t>(nblocks), 0.0);
  auto run_block = [&](std::int64_t i) {
    const auto [lo, hi] = series_block_bounds(m_cut, nblocks, i);
    CompensatedSum acc;
    sum_pair_block(x, L, lo, hi, acc);
    block_vals[static_cast<std::size_t>(i)] = acc.get();
  };
  if (nblocks == 1 || threads <= 1 || m_cut < (std::int64_t{1} << 18)) {
    for (std::int64_t i = 0; i < nblocks; ++i) run_block(i);
  } else {
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= nblocks) return;
        run_block(i);
      }
    };
    std::vector<std::thread> pool;
    const int nt = std::max(1, threads);
    pool.reserve(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  CompensatedSum total;
  for (double v : block_vals) total.add(v);
  total.add(f_term(x, 0, L));
  return total.get();
}

}  // namespace detail

// Certified evaluation of f_L(x) = sum_{m in Z} f_{m,L}(x), x in [0,1].
// The optional thread count never changes the result (fixed reduction shape).
inline CertifiedValue f_l(double L, double x, const TruncationBudget& budget, int threads = 1) {
  detail::check_fl_args(L, x);
  const std::int64_t m = detail::resolve_cutoff(budget, L, 1.0);
  return {detail::f_sum_truncated(L, x, m, threads), series_tail_bound(m, L), m};
}

// Certified evaluation of the period-1 extension f^_L(x) = f_L(x - floor(x)).
inline CertifiedValue f_hat_l(double L, double x, const TruncationBudget& budget,
                              int threads = 1) {
  if (!std::isfinite(x)) throw precondition_error("x must be finite");
  double frac = x - std::floor(x);
  if (frac >= 1.0) frac = 0.0;  // floor rounding at integer arguments
  return f_l(L, frac, budget, threads);
}

// kappa^2 = (3/4) sum_{m in Z} (|m+1|^{1/3} + |m-1|^{1/3} - 2|m|^{1/3})^3,
// summed directly; the summand is even in m. Equals (3/4) f_1(0).
inline CertifiedValue kappa_sq(const TruncationBudget& budget, int threads = 1) {
  const std::int64_t m_cut = detail::resolve_cutoff(budget, 1.0, 4.0 / 3.0);
  const std::int64_t nblocks = detail::series_block_count(m_cut);
  std::vector<double> block_vals(static_cast<std::size_t>(nblocks), 0.0);
  // within a block: outside-in, one new cube root per step
  auto run_block = [&](std::int64_t i) {
    const auto [lo, hi] = detail::series_block_bounds(m_cut, nblocks, i);
    detail::CompensatedSum acc;
    double c_prev = cbrt_abs(static_cast<double>(hi + 1));  // |m + 1|
    double c_mid = cbrt_abs(static_cast<double>(hi));       // |m|
    double c_next = cbrt_abs(static_cast<double>(hi - 1));  // |m - 1|
    for (std::int64_t m = hi; m >= lo; --m) {
      const double p = c_prev + c_next - 2.0 * c_mid;
      acc.add(2.0 * (p * p * p));
      c_prev = c_mid;
      c_mid = c_next;
      c_next = cbrt_abs(static_cast<double>(m - 2));
    }
    block_vals[static_cast<std::size_t>(i)] = acc.get();
  };
  if (nblocks == 1 || threads <= 1 || m_cut < (std::int64_t{1} << 18)) {
    for (std::int64_t i = 0; i < nblocks; ++i) run_block(i);
  } else {
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= nblocks) return;
        run_block(i);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < std::max(1, threads); ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  detail::CompensatedSum acc;
  for (double v : block_vals) acc.add(v);
  acc.add(8.0);  // m = 0 term: (1 + 1 - 0)^3
  return {0.75 * acc.get(), 0.75 * series_tail_bound(m_cut, 1.0), m_cut};
}

// kappa_L^2 = (3 / 4L) f_L(0) for integer mesh ratio L >= 1.
inline CertifiedValue kappa_l_sq(std::int64_t L, const TruncationBudget& budget,
                                 int threads = 1) {
  if (L < 1) throw precondition_error("kappa_l_sq: L must be a positive integer");
  const double Ld = static_cast<double>(L);
  const double scale = 3.0 / (4.0 * Ld);
  TruncationBudget inner = budget.has_tolerance()
                               ? TruncationBudget::tolerance(budget.tol() / scale)
                               : budget;
  CertifiedValue f0 = f_l(Ld, 0.0, inner, threads);
  return {scale * f0.value, scale * f0.error_bound, f0.cutoff_used};
}

}  // namespace cubevar

#pragma once

// Seeded fBm (H = 1/6) path generation and Monte Carlo validation.
//
// Increment sequences are exact in distribution: stationary Gaussian with
// autocovariance gamma(h) = (n^{-1/3}/2)(|h+1|^{1/3} + |h-1|^{1/3} - 2|h|^{1/3}),
// sampled by circulant embedding (spectral, FFT-based). If the embedding
// produced an eigenvalue below -1e-9 the sampler fails over to a dense
// Cholesky factorization of the exact covariance; for H < 1/2 the embedding
// is expected to be nonnegative, so the fallback is a guard rail.
//
// Coupled grids are marginals of one underlying path: either simulated at
// mesh lcm(a,b) and block-aggregated, or drawn jointly from the exact
// covariance of B at the union of both grids.
//
// Path streams are counter-based in (seed, path index): generation is
// embarrassingly parallel and estimates are reduced in path order, so
// results are bit-identical for any thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <thread>
#include <utility>
#include <vector>

#include "cubevar/errors.hpp"
#include "cubevar/fft.hpp"
#include "cubevar/kernel.hpp"
#include "cubevar/rng.hpp"
#include "cubevar/stats.hpp"

namespace cubevar {

struct PathSample {
  std::int64_t n{};
  double T{};
  std::vector<double> increments;  // Delta B_j, j = 1..nT
};

enum class GridStrategy { lcm_refinement, union_cholesky };

struct McConfig {
  std::int64_t paths{10000};
  std::uint64_t seed{0};
  GridStrategy grid_strategy{GridStrategy::lcm_refinement};
  int threads{1};
};

struct McEstimate {
  double mean{};
  double std_error{};
  std::int64_t paths_used{};
};

namespace detail {

inline constexpr std::int64_t kMaxFinePoints = std::int64_t{1} << 22;
inline constexpr std::int64_t kMaxDensePoints = 4096;

inline std::int64_t integral_horizon_points(std::int64_t n, double T) {
  if (n < 1) throw precondition_error("mesh count must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw precondition_error("horizon must be positive");
  const double nt = static_cast<double>(n) * T;
  if (nt > 9.0e15) throw resource_error("horizon grid too large");
  const double rounded = std::nearbyint(nt);
  if (std::fabs(nt - rounded) > 1e-9 * std::max(1.0, std::fabs(nt)))
    throw precondition_error("n*T must be an integer");
  return static_cast<std::int64_t>(rounded);
}

// fGn autocovariance at lag h for mesh n.
inline double fgn_autocov(std::int64_t n, std::int64_t h) {
  const double hd = static_cast<double>(h);
  const double second_diff = cbrt_abs(hd + 1.0) + cbrt_abs(hd - 1.0) - 2.0 * cbrt_abs(hd);
  return 0.5 * second_diff / cbrt_abs(static_cast<double>(n));
}

// Lower-triangular Cholesky factor, row-major packed.
inline std::vector<double> cholesky_lower(const std::vector<double>& cov, std::size_t n) {
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = cov[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) throw resource_error("covariance factorization failed");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  return l;
}

// Run fn(path_index, stream) over all paths; chunked over threads, outputs
// written by index so reductions stay order-deterministic.
template <typename Fn>
void for_each_path(std::int64_t paths, std::uint64_t seed, int threads, const Fn& fn) {
  if (threads <= 1 || paths < 4) {
    for (std::int64_t i = 0; i < paths; ++i) {
      GaussianStream stream = stream_for_path(seed, static_cast<std::uint64_t>(i));
      fn(i, stream);
    }
    return;
  }
  std::atomic<std::int64_t> next{0};
  constexpr std::int64_t kChunk = 64;
  auto worker = [&] {
    for (;;) {
      const std::int64_t lo = next.fetch_add(kChunk);
      if (lo >= paths) return;
      const std::int64_t hi = std::min(paths, lo + kChunk);
      for (std::int64_t i = lo; i < hi; ++i) {
        GaussianStream stream = stream_for_path(seed, static_cast<std::uint64_t>(i));
        fn(i, stream);
      }
    }
  };
  std::vector<std::thread> pool;
  const int nt = std::max(1, threads);
  pool.reserve(static_cast<std::size_t>(nt));
  for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Exact-in-distribution sampler of the fGn increments of B at mesh n over
// horizon T (nT must be an integer).
class FgnSampler {
 public:
  FgnSampler(std::int64_t n, double T, bool force_dense = false) : n_(n), T_(T) {
    N_ = detail::integral_horizon_points(n, T);
    if (N_ > detail::kMaxFinePoints) throw resource_error("fgn: path too long");
    if (!force_dense && build_circulant()) return;
    build_dense();
  }

  std::int64_t mesh() const { return n_; }
  double horizon() const { return T_; }
  std::int64_t size() const { return N_; }
  bool dense_fallback() const { return dense_; }

  void sample_into(GaussianStream& stream, std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(N_));
    if (!dense_) {
      const std::size_t m = sqrt_lambda_.size();
      std::vector<std::complex<double>> w(m);
      w[0] = sqrt_lambda_[0] * stream.normal();
      const double inv_sqrt2 = 0.70710678118654752440;
      for (std::size_t k = 1; k < m / 2; ++k) {
        const double re = stream.normal() * inv_sqrt2;
        const double im = stream.normal() * inv_sqrt2;
        w[k] = sqrt_lambda_[k] * std::complex<double>(re, im);
        w[m - k] = std::conj(w[k]);
      }
      w[m / 2] = sqrt_lambda_[m / 2] * stream.normal();
      fft_radix2(w, +1);
      const double scale = 1.0 / std::sqrt(static_cast<double>(m));
      for (std::int64_t j = 0; j < N_; ++j)
        out[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)].real() * scale;
      return;
    }
    const std::size_t n = static_cast<std::size_t>(N_);
    std::vector<double> z(n);
    for (auto& v : z) v = stream.normal();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += chol_[i * n + k] * z[k];
      out[i] = s;
    }
  }

  PathSample sample(std::uint64_t seed) const {
    GaussianStream stream = stream_for_path(seed, 0);
    PathSample p{n_, T_, {}};
    sample_into(stream, p.increments);
    return p;
  }

 private:
  bool build_circulant() {
    const std::size_t m = next_pow2(static_cast<std::size_t>(2 * N_));
    std::vector<std::complex<double>> r(m);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t lag = std::min(i, m - i);
      r[i] = detail::fgn_autocov(n_, static_cast<std::int64_t>(lag));
    }
    fft_radix2(r, -1);
    sqrt_lambda_.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double lam = r[k].real();
      if (lam < -1e-9) {
        sqrt_lambda_.clear();
        return false;
      }
      sqrt_lambda_[k] = std::sqrt(std::max(lam, 0.0));
    }
    dense_ = false;
    return true;
  }

  void build_dense() {
    if (N_ > detail::kMaxDensePoints)
      throw resource_error("fgn: embedding failed and path too long for dense fallback");
    const std::size_t n = static_cast<std::size_t>(N_);
    std::vector<double> cov(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        cov[i * n + j] = detail::fgn_autocov(
            n_, static_cast<std::int64_t>(i > j ? i - j : j - i));
    chol_ = detail::cholesky_lower(cov, n);
    dense_ = true;
  }

  std::int64_t n_;
  double T_;
  std::int64_t N_{};
  bool dense_{false};
  std::vector<double> sqrt_lambda_;
  std::vector<double> chol_;
};

// One fGn path; deterministic given the seed.
inline PathSample fgn_sample(std::int64_t n, double T, std::uint64_t seed) {
  return FgnSampler(n, T).sample(seed);
}

// Draws one fBm path and exposes it as increment sequences at meshes a and b
// simultaneously, so both W-processes are functionals of the same B.
class CoupledSampler {
 public:
  CoupledSampler(std::int64_t a, std::int64_t b, double T, GridStrategy strategy)
      : a_(a), b_(b), T_(T), strategy_(strategy) {
    na_ = detail::integral_horizon_points(a, T);
    nb_ = detail::integral_horizon_points(b, T);
    const std::int64_t g = std::gcd(a, b);
    lcm_ = a / g * b;
    if (strategy_ == GridStrategy::lcm_refinement) {
      const std::int64_t fine_points = detail::integral_horizon_points(lcm_, T);
      if (fine_points > detail::kMaxFinePoints)
        throw resource_error(
            "coupled sampler: lcm grid too fine; use the union-Cholesky strategy");
      fine_ = std::make_unique<FgnSampler>(lcm_, T);
      ra_ = lcm_ / a;
      rb_ = lcm_ / b;
    } else {
      build_union();
    }
  }

  std::int64_t size_a() const { return na_; }
  std::int64_t size_b() const { return nb_; }

  void sample_into(GaussianStream& stream, std::vector<double>& inc_a,
                   std::vector<double>& inc_b) const {
    inc_a.resize(static_cast<std::size_t>(na_));
    inc_b.resize(static_cast<std::size_t>(nb_));
    if (strategy_ == GridStrategy::lcm_refinement) {
      static thread_local std::vector<double> fine_buf;
      fine_->sample_into(stream, fine_buf);
      aggregate(fine_buf, ra_, inc_a);
      aggregate(fine_buf, rb_, inc_b);
      return;
    }
    const std::size_t n = union_times_.size();
    std::vector<double> z(n);
    for (auto& v : z) v = stream.normal();
    std::vector<double> bvals(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += union_chol_[i * n + k] * z[k];
      bvals[i] = s;
    }
    auto fill = [&](const std::vector<std::size_t>& idx, std::vector<double>& out) {
      double prev = 0.0;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double cur = bvals[idx[j]];
        out[j] = cur - prev;
        prev = cur;
      }
    };
    fill(idx_a_, inc_a);
    fill(idx_b_, inc_b);
  }

  std::pair<PathSample, PathSample> sample(std::uint64_t seed) const {
    GaussianStream stream = stream_for_path(seed, 0);
    PathSample pa{a_, T_, {}};
    PathSample pb{b_, T_, {}};
    sample_into(stream, pa.increments, pb.increments);
    return {std::move(pa), std::move(pb)};
  }

 private:
  static void aggregate(const std::vector<double>& fine, std::int64_t ratio,
                        std::vector<double>& out) {
    std::size_t pos = 0;
    for (auto& v : out) {
      double s = 0.0;
      for (std::int64_t r = 0; r < ratio; ++r) s += fine[pos++];
      v = s;
    }
  }

  void build_union() {
    // grid points as exact multiples of 1/lcm
    std::vector<std::int64_t> ticks;
    ticks.reserve(static_cast<std::size_t>(na_ + nb_));
    for (std::int64_t j = 1; j <= na_; ++j) ticks.push_back(j * (lcm_ / a_));
    for (std::int64_t k = 1; k <= nb_; ++k) ticks.push_back(k * (lcm_ / b_));
    std::sort(ticks.begin(), ticks.end());
    ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
    if (static_cast<std::int64_t>(ticks.size()) > detail::kMaxDensePoints)
      throw resource_error("coupled sampler: union grid too large for dense factorization");
    union_times_.resize(ticks.size());
    for (std::size_t i = 0; i < ticks.size(); ++i)
      union_times_[i] = static_cast<double>(ticks[i]) / static_cast<double>(lcm_);
    const std::size_t n = union_times_.size();
    std::vector<double> cov(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) cov[i * n + j] = cov_r(union_times_[i], union_times_[j]);
    union_chol_ = detail::cholesky_lower(cov, n);
    auto index_of = [&](std::int64_t tick) {
      return static_cast<std::size_t>(
          std::lower_bound(ticks.begin(), ticks.end(), tick) - ticks.begin());
    };
    idx_a_.resize(static_cast<std::size_t>(na_));
    for (std::int64_t j = 1; j <= na_; ++j)
      idx_a_[static_cast<std::size_t>(j - 1)] = index_of(j * (lcm_ / a_));
    idx_b_.resize(static_cast<std::size_t>(nb_));
    for (std::int64_t k = 1; k <= nb_; ++k)
      idx_b_[static_cast<std::size_t>(k - 1)] = index_of(k * (lcm_ / b_));
  }

  std::int64_t a_, b_;
  double T_;
  GridStrategy strategy_;
  std::int64_t na_{}, nb_{}, lcm_{}, ra_{}, rb_{};
  std::unique_ptr<FgnSampler> fine_;
  std::vector<double> union_times_;
  std::vector<double> union_chol_;
  std::vector<std::size_t> idx_a_, idx_b_;
};

inline std::pair<PathSample, PathSample> coupled_sample(std::int64_t a, std::int64_t b, double T,
                                                        const McConfig& cfg) {
  return CoupledSampler(a, b, T, cfg.grid_strategy).sample(cfg.seed);
}

// Running sums of Delta B_j^3 (tilde = false), or the tilde process
// W~_n = W_n - 3 n^{-1/3} B(floor(n t)/n), formed from the running sums of
// the cubes and of the increments so the subtract-B identity holds exactly;
// algebraically this equals the Hermite form sum n^{-1/2} h_3(n^{1/6} dB_j).
inline std::vector<double> w_path(const PathSample& p, bool tilde) {
  std::vector<double> out(p.increments.size());
  const double corr = tilde ? 3.0 / cbrt_abs(static_cast<double>(p.n)) : 0.0;
  double run_cubes = 0.0, run_inc = 0.0;
  for (std::size_t i = 0; i < p.increments.size(); ++i) {
    const double d = p.increments[i];
    run_cubes += d * d * d;
    run_inc += d;
    out[i] = tilde ? run_cubes - corr * run_inc : run_cubes;
  }
  return out;
}

namespace detail {

// W_n(t) (or tilde) accumulated up to floor(n t) without materializing the
// whole running-sum sequence.
inline double w_at(const std::vector<double>& increments, std::int64_t n, double t, bool tilde) {
  const double corr = tilde ? 3.0 / cbrt_abs(static_cast<double>(n)) : 0.0;
  const double raw = std::floor(static_cast<double>(n) * t);
  const std::int64_t count =
      std::min<std::int64_t>(raw > 9.0e15 ? std::numeric_limits<std::int64_t>::max()
                                          : static_cast<std::int64_t>(raw),
                             static_cast<std::int64_t>(increments.size()));
  double run_cubes = 0.0, run_inc = 0.0;
  for (std::int64_t i = 0; i < count; ++i) {
    const double d = increments[static_cast<std::size_t>(i)];
    run_cubes += d * d * d;
    run_inc += d;
  }
  return run_cubes - corr * run_inc;
}

inline double prefix_sum(const std::vector<double>& increments, std::int64_t count) {
  double run = 0.0;
  count = std::min<std::int64_t>(count, static_cast<std::int64_t>(increments.size()));
  for (std::int64_t i = 0; i < count; ++i) run += increments[static_cast<std::size_t>(i)];
  return run;
}

}  // namespace detail

// Monte Carlo estimate of Cov(W_a(s), W_b(t)) over cfg.paths coupled paths.
inline McEstimate mc_cov(std::int64_t a, std::int64_t b, double s, double t,
                         const McConfig& cfg) {
  if (cfg.paths < 2) throw precondition_error("mc_cov: need at least 2 paths");
  if (!std::isfinite(s) || !std::isfinite(t) || s < 0.0 || t < 0.0)
    throw precondition_error("mc_cov: times must be finite and nonnegative");
  const double horizon = std::max(1.0, std::ceil(std::max(s, t)));
  CoupledSampler sampler(a, b, horizon, cfg.grid_strategy);
  std::vector<double> xs(static_cast<std::size_t>(cfg.paths));
  std::vector<double> ys(static_cast<std::size_t>(cfg.paths));
  detail::for_each_path(cfg.paths, cfg.seed, cfg.threads, [&](std::int64_t i, GaussianStream& g) {
    thread_local std::vector<double> inc_a, inc_b;
    sampler.sample_into(g, inc_a, inc_b);
    xs[static_cast<std::size_t>(i)] = detail::w_at(inc_a, a, s, false);
    ys[static_cast<std::size_t>(i)] = detail::w_at(inc_b, b, t, false);
  });
  const auto est = sample_covariance(xs, ys);
  return {est.value, est.std_error, cfg.paths};
}

// Sample covariance of W~_a(t) with B at the last grid point before t;
// the exact value is 0 at every n by chaos orthogonality.
inline McEstimate independence_diagnostic(std::int64_t a, double t, const McConfig& cfg) {
  if (cfg.paths < 2) throw precondition_error("independence_diagnostic: need at least 2 paths");
  if (!(t > 0.0) || !std::isfinite(t))
    throw precondition_error("independence_diagnostic: t must be positive");
  const double horizon = std::max(1.0, std::ceil(t));
  FgnSampler sampler(a, horizon);
  std::vector<double> xs(static_cast<std::size_t>(cfg.paths));
  std::vector<double> ys(static_cast<std::size_t>(cfg.paths));
  const std::int64_t count = static_cast<std::int64_t>(std::floor(static_cast<double>(a) * t));
  detail::for_each_path(cfg.paths, cfg.seed, cfg.threads, [&](std::int64_t i, GaussianStream& g) {
    thread_local std::vector<double> inc;
    sampler.sample_into(g, inc);
    xs[static_cast<std::size_t>(i)] = detail::w_at(inc, a, t, true);
    ys[static_cast<std::size_t>(i)] = detail::prefix_sum(inc, count);
  });
  const auto est = sample_covariance(xs, ys);
  return {est.value, est.std_error, cfg.paths};
}

}  // namespace cubevar

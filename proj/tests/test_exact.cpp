#include <cmath>
#include <functional>
#include <vector>

#include "cubevar/exact.hpp"
#include "cubevar/rng.hpp"
#include "cubevar/series.hpp"
#include "doctest.h"

using namespace cubevar;

namespace {

// E[prod_i Z_{idx[i]}] for a centered Gaussian family, by Wick pairing.
// Exponential enumeration, fine for sixth moments.
double gaussian_moment(const std::vector<int>& idx, const std::function<double(int, int)>& cov) {
  if (idx.empty()) return 1.0;
  if (idx.size() % 2 != 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    std::vector<int> rest;
    rest.reserve(idx.size() - 2);
    for (std::size_t j = 1; j < idx.size(); ++j)
      if (j != i) rest.push_back(idx[j]);
    total += cov(idx[0], idx[static_cast<std::size_t>(i)]) * gaussian_moment(rest, cov);
  }
  return total;
}

// Increment covariance E[dB_{j,a} dB_{k,b}] through cov_r only; with the
// Isserlis sixth-moment expansion this gives a brute-force route to
// E[W_a(s) W_b(t)] that never touches the Phi-based engine.
double increment_cov(std::int64_t a, std::int64_t j, std::int64_t b, std::int64_t k) {
  const double ja = static_cast<double>(j) / static_cast<double>(a);
  const double ja1 = static_cast<double>(j - 1) / static_cast<double>(a);
  const double kb = static_cast<double>(k) / static_cast<double>(b);
  const double kb1 = static_cast<double>(k - 1) / static_cast<double>(b);
  return cov_r(ja, kb) - cov_r(ja, kb1) - cov_r(ja1, kb) + cov_r(ja1, kb1);
}

double brute_cov_w(std::int64_t a, std::int64_t b, double s, double t) {
  const std::int64_t jmax = static_cast<std::int64_t>(std::floor(a * s));
  const std::int64_t kmax = static_cast<std::int64_t>(std::floor(b * t));
  const double va = 1.0 / std::cbrt(static_cast<double>(a));
  const double vb = 1.0 / std::cbrt(static_cast<double>(b));
  double total = 0.0;
  for (std::int64_t j = 1; j <= jmax; ++j)
    for (std::int64_t k = 1; k <= kmax; ++k) {
      const double c = increment_cov(a, j, b, k);
      total += 6.0 * c * c * c + 9.0 * va * vb * c;
    }
  return total;
}

double brute_cov_tilde(std::int64_t a, std::int64_t b, double s, double t) {
  const std::int64_t jmax = static_cast<std::int64_t>(std::floor(a * s));
  const std::int64_t kmax = static_cast<std::int64_t>(std::floor(b * t));
  double total = 0.0;
  for (std::int64_t j = 1; j <= jmax; ++j)
    for (std::int64_t k = 1; k <= kmax; ++k) {
      const double c = increment_cov(a, j, b, k);
      total += 6.0 * c * c * c;
    }
  return total;
}

}  // namespace

TEST_CASE("Gaussian sixth-moment identity E[X^3 Y^3] = 6c^3 + 9 vx vy c") {
  Xoshiro256pp rng(1234);
  for (int i = 0; i < 200; ++i) {
    const double vx = 0.1 + 3.0 * rng.uniform01();
    const double vy = 0.1 + 3.0 * rng.uniform01();
    const double rho = 2.0 * rng.uniform01() - 1.0;
    const double c = rho * std::sqrt(vx * vy);
    auto cov = [&](int p, int q) { return p == q ? (p == 0 ? vx : vy) : c; };
    const double wick = gaussian_moment({0, 0, 0, 1, 1, 1}, cov);
    const double closed = 6.0 * c * c * c + 9.0 * vx * vy * c;
    CHECK(wick == doctest::Approx(closed).epsilon(1e-12));
  }
  // E[X^3 Y] = 3 vx c: the first/third chaos cancellation at n = 1
  auto cov = [](int p, int q) { return p == q ? 1.0 : 0.4; };
  const double x3y = gaussian_moment({0, 0, 0, 1}, cov);
  CHECK(x3y == doctest::Approx(3.0 * 0.4).epsilon(1e-13));
}

TEST_CASE("hermite3") {
  CHECK(hermite3(0.0) == 0.0);
  CHECK(hermite3(2.0) == 2.0);
  CHECK(hermite3(-1.0) == 2.0);
}

TEST_CASE("single-term ground truths") {
  const CovResult t = exact_cov_tilde({{1, 1}, 1.0, 1.0, FullMode{}});
  CHECK(t.value == doctest::Approx(6.0).epsilon(1e-13));
  CHECK(t.certified_remainder == 0.0);
  const CovResult w = exact_cov_w({{1, 1}, 1.0, 1.0, FullMode{}});
  CHECK(w.value == doctest::Approx(15.0).epsilon(1e-13));
}

TEST_CASE("engine matches the Isserlis brute force") {
  struct Case {
    std::int64_t a, b;
    double s, t;
  };
  for (const Case& c : {Case{2, 3, 1.0, 1.0}, Case{3, 5, 0.5, 1.0}, Case{4, 4, 1.0, 0.75},
                        Case{5, 2, 0.9, 0.6}, Case{7, 11, 1.0, 1.0}}) {
    const double tilde = exact_cov_tilde({{c.a, c.b}, c.s, c.t, FullMode{}}).value;
    CHECK(tilde == doctest::Approx(brute_cov_tilde(c.a, c.b, c.s, c.t)).epsilon(1e-12));
    const double w = exact_cov_w({{c.a, c.b}, c.s, c.t, FullMode{}}).value;
    CHECK(w == doctest::Approx(brute_cov_w(c.a, c.b, c.s, c.t)).epsilon(1e-12));
  }
}

TEST_CASE("W-mode correction term") {
  // exact_cov_w - exact_cov_tilde = 9 (ab)^{-1/3} R(floor(as)/a, floor(bt)/b)
  for (std::int64_t n : {2LL, 10LL, 100LL}) {
    const double tilde = exact_cov_tilde({{n, n}, 1.0, 1.0, FullMode{}}).value;
    const double w = exact_cov_w({{n, n}, 1.0, 1.0, FullMode{}}).value;
    const double expect = 9.0 * std::pow(static_cast<double>(n), -2.0 / 3.0) * cov_r(1.0, 1.0);
    CHECK(w - tilde == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("swap symmetry is bit-exact in full mode") {
  Xoshiro256pp rng(42);
  for (int i = 0; i < 40; ++i) {
    const std::int64_t a = 1 + static_cast<std::int64_t>(rng.next() % 40);
    const std::int64_t b = 1 + static_cast<std::int64_t>(rng.next() % 40);
    const double s = 0.25 + rng.uniform01();
    const double t = 0.25 + rng.uniform01();
    const double lhs = exact_cov_tilde({{a, b}, s, t, FullMode{}}).value;
    const double rhs = exact_cov_tilde({{b, a}, t, s, FullMode{}}).value;
    CHECK(lhs == rhs);
  }
}

TEST_CASE("scaling identity") {
  {
    const auto [lhs, rhs] = scaling_check({3, 5}, 2, 1.0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
  {
    const auto [lhs, rhs] = scaling_check({4, 7}, 1, 0.8);
    CHECK(lhs == rhs);  // r = 1 runs the identical computation
  }
  {
    const auto [lhs, rhs] = scaling_check({1, 2}, 4, 0.5);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("banded mode is certified") {
  Xoshiro256pp rng(2718);
  for (int i = 0; i < 25; ++i) {
    const std::int64_t a = 20 + static_cast<std::int64_t>(rng.next() % 120);
    const std::int64_t b = 20 + static_cast<std::int64_t>(rng.next() % 200);
    const std::int64_t min_band = std::max<std::int64_t>(3, (b + a - 1) / a + 1);
    const std::int64_t band = min_band + static_cast<std::int64_t>(rng.next() % 24);
    const double s = 0.5 + rng.uniform01();
    const double t = 0.5 + rng.uniform01();
    const CovResult full = exact_cov_tilde({{a, b}, s, t, FullMode{}});
    const CovResult fast = exact_cov_tilde({{a, b}, s, t, BandedMode{band}});
    CHECK(std::fabs(full.value - fast.value) <= fast.certified_remainder);
    CHECK(fast.certified_remainder > 0.0);
  }
  CHECK_THROWS_AS(exact_cov_tilde({{10, 35}, 1.0, 1.0, BandedMode{4}}), precondition_error);
}

TEST_CASE("variance converges to kappa^2 on the shared mesh") {
  const double ks = kappa_sq(TruncationBudget::tolerance(1e-10)).value;
  double prev_err = 1e9;
  for (std::int64_t n : {64LL, 512LL, 4096LL}) {
    const double v = exact_cov_tilde({{n, n}, 1.0, 1.0, FullMode{}}, 2).value;
    const double err = std::fabs(v - ks);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 2e-3);
  // the W-form variance at n = 512 sits within 3% of the limit constant
  const double w512 = exact_cov_w({{512, 512}, 1.0, 1.0, FullMode{}}, 2).value;
  CHECK(std::fabs(w512 - ks) <= 0.03 * ks);
}

TEST_CASE("off-diagonal times stabilize toward the diagonal") {
  // |E[W~_a(s) W~_b(t)] - E[W~_a(s) W~_b(s)]| -> 0 for s < t as the meshes
  // refine: the tail window of the finer process decouples
  double prev = 1e9;
  for (std::int64_t n : {64LL, 256LL, 1024LL}) {
    const double st = exact_cov_tilde({{n, 2 * n}, 0.5, 1.0, FullMode{}}, 2).value;
    const double ss = exact_cov_tilde({{n, 2 * n}, 0.5, 0.5, FullMode{}}, 2).value;
    const double gap = std::fabs(st - ss);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("degenerate ratio decays") {
  double prev = 1e9;
  for (std::int64_t n : {8LL, 16LL, 32LL, 64LL}) {
    const double v = std::fabs(exact_cov_tilde({{n, n * n}, 1.0, 1.0, FullMode{}}).value);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("empty-product boundary") {
  CHECK(exact_cov_tilde({{4, 4}, 0.2, 1.0, FullMode{}}).value == 0.0);
  CHECK(exact_cov_tilde({{4, 4}, 0.0, 1.0, FullMode{}}).value == 0.0);
  CHECK(exact_cov_w({{4, 4}, 0.1, 1.0, FullMode{}}).value == 0.0);
}

TEST_CASE("thread count does not change results") {
  const CovRequest req{{37, 101}, 0.9, 1.0, FullMode{}};
  CHECK(exact_cov_tilde(req, 1).value == exact_cov_tilde(req, 2).value);
  CHECK(exact_cov_tilde(req, 1).value == exact_cov_tilde(req, 4).value);
  const CovRequest breq{{37, 101}, 0.9, 1.0, BandedMode{16}};
  CHECK(exact_cov_tilde(breq, 1).value == exact_cov_tilde(breq, 3).value);
}

TEST_CASE("cross-chaos covariance is the structural zero") {
  CHECK(cross_chaos_cov(64, 1.0, 1.0) == 0.0);
  CHECK(cross_chaos_cov(1, 0.5, 2.0) == 0.0);
  CHECK_THROWS_AS(cross_chaos_cov(0, 1.0, 1.0), precondition_error);
  // n = 1 by hand: E[(B(1)^3 - 3 B(1)) B(t)] = 3 R(1,t) - 3 R(1,t) = 0
  for (double t : {0.3, 1.0, 2.5}) {
    auto cov = [&](int p, int q) {
      if (p == 0 && q == 0) return cov_r(1.0, 1.0);
      if (p == 1 && q == 1) return cov_r(t, t);
      return cov_r(1.0, t);
    };
    const double third = gaussian_moment({0, 0, 0, 1}, cov) - 3.0 * cov_r(1.0, t);
    CHECK(third == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("request validation") {
  CHECK_THROWS_AS(exact_cov_tilde({{0, 1}, 1.0, 1.0, FullMode{}}), precondition_error);
  CHECK_THROWS_AS(exact_cov_tilde({{1, 1}, -1.0, 1.0, FullMode{}}), precondition_error);
  CHECK_THROWS_AS(scaling_check({1, 1}, 0, 1.0), precondition_error);
}

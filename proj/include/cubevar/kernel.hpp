#pragma once

// Covariance kernel of fractional Brownian motion with Hurst parameter 1/6
// and the four-point increment function
//
//   Phi(s,t,u,v) = 2 E[(B(t)-B(s))(B(v)-B(u))]
//                = |t-u|^{1/3} + |s-v|^{1/3} - |s-u|^{1/3} - |t-v|^{1/3},
//
// together with its grid restriction Phi_n and computable decay envelopes.
// Everything here is a pure function of its arguments.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cubevar/errors.hpp"

namespace cubevar {

using TimePoint = double;

// Four ordered time points feeding Phi. Operations state their own
// ordering preconditions; the struct itself only requires finiteness.
struct Quad {
  TimePoint s{};
  TimePoint t{};
  TimePoint u{};
  TimePoint v{};
};

// A pair of mesh counts (a_n, b_n). The ratio L_n = b/a is derived.
struct GridPair {
  std::int64_t a{1};
  std::int64_t b{1};
};

// Increment indices (j, k) of Phi_n; any integers are admissible.
struct IncrementIndex {
  std::int64_t j{};
  std::int64_t k{};
};

inline void require_finite(double x, const char* name) {
  if (!std::isfinite(x)) throw std::domain_error(std::string(name) + " must be finite");
}

// Signed real cube root. Never use pow with fractional exponents on
// negatives; std::cbrt handles the sign correctly.
inline double cbrt_signed(double x) { return std::cbrt(x); }

inline double cbrt_abs(double x) { return std::cbrt(std::fabs(x)); }

// R(s,t) = E[B(s)B(t)] = (|t|^{1/3} + |s|^{1/3} - |t-s|^{1/3}) / 2 for the
// two-sided fBm with H = 1/6. Symmetric in (s,t).
inline double cov_r(TimePoint s, TimePoint t) {
  require_finite(s, "s");
  require_finite(t, "t");
  return 0.5 * (cbrt_abs(t) + cbrt_abs(s) - cbrt_abs(t - s));
}

// Phi(s,t,u,v) = 2 E[(B(t)-B(s))(B(v)-B(u))].
//
// The grouping (c1+c2)-(c3+c4) is chosen so that the symmetry
// Phi(s,t,u,v) = Phi(u,v,s,t) holds bit-exactly: swapping the pairs maps
// c1<->c2 and c3<->c4, and floating addition is commutative.
inline double phi(const Quad& q) {
  require_finite(q.s, "s");
  require_finite(q.t, "t");
  require_finite(q.u, "u");
  require_finite(q.v, "v");
  const double c1 = cbrt_abs(q.t - q.u);
  const double c2 = cbrt_abs(q.s - q.v);
  const double c3 = cbrt_abs(q.s - q.u);
  const double c4 = cbrt_abs(q.t - q.v);
  return (c1 + c2) - (c3 + c4);
}

// Phi_n^{a,b}(j,k) = Phi((j-1)/a, j/a, (k-1)/b, k/b), i.e. twice the
// covariance of the two grid increments. Satisfies
// phi_n({a,b},{j,k}) = phi_n({b,a},{k,j}) bit-exactly.
inline double phi_n(const GridPair& g, const IncrementIndex& idx) {
  if (g.a < 1 || g.b < 1) throw precondition_error("phi_n: mesh counts must be >= 1");
  const double a = static_cast<double>(g.a);
  const double b = static_cast<double>(g.b);
  const double j = static_cast<double>(idx.j);
  const double k = static_cast<double>(idx.k);
  return phi({(j - 1.0) / a, j / a, (k - 1.0) / b, k / b});
}

struct EnvelopeBound {
  std::string name;
  double bound{};
};

// Every applicable upper bound on |Phi(q)|.
//
//   coarse              2 (|t-s| ^ |v-u|)^{1/3}            any quad
//   separated_product   (2/9)(t-s)(v-u)(s-v)^{-5/3}        u < v < s < t
//   separated_mixed_lo  (t-s)^{1/4}(v-u)^{11/12}(s-v)^{-5/6}
//   separated_mixed_hi  (t-s)^{11/12}(v-u)^{1/4}(s-v)^{-5/6}
//   interleaved         (1/3)(t-s)((v-t)^{-2/3}+(s-u)^{-2/3})   u < s < t < v
//
// A quad satisfying no refined ordering yields only the coarse bound.
inline std::vector<EnvelopeBound> phi_envelopes(const Quad& q) {
  require_finite(q.s, "s");
  require_finite(q.t, "t");
  require_finite(q.u, "u");
  require_finite(q.v, "v");
  std::vector<EnvelopeBound> out;
  const double ts = q.t - q.s;
  const double vu = q.v - q.u;
  out.push_back({"coarse", 2.0 * cbrt_abs(std::min(std::fabs(ts), std::fabs(vu)))});
  if (q.u < q.v && q.v < q.s && q.s < q.t) {
    const double sv = q.s - q.v;
    out.push_back({"separated_product", (2.0 / 9.0) * ts * vu * std::pow(sv, -5.0 / 3.0)});
    out.push_back({"separated_mixed_lo",
                   std::pow(ts, 0.25) * std::pow(vu, 11.0 / 12.0) * std::pow(sv, -5.0 / 6.0)});
    out.push_back({"separated_mixed_hi",
                   std::pow(ts, 11.0 / 12.0) * std::pow(vu, 0.25) * std::pow(sv, -5.0 / 6.0)});
  }
  if (q.u < q.s && q.s < q.t && q.t < q.v) {
    out.push_back({"interleaved", (1.0 / 3.0) * ts *
                                      (std::pow(q.v - q.t, -2.0 / 3.0) +
                                       std::pow(q.s - q.u, -2.0 / 3.0))});
  }
  return out;
}

}  // namespace cubevar

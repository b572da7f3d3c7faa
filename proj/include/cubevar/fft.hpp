#pragma once

// Minimal in-place radix-2 FFT, sufficient for circulant embedding of
// stationary covariances (sizes are powers of two by construction).

#include <complex>
#include <cstdint>
#include <vector>

#include "cubevar/errors.hpp"

namespace cubevar {

inline std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

// In-place transform; sign = -1 forward, +1 inverse (unnormalized).
inline void fft_radix2(std::vector<std::complex<double>>& a, int sign) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw precondition_error("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * 3.14159265358979323846 / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace cubevar

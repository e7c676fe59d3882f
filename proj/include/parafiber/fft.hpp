#pragma once

// Radix-2 decimation-in-time FFT, power-of-two lengths only. Forward uses
// the e^{-i w t} kernel and is unnormalized; the inverse divides by N, so
// inverse(forward(x)) == x and Parseval holds as sum|x|^2 = sum|X|^2 / N.

#include <complex>
#include <stdexcept>
#include <vector>

#include "parafiber/physics.hpp"

namespace parafiber::fft {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace detail {

inline void transform(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n))
    throw std::invalid_argument("fft: length must be a power of two");

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / double(len);
    const Complex wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      Complex w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace detail

inline void forward_inplace(std::vector<Complex>& a) { detail::transform(a, false); }

inline void inverse_inplace(std::vector<Complex>& a) {
  detail::transform(a, true);
  const double inv = 1.0 / double(a.size());
  for (Complex& v : a) v *= inv;
}

inline std::vector<Complex> forward(std::vector<Complex> a) {
  forward_inplace(a);
  return a;
}

inline std::vector<Complex> inverse(std::vector<Complex> a) {
  inverse_inplace(a);
  return a;
}

}  // namespace parafiber::fft

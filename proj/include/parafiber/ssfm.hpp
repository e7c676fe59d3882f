#pragma once

// Symmetric split-step Fourier reference solver for the normalized equation
//   psi_zeta = -k1 A2 psi + i (k1 A3 / k2^2) psi_tt
//              - (k1 A4 / k2^3) psi_ttt + i k1 A5 |psi|^2 psi
// Each computing segment applies half a linear step in the frequency domain,
// a full nonlinear phase rotation in the time domain, then the second linear
// half step. Serves as ground truth for every accuracy claim.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "parafiber/fft.hpp"
#include "parafiber/physics.hpp"

namespace parafiber {

struct SsfmConfig {
  std::size_t steps_per_unit_zeta = 1000;  // computing segments over zeta in [0, 1]
  std::size_t record_every = 1;            // store every k-th zeta grid line
  std::size_t time_points = 1024;          // oracle time-axis length (power of two)
};

/// Oracle time axis: `n` periodic samples of [-1, 1), t_i = -1 + 2 i / n.
/// The right endpoint is the periodic image of the left one.
inline std::vector<double> oracle_time_axis(std::size_t n) {
  std::vector<double> ax(n);
  for (std::size_t i = 0; i < n; ++i) ax[i] = -1.0 + 2.0 * double(i) / double(n);
  return ax;
}

/// Angular frequencies matching the FFT bin layout for a [-1, 1) window
/// (period 2, so the bin spacing is pi).
inline std::vector<double> oracle_freq_axis(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double idx = (k < n / 2) ? double(k) : double(k) - double(n);
    w[k] = kPi * idx;
  }
  return w;
}

/// Per-frequency factor exp(h(w) dz/2) for half a segment, where h is the
/// symbol of the linear part under the e^{-i w t} forward kernel
/// (d/dt -> i w):
///   h(w) = -k1 A2 - i (k1 A3 / k2^2) w^2 + i (k1 A4 / k2^3) w^3.
struct SpectralOperator {
  std::vector<Complex> half_step;

  SpectralOperator(const NormalizedCoefficients& c, std::size_t n, double dz) {
    const std::vector<double> w = oracle_freq_axis(n);
    half_step.resize(n);
    const double c_att = c.kappa1 * c.a2;
    const double c_disp = c.kappa1 * c.a3 / (c.kappa2 * c.kappa2);
    const double c_tod = c.kappa1 * c.a4 / (c.kappa2 * c.kappa2 * c.kappa2);
    for (std::size_t k = 0; k < n; ++k) {
      const double w2 = w[k] * w[k];
      const Complex h(-c_att, -c_disp * w2 + c_tod * w2 * w[k]);
      half_step[k] = std::exp(h * (0.5 * dz));
    }
  }
};

struct SsfmBlowup : std::runtime_error {
  std::size_t segment;
  explicit SsfmBlowup(std::size_t seg)
      : std::runtime_error("ssfm: non-finite field at segment " + std::to_string(seg) +
                           " (steps too coarse or unstable coefficients)"),
        segment(seg) {}
};

namespace detail {

inline bool finite(const std::vector<Complex>& v) {
  for (const Complex& x : v)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  return true;
}

}  // namespace detail

/// Propagates `initial` (sampled on oracle_time_axis(initial.size())) over
/// zeta in [0, 1] and records the field on the grid's zeta lines. The
/// zeta = 0 row is the input, bit for bit.
inline Field2D propagate(const std::vector<Complex>& initial,
                         const NormalizedCoefficients& coeffs, const Grid& grid,
                         const SsfmConfig& cfg) {
  grid.validate();
  const std::size_t n = initial.size();
  if (!fft::is_power_of_two(n))
    throw std::invalid_argument("ssfm: oracle grid length must be a power of two");
  if (cfg.steps_per_unit_zeta < grid.zeta_points - 1)
    throw std::invalid_argument("ssfm: need at least one segment per recorded zeta interval");
  if (cfg.record_every < 1) throw std::invalid_argument("ssfm: record_every must be >= 1");

  // Segments per recording interval, rounded up so that every recorded zeta
  // line falls on a segment boundary.
  const std::size_t intervals = grid.zeta_points - 1;
  const std::size_t seg_per_interval =
      (cfg.steps_per_unit_zeta + intervals - 1) / intervals;
  const double dz = grid.dzeta() / double(seg_per_interval);

  const SpectralOperator op(coeffs, n, dz);
  const double nl_rate = coeffs.kappa1 * coeffs.a5 * dz;

  std::vector<double> zeta_out;
  for (std::size_t j = 0; j < grid.zeta_points; j += cfg.record_every)
    zeta_out.push_back(grid.zeta(j));

  Field2D field(oracle_time_axis(n), zeta_out);
  for (std::size_t i = 0; i < n; ++i) field.at(i, 0) = initial[i];

  std::vector<Complex> psi = initial;
  std::vector<Complex> spec(n);
  std::size_t out_row = 1;
  std::size_t segment = 0;

  auto half_linear = [&] {
    spec = psi;
    fft::forward_inplace(spec);
    for (std::size_t k = 0; k < n; ++k) spec[k] *= op.half_step[k];
    fft::inverse_inplace(spec);
    psi.swap(spec);
  };

  for (std::size_t j = 1; j < grid.zeta_points; ++j) {
    for (std::size_t s = 0; s < seg_per_interval; ++s, ++segment) {
      half_linear();
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::norm(psi[i]);
        psi[i] *= Complex(std::cos(nl_rate * p), std::sin(nl_rate * p));
      }
      half_linear();
      if (!detail::finite(psi)) throw SsfmBlowup(segment);
    }
    if (j % cfg.record_every == 0) {
      for (std::size_t i = 0; i < n; ++i) field.at(i, out_row) = psi[i];
      ++out_row;
    }
  }
  return field;
}

/// Convenience: generate the pulse on the oracle axis and propagate.
inline Field2D propagate_pulse(const PulseSpec& pulse, const NormalizedCoefficients& coeffs,
                               const Grid& grid, const SsfmConfig& cfg) {
  const std::vector<Complex> initial =
      generate_pulse_on_axis(pulse, oracle_time_axis(cfg.time_points), coeffs.kappa2);
  return propagate(initial, coeffs, grid, cfg);
}

}  // namespace parafiber

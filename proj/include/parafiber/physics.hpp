#pragma once

// Physical quantities, normalization, discretization grid, input pulses and
// the fiber-parameter lattice. Everything downstream (the split-step oracle,
// the principle-driven models and the reduced-basis layer) works with the
// dimensionless coefficients produced here.

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace parafiber {

using Complex = std::complex<double>;

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s
inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// One physical transmission condition.
struct FiberParams {
  double alpha = 0.0;      // power attenuation, 1/m
  double beta2 = -2e-26;   // second-order propagation constant, s^2/m
  double beta3 = -2e-38;   // third-order propagation constant, s^3/m
  double n2 = 2.6e-20;     // nonlinear refractive index, m^2/W
  double a_eff = 8e-11;    // effective core area, m^2
  double lambda0 = 1.55e-6;  // central wavelength, m

  void validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("FiberParams: alpha must be >= 0");
    if (!(a_eff > 0.0)) throw std::invalid_argument("FiberParams: a_eff must be > 0");
    if (!(lambda0 > 0.0)) throw std::invalid_argument("FiberParams: lambda0 must be > 0");
    if (beta2 == 0.0) throw std::invalid_argument("FiberParams: beta2 = 0 leaves the dispersion length undefined");
    if (!(n2 > 0.0)) throw std::invalid_argument("FiberParams: n2 must be > 0");
  }
};

enum class PulseShape { Gaussian, Sech, SuperGaussian };

inline PulseShape pulse_shape_from_string(const std::string& s) {
  if (s == "gaussian" || s == "Gaussian") return PulseShape::Gaussian;
  if (s == "sech" || s == "Sech") return PulseShape::Sech;
  if (s == "supergaussian" || s == "SuperGaussian" || s == "super-gaussian")
    return PulseShape::SuperGaussian;
  throw std::invalid_argument("unsupported pulse shape: " + s);
}

inline const char* to_string(PulseShape s) {
  switch (s) {
    case PulseShape::Gaussian: return "gaussian";
    case PulseShape::Sech: return "sech";
    case PulseShape::SuperGaussian: return "supergaussian";
  }
  return "?";
}

/// Input pulse description in physical units. `peak_offsets` holds one peak
/// time per pulse; a single centred pulse is {0}.
struct PulseSpec {
  PulseShape shape = PulseShape::Gaussian;
  int order = 4;                        // SuperGaussian exponent m; ignored otherwise
  double t0 = 1e-9 / std::sqrt(10.0);   // 1/e half-width T0, s
  double p0 = 1e-3;                     // peak power P0, W
  std::vector<double> peak_offsets{0.0};  // peak times, s
  double t_max = 5e-9 / std::sqrt(10.0);  // half time-window T_max, s

  std::size_t num_pulses() const { return peak_offsets.size(); }

  void validate() const {
    if (!(t0 > 0.0)) throw std::invalid_argument("PulseSpec: t0 must be > 0");
    if (!(p0 > 0.0)) throw std::invalid_argument("PulseSpec: p0 must be > 0");
    if (!(t_max > 0.0)) throw std::invalid_argument("PulseSpec: t_max must be > 0");
    if (peak_offsets.empty()) throw std::invalid_argument("PulseSpec: need at least one peak offset");
    if (order < 1) throw std::invalid_argument("PulseSpec: order must be >= 1");
    for (double off : peak_offsets)
      if (!(std::abs(off) + t0 < t_max))
        throw std::invalid_argument("PulseSpec: peak at " + std::to_string(off) +
                                    " s does not fit inside the time window");
  }
};

/// Normalized-time/distance collocation grid: t uniform over [-1, 1],
/// zeta uniform over [0, 1] (first sample exactly 0). `l_max` is the
/// physical fiber length the unit zeta interval maps to.
struct Grid {
  std::size_t t_points = 100;
  std::size_t zeta_points = 101;
  double l_max = 1e5;  // m

  void validate() const {
    if (t_points < 2) throw std::invalid_argument("Grid: t_points must be >= 2");
    if (zeta_points < 2) throw std::invalid_argument("Grid: zeta_points must be >= 2");
    if (!(l_max > 0.0)) throw std::invalid_argument("Grid: l_max must be > 0");
  }

  double t(std::size_t i) const { return -1.0 + 2.0 * double(i) / double(t_points - 1); }
  double zeta(std::size_t j) const { return double(j) / double(zeta_points - 1); }
  double dt() const { return 2.0 / double(t_points - 1); }
  double dzeta() const { return 1.0 / double(zeta_points - 1); }

  std::vector<double> t_axis() const {
    std::vector<double> ax(t_points);
    for (std::size_t i = 0; i < t_points; ++i) ax[i] = t(i);
    return ax;
  }
  std::vector<double> zeta_axis() const {
    std::vector<double> ax(zeta_points);
    for (std::size_t j = 0; j < zeta_points; ++j) ax[j] = zeta(j);
    return ax;
  }
};

/// Dimensionless coefficients of the normalized pulse-propagation equation
///   i A1 psi_zeta + i k1 A2 psi + k1 A3 psi_tt / k2^2
///     + i k1 A4 psi_ttt / k2^3 + k1 A5 |psi|^2 psi = 0
/// together with the scale lengths they derive from.
struct NormalizedCoefficients {
  double a1 = 1.0;
  double a2 = 0.0;      // alpha * L_D / 2
  double a3 = 0.5;      // -sign(beta2) / 2
  double a4 = 0.0;      // -beta3 * L_D / (6 T0^3)
  double a5 = 0.0;      // L_D / L_NL
  double kappa1 = 0.0;  // L_max / L_D
  double kappa2 = 0.0;  // T_max / T0
  double l_d = 0.0;     // dispersion length, m
  double l_nl = 0.0;    // nonlinear length, m
  double gamma = 0.0;   // nonlinear coefficient, 1/(W m)
  double omega_c = 0.0; // central angular frequency, rad/s
};

/// Coefficients of Eq-form above for one transmission condition.
/// L_D is taken as T0^2/|beta2| so it stays positive for either dispersion
/// sign; the sign itself is carried entirely by a3.
inline NormalizedCoefficients derive_coefficients(const FiberParams& params,
                                                  const PulseSpec& pulse,
                                                  const Grid& grid) {
  params.validate();
  pulse.validate();
  grid.validate();

  NormalizedCoefficients c;
  c.omega_c = 2.0 * kPi * kSpeedOfLight / params.lambda0;
  c.l_d = pulse.t0 * pulse.t0 / std::abs(params.beta2);
  c.gamma = params.n2 * c.omega_c / (kSpeedOfLight * params.a_eff);
  c.l_nl = 1.0 / (c.gamma * pulse.p0);
  c.a1 = 1.0;
  c.a2 = params.alpha * c.l_d / 2.0;
  c.a3 = params.beta2 < 0.0 ? 0.5 : -0.5;
  c.a4 = -params.beta3 * c.l_d / (6.0 * pulse.t0 * pulse.t0 * pulse.t0);
  c.a5 = c.l_d / c.l_nl;
  c.kappa1 = grid.l_max / c.l_d;
  c.kappa2 = pulse.t_max / pulse.t0;
  return c;
}

/// Normalized pulse amplitude at scaled time tau = kappa2 * t (one shape,
/// all peaks summed). Peak amplitude of a single pulse is 1.
inline double pulse_amplitude(const PulseSpec& pulse, double tau) {
  double acc = 0.0;
  for (double off : pulse.peak_offsets) {
    const double x = tau - off / pulse.t0;
    switch (pulse.shape) {
      case PulseShape::Gaussian:
        acc += std::exp(-0.5 * x * x);
        break;
      case PulseShape::Sech:
        acc += 1.0 / std::cosh(x);
        break;
      case PulseShape::SuperGaussian: {
        acc += std::exp(-0.5 * std::pow(x * x, pulse.order));
        break;
      }
    }
  }
  return acc;
}

/// Initial normalized field psi(t, zeta=0) on an arbitrary normalized-time axis.
inline std::vector<Complex> generate_pulse_on_axis(const PulseSpec& pulse,
                                                   const std::vector<double>& t_axis,
                                                   double kappa2) {
  pulse.validate();
  std::vector<Complex> out(t_axis.size());
  for (std::size_t i = 0; i < t_axis.size(); ++i)
    out[i] = Complex(pulse_amplitude(pulse, kappa2 * t_axis[i]), 0.0);
  return out;
}

/// Initial normalized field on the grid's t axis (length grid.t_points).
inline std::vector<Complex> generate_pulse(const PulseSpec& pulse, const Grid& grid) {
  grid.validate();
  return generate_pulse_on_axis(pulse, grid.t_axis(), pulse.t_max / pulse.t0);
}

/// One uniformly spaced sweep axis.
struct AxisSpec {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t points = 1;

  void validate(const char* name) const {
    if (points < 1) throw std::invalid_argument(std::string("AxisSpec ") + name + ": points must be >= 1");
    if (points > 1 && !(hi > lo))
      throw std::invalid_argument(std::string("AxisSpec ") + name + ": hi must exceed lo");
  }
  double value(std::size_t k) const {
    if (points == 1) return lo;
    return lo + double(k) * (hi - lo) / double(points - 1);
  }
};

/// Swept ranges for (alpha, beta2, n2) plus the fixed scalars. The default
/// reproduces the 10 x 10 x 10 transmission-condition lattice.
struct ParameterSpace {
  AxisSpec alpha{0.0, 4.605e-5, 10};
  AxisSpec beta2{-2e-26, 2e-26, 10};
  AxisSpec n2{2.6e-22, 2.6e-20, 10};
  double beta3 = -2e-38;
  double a_eff = 8e-11;
  double lambda0 = 1.55e-6;

  void validate() const {
    alpha.validate("alpha");
    beta2.validate("beta2");
    n2.validate("n2");
  }

  std::size_t size() const { return alpha.points * beta2.points * n2.points; }

  FiberParams at(std::size_t ia, std::size_t ib, std::size_t in) const {
    return FiberParams{alpha.value(ia), beta2.value(ib), beta3, n2.value(in), a_eff, lambda0};
  }

  /// Row-major flat index over (alpha, beta2, n2).
  std::size_t flat_index(std::size_t ia, std::size_t ib, std::size_t in) const {
    return (ia * beta2.points + ib) * n2.points + in;
  }

  /// Lattice index of the central point, (points-1)/2 on every axis.
  std::size_t central_index() const {
    return flat_index((alpha.points - 1) / 2, (beta2.points - 1) / 2, (n2.points - 1) / 2);
  }
};

/// Deterministic row-major enumeration of the Cartesian product; index k of
/// the result matches ParameterSpace::flat_index.
inline std::vector<FiberParams> parameter_lattice(const ParameterSpace& space) {
  space.validate();
  std::vector<FiberParams> lattice;
  lattice.reserve(space.size());
  for (std::size_t ia = 0; ia < space.alpha.points; ++ia)
    for (std::size_t ib = 0; ib < space.beta2.points; ++ib)
      for (std::size_t in = 0; in < space.n2.points; ++in)
        lattice.push_back(space.at(ia, ib, in));
  return lattice;
}

/// True when the lattice point sits on the boundary of any swept axis.
inline bool on_lattice_boundary(const ParameterSpace& space, std::size_t index) {
  const std::size_t in = index % space.n2.points;
  const std::size_t ib = (index / space.n2.points) % space.beta2.points;
  const std::size_t ia = index / (space.n2.points * space.beta2.points);
  auto edge = [](std::size_t k, std::size_t n) { return n > 1 && (k == 0 || k == n - 1); };
  return edge(ia, space.alpha.points) || edge(ib, space.beta2.points) || edge(in, space.n2.points);
}

/// Complex field psi(t_i, zeta_j) sampled on explicit axes, stored row-major
/// with t fastest. `source` records the parameters that produced it when known.
struct Field2D {
  std::vector<double> t_axis;
  std::vector<double> zeta_axis;
  std::vector<Complex> values;  // values[j * nt + i]
  std::optional<FiberParams> source;

  Field2D() = default;
  Field2D(std::vector<double> t, std::vector<double> zeta)
      : t_axis(std::move(t)), zeta_axis(std::move(zeta)),
        values(t_axis.size() * zeta_axis.size(), Complex(0.0, 0.0)) {}

  std::size_t nt() const { return t_axis.size(); }
  std::size_t nz() const { return zeta_axis.size(); }

  Complex& at(std::size_t i, std::size_t j) { return values[j * nt() + i]; }
  const Complex& at(std::size_t i, std::size_t j) const { return values[j * nt() + i]; }

  bool all_finite() const {
    for (const Complex& v : values)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }
};

}  // namespace parafiber

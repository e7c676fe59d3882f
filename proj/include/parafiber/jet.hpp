#pragma once

// Truncated Taylor jets in the two network inputs: a jet carries a value,
// time derivatives up to third order and the first zeta derivative. No mixed
// t-zeta term is needed by the residual, so the zeta slot propagates as an
// independent first-order channel.

#include <cmath>

namespace parafiber {

struct Jet {
  double v = 0.0;     // value
  double dt = 0.0;    // d/dt
  double dtt = 0.0;   // d2/dt2
  double dttt = 0.0;  // d3/dt3
  double dz = 0.0;    // d/dzeta

  static Jet constant(double c) { return Jet{c, 0, 0, 0, 0}; }
  static Jet time_input(double t) { return Jet{t, 1, 0, 0, 0}; }
  static Jet zeta_input(double z) { return Jet{z, 0, 0, 0, 1}; }

  double slot(int s) const {
    switch (s) {
      case 0: return v;
      case 1: return dt;
      case 2: return dtt;
      case 3: return dttt;
      default: return dz;
    }
  }
  double& slot(int s) {
    switch (s) {
      case 0: return v;
      case 1: return dt;
      case 2: return dtt;
      case 3: return dttt;
      default: return dz;
    }
  }
};

inline Jet operator+(const Jet& a, const Jet& b) {
  return {a.v + b.v, a.dt + b.dt, a.dtt + b.dtt, a.dttt + b.dttt, a.dz + b.dz};
}

inline Jet operator-(const Jet& a, const Jet& b) {
  return {a.v - b.v, a.dt - b.dt, a.dtt - b.dtt, a.dttt - b.dttt, a.dz - b.dz};
}

inline Jet operator*(double k, const Jet& a) {
  return {k * a.v, k * a.dt, k * a.dtt, k * a.dttt, k * a.dz};
}

inline Jet operator*(const Jet& a, double k) { return k * a; }

inline Jet& operator+=(Jet& a, const Jet& b) {
  a.v += b.v; a.dt += b.dt; a.dtt += b.dtt; a.dttt += b.dttt; a.dz += b.dz;
  return a;
}

/// Leibniz product up to the carried orders.
inline Jet operator*(const Jet& a, const Jet& b) {
  Jet c;
  c.v = a.v * b.v;
  c.dt = a.dt * b.v + a.v * b.dt;
  c.dtt = a.dtt * b.v + 2.0 * a.dt * b.dt + a.v * b.dtt;
  c.dttt = a.dttt * b.v + 3.0 * a.dtt * b.dt + 3.0 * a.dt * b.dtt + a.v * b.dttt;
  c.dz = a.dz * b.v + a.v * b.dz;
  return c;
}

/// First four tanh derivatives at u = tanh(x), via
/// d1 = 1 - u^2, d2 = -2 u d1, d3 = -2 d1^2 - 2 u d2, d4 = -6 d1 d2 - 2 u d3.
struct TanhDerivs {
  double u, d1, d2, d3, d4;
  explicit TanhDerivs(double x) {
    u = std::tanh(x);
    d1 = 1.0 - u * u;
    d2 = -2.0 * u * d1;
    d3 = -2.0 * d1 * d1 - 2.0 * u * d2;
    d4 = -6.0 * d1 * d2 - 2.0 * u * d3;
  }
};

/// tanh through the jet by Faa di Bruno.
inline Jet jet_tanh(const Jet& x) {
  const TanhDerivs f(x.v);
  Jet y;
  y.v = f.u;
  y.dt = f.d1 * x.dt;
  y.dtt = f.d2 * x.dt * x.dt + f.d1 * x.dtt;
  y.dttt = f.d3 * x.dt * x.dt * x.dt + 3.0 * f.d2 * x.dt * x.dtt + f.d1 * x.dttt;
  y.dz = f.d1 * x.dz;
  return y;
}

}  // namespace parafiber

#pragma once

// Quantitative evaluation: field comparison against the split-step oracle,
// loss statistics over the parameter space, the multiply-accumulate
// complexity model and a small wall-clock harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "parafiber/physics.hpp"
#include "parafiber/rbm.hpp"
#include "parafiber/ssfm.hpp"

namespace parafiber {

namespace detail {

inline std::vector<Complex> interp_linear(const std::vector<double>& x_src,
                                          const std::vector<Complex>& v_src,
                                          const std::vector<double>& x_dst) {
  std::vector<Complex> out(x_dst.size());
  for (std::size_t k = 0; k < x_dst.size(); ++k) {
    const double x = x_dst[k];
    if (x <= x_src.front()) {
      out[k] = v_src.front();
      continue;
    }
    if (x >= x_src.back()) {
      out[k] = v_src.back();
      continue;
    }
    const auto it = std::upper_bound(x_src.begin(), x_src.end(), x);
    const std::size_t hi = std::size_t(it - x_src.begin());
    const std::size_t lo = hi - 1;
    const double w = (x - x_src[lo]) / (x_src[hi] - x_src[lo]);
    out[k] = (1.0 - w) * v_src[lo] + w * v_src[hi];
  }
  return out;
}

}  // namespace detail

/// Bilinear resampling of a field onto new axes (linear in t, then in zeta).
inline Field2D interpolate_to_axes(const Field2D& f, const std::vector<double>& t_axis,
                                   const std::vector<double>& zeta_axis) {
  if (f.nt() < 2 || f.nz() < 2) throw std::invalid_argument("interpolate: field too small");
  // t direction first
  Field2D tmp(t_axis, f.zeta_axis);
  for (std::size_t j = 0; j < f.nz(); ++j) {
    std::vector<Complex> row(f.nt());
    for (std::size_t i = 0; i < f.nt(); ++i) row[i] = f.at(i, j);
    const auto res = detail::interp_linear(f.t_axis, row, t_axis);
    for (std::size_t i = 0; i < t_axis.size(); ++i) tmp.at(i, j) = res[i];
  }
  // then zeta
  Field2D out(t_axis, zeta_axis);
  for (std::size_t i = 0; i < t_axis.size(); ++i) {
    std::vector<Complex> col(tmp.nz());
    for (std::size_t j = 0; j < tmp.nz(); ++j) col[j] = tmp.at(i, j);
    const auto res = detail::interp_linear(tmp.zeta_axis, col, zeta_axis);
    for (std::size_t j = 0; j < zeta_axis.size(); ++j) out.at(i, j) = res[j];
  }
  out.source = f.source;
  return out;
}

namespace detail {

inline void require_same_axes(const Field2D& a, const Field2D& b) {
  if (a.nt() != b.nt() || a.nz() != b.nz())
    throw std::invalid_argument("field comparison: dimensions differ");
  for (std::size_t i = 0; i < a.nt(); ++i)
    if (std::abs(a.t_axis[i] - b.t_axis[i]) > 1e-12)
      throw std::invalid_argument("field comparison: t axes differ");
  for (std::size_t j = 0; j < a.nz(); ++j)
    if (std::abs(a.zeta_axis[j] - b.zeta_axis[j]) > 1e-12)
      throw std::invalid_argument("field comparison: zeta axes differ");
}

}  // namespace detail

/// Mean over all grid points of |psi_a - psi_b|^2 (complex difference).
inline double mse_vs_oracle(const Field2D& a, const Field2D& b) {
  detail::require_same_axes(a, b);
  double acc = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) acc += std::norm(a.values[k] - b.values[k]);
  return acc / double(a.values.size());
}

/// Mean over all grid points of (|psi_a| - |psi_b|)^2, the waveform error.
inline double amplitude_mse(const Field2D& a, const Field2D& b) {
  detail::require_same_axes(a, b);
  double acc = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    const double d = std::abs(a.values[k]) - std::abs(b.values[k]);
    acc += d * d;
  }
  return acc / double(a.values.size());
}

/// Per-parameter evaluation record.
struct ParameterError {
  std::size_t lattice_index = 0;
  FiberParams params;
  double loss = 0.0;           // fitted combined-field loss
  double amp_mse = -1.0;       // amplitude MSE against the oracle, -1 when not computed
  bool is_eigen = false;
};

struct ErrorReport {
  std::string pulse_shape;
  std::vector<ParameterError> entries;
  double mean_loss = 0.0;
  double log10_mean_loss = 0.0;
  double mean_amp_mse = -1.0;
  std::size_t worst_index = 0;     // lattice index with the largest loss
  double boundary_fraction = 0.0;  // greedy-selected points on the lattice boundary
};

/// Loss statistics over the fitted lattice; amplitude errors are filled in
/// only when oracle fields are supplied via evaluate_against_oracle.
inline ErrorReport loss_statistics(const GreedyReport& greedy, const EigenBasis& basis,
                                   const ParameterSpace& space, const PulseSpec& pulse) {
  if (greedy.coefficients.empty())
    throw std::invalid_argument("loss_statistics: no fitted coefficients");
  ErrorReport report;
  report.pulse_shape = to_string(pulse.shape);

  double sum = 0.0;
  double worst = -1.0;
  for (const auto& [idx, fit] : greedy.coefficients) {
    ParameterError e;
    e.lattice_index = idx;
    e.params = fit.target;
    e.loss = fit.loss;
    e.is_eigen = std::find(basis.lattice_indices.begin(), basis.lattice_indices.end(), idx) !=
                 basis.lattice_indices.end();
    report.entries.push_back(e);
    sum += fit.loss;
    if (fit.loss > worst) {
      worst = fit.loss;
      report.worst_index = idx;
    }
  }
  report.mean_loss = sum / double(report.entries.size());
  report.log10_mean_loss = std::log10(report.mean_loss);

  std::size_t on_boundary = 0;
  for (std::size_t idx : basis.lattice_indices)
    if (on_lattice_boundary(space, idx)) ++on_boundary;
  report.boundary_fraction = basis.lattice_indices.empty()
                                 ? 0.0
                                 : double(on_boundary) / double(basis.lattice_indices.size());
  return report;
}

/// Runs the oracle for every fitted lattice point, interpolates the combined
/// field onto the oracle grid and records the amplitude MSE.
inline void evaluate_against_oracle(ErrorReport& report, const EigenBasis& basis,
                                    const GreedyReport& greedy, const ParameterSpace& space,
                                    const PulseSpec& pulse, const Grid& grid,
                                    const SsfmConfig& ssfm_cfg, unsigned threads = 1) {
  const auto lattice = parameter_lattice(space);
  const unsigned n_threads = std::max(1u, threads);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      auto& entry = report.entries[k];
      const auto coeffs = derive_coefficients(lattice[entry.lattice_index], pulse, grid);
      const auto oracle = propagate_pulse(pulse, coeffs, grid, ssfm_cfg);
      const auto it = greedy.coefficients.find(entry.lattice_index);
      const auto predicted = combine(basis, it->second.c, grid);
      const auto resampled = interpolate_to_axes(predicted, oracle.t_axis, oracle.zeta_axis);
      entry.amp_mse = amplitude_mse(resampled, oracle);
    }
  };
  if (n_threads == 1 || report.entries.size() < 2) {
    work(0, report.entries.size());
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_threads; ++w) {
      const std::size_t b = report.entries.size() * w / n_threads;
      const std::size_t e = report.entries.size() * (w + 1) / n_threads;
      pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  double sum = 0.0;
  for (const auto& e : report.entries) sum += e.amp_mse;
  report.mean_amp_mse = sum / double(report.entries.size());
}

/// Inputs of the multiply-accumulate complexity model. The headline counts
/// use the per-condition multiplicity N; T = N * M_t * M_c is carried for
/// reference and consistency checks.
struct ComplexityModel {
  double n_conditions = 1000;  // N
  double m_t = 100;
  double m_c = 101;
  double hidden_layers = 4;    // K
  double neurons = 100;        // P
  double n_basis = 10;         // N_b
  double l_max = 1e5;          // m
  double l_u = 100;            // segment length, m
  double n_dispersion = 600;   // per-segment dispersion MACs, default 6 M_t
  double n_nonlinear = 1000;   // per-segment nonlinearity MACs, default 10 M_t

  double total_points() const { return n_conditions * m_t * m_c; }  // T

  void validate() const {
    for (double v : {n_conditions, m_t, m_c, hidden_layers, neurons, n_basis, l_max, l_u})
      if (!(v > 0.0)) throw std::invalid_argument("ComplexityModel: counts must be positive");
    if (l_u > l_max) throw std::invalid_argument("ComplexityModel: segment longer than the fiber");
  }
};

struct MacCounts {
  double c_ssfm = 0.0;
  double c_f = 0.0;           // previously proposed per-condition model
  double c_pf = 0.0;          // parameterized model, combination cost included
  double c_pf_network = 0.0;  // eigen-network share of c_pf
  double c_pf_combine = 0.0;  // 2 N_b combination MACs

  double ratio_pf_f_networks() const { return c_pf_network / c_f; }
  double ratio_pf_f() const { return c_pf / c_f; }
  double ratio_pf_ssfm() const { return c_pf / c_ssfm; }
};

/// MAC counts of the three methods: split-step (per segment, 4 M_t log2 M_t
/// for the transform pair plus the dispersion and nonlinearity work), the
/// per-condition network, and the eigen-basis combination. The network share
/// of C_PF against C_F reduces to exactly N_b / N.
inline MacCounts mac_counts(const ComplexityModel& m) {
  m.validate();
  const double per_net = 2.0 * m.neurons + (m.hidden_layers - 1.0) * m.neurons * m.neurons;
  MacCounts out;
  out.c_ssfm = m.n_conditions * (m.l_max / m.l_u) *
               (4.0 * m.m_t * std::log2(m.m_t) + m.n_dispersion + m.n_nonlinear);
  out.c_f = m.n_conditions * per_net;
  out.c_pf_network = m.n_basis * per_net;
  out.c_pf_combine = 2.0 * m.n_basis;
  out.c_pf = out.c_pf_network + out.c_pf_combine;
  return out;
}

/// Median-of-k wall times for named task closures.
struct TimingRow {
  std::string stage;
  double median_seconds = 0.0;
  std::vector<double> samples;
};

inline std::vector<TimingRow> timing_harness(
    const std::vector<std::pair<std::string, std::function<void()>>>& tasks, std::size_t k = 3) {
  if (k < 1) throw std::invalid_argument("timing_harness: need at least one repetition");
  std::vector<TimingRow> rows;
  for (const auto& [name, fn] : tasks) {
    TimingRow row;
    row.stage = name;
    for (std::size_t rep = 0; rep < k; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      row.samples.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::vector<double> sorted = row.samples;
    std::sort(sorted.begin(), sorted.end());
    row.median_seconds = sorted[sorted.size() / 2];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace parafiber

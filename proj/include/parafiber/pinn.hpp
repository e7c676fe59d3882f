#pragma once

// The principle-driven fiber model: one MLP trained so its output satisfies
// the normalized propagation equation plus the input-pulse initial condition
// on a fixed parameter set. Splitting psi = psi_R + i psi_I in the equation
// gives the two real residual components
//   r_R = -A1 dI/dz - k1 A2 I + (k1 A3/k2^2) d2R/dt2 - (k1 A4/k2^3) d3I/dt3
//         + k1 A5 (R^2 + I^2) R
//   r_I = +A1 dR/dz + k1 A2 R + (k1 A3/k2^2) d2I/dt2 + (k1 A4/k2^3) d3R/dt3
//         + k1 A5 (R^2 + I^2) I
// and the training loss is mean(r_R^2 + r_I^2) over the collocation grid plus
// the mean squared initial-condition mismatch along zeta = 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "parafiber/adam.hpp"
#include "parafiber/jet.hpp"
#include "parafiber/mlp.hpp"
#include "parafiber/physics.hpp"
#include "parafiber/tape.hpp"

namespace parafiber {

/// The residual's five effective constants.
struct ResidualTerms {
  double c_z;     // A1
  double c_att;   // k1 A2
  double c_disp;  // k1 A3 / k2^2
  double c_tod;   // k1 A4 / k2^3
  double c_nl;    // k1 A5

  explicit ResidualTerms(const NormalizedCoefficients& c)
      : c_z(c.a1),
        c_att(c.kappa1 * c.a2),
        c_disp(c.kappa1 * c.a3 / (c.kappa2 * c.kappa2)),
        c_tod(c.kappa1 * c.a4 / (c.kappa2 * c.kappa2 * c.kappa2)),
        c_nl(c.kappa1 * c.a5) {}
};

/// Residual components at one collocation point, from the field value and
/// derivative slots. Shared by the network path and the snapshot-array path.
inline std::pair<double, double> residual_from_slots(double r, double i, double r_z, double i_z,
                                                     double r_tt, double i_tt, double r_ttt,
                                                     double i_ttt, const ResidualTerms& c) {
  const double mag2 = r * r + i * i;
  const double res_r = -c.c_z * i_z - c.c_att * i + c.c_disp * r_tt - c.c_tod * i_ttt + c.c_nl * mag2 * r;
  const double res_i = c.c_z * r_z + c.c_att * r + c.c_disp * i_tt + c.c_tod * r_ttt + c.c_nl * mag2 * i;
  return {res_r, res_i};
}

/// Residual components from the output jets of one forward pass.
inline std::pair<double, double> nlse_residual(const Jet& psi_r, const Jet& psi_i,
                                               const NormalizedCoefficients& coeffs) {
  const ResidualTerms c(coeffs);
  return residual_from_slots(psi_r.v, psi_i.v, psi_r.dz, psi_i.dz, psi_r.dtt, psi_i.dtt,
                             psi_r.dttt, psi_i.dttt, c);
}

struct TrainConfig {
  std::size_t max_epochs = 60000;
  double stop_loss = 1e-5;
  AdamConfig adam{};
  std::size_t collocation_points = 0;  // 0 = full grid every epoch
  std::uint64_t subsample_seed = 1;
  double divergence_loss = 1e6;
  std::size_t log_every = 0;  // 0 = silent
  unsigned threads = 1;

  void validate() const {
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (!(stop_loss > 0.0)) throw std::invalid_argument("TrainConfig: stop_loss must be > 0");
  }
};

/// Predicted field and every derivative the reduced-basis layer consumes,
/// sampled on the full grid. Array layout matches Field2D (t fastest).
struct EigenSnapshot {
  FiberParams params;
  NormalizedCoefficients coeffs;
  std::size_t nt = 0, nz = 0;
  std::vector<double> psi_r, psi_i;      // field
  std::vector<double> dz_r, dz_i;        // d/dzeta
  std::vector<double> dtt_r, dtt_i;      // d2/dt2
  std::vector<double> dttt_r, dttt_i;    // d3/dt3
  double final_loss = 0.0;
  std::size_t epochs = 0;

  std::size_t points() const { return nt * nz; }

  bool all_finite() const {
    for (const auto* arr : {&psi_r, &psi_i, &dz_r, &dz_i, &dtt_r, &dtt_i, &dttt_r, &dttt_i})
      for (double x : *arr)
        if (!std::isfinite(x)) return false;
    return true;
  }
};

/// Loss of Eq-form above evaluated directly from field/derivative arrays.
inline double field_loss(const EigenSnapshot& f, const NormalizedCoefficients& coeffs,
                         const std::vector<Complex>& initial) {
  if (initial.size() != f.nt) throw std::invalid_argument("field_loss: initial length != nt");
  const ResidualTerms c(coeffs);
  double acc_res = 0.0;
  for (std::size_t k = 0; k < f.points(); ++k) {
    const auto [rr, ri] = residual_from_slots(f.psi_r[k], f.psi_i[k], f.dz_r[k], f.dz_i[k],
                                              f.dtt_r[k], f.dtt_i[k], f.dttt_r[k], f.dttt_i[k], c);
    acc_res += rr * rr + ri * ri;
  }
  double acc_ic = 0.0;
  for (std::size_t i = 0; i < f.nt; ++i) {
    const double dr = f.psi_r[i] - initial[i].real();
    const double di = f.psi_i[i] - initial[i].imag();
    acc_ic += dr * dr + di * di;
  }
  return acc_res / double(f.points()) + acc_ic / double(f.nt);
}

/// Full-grid loss of one model: mean squared residual over every collocation
/// point plus mean squared initial-condition mismatch at zeta = 0.
inline double pinn_loss(const MlpModel& m, const NormalizedCoefficients& coeffs, const Grid& grid,
                        const std::vector<Complex>& initial) {
  grid.validate();
  if (initial.size() != grid.t_points)
    throw std::invalid_argument("pinn_loss: initial length != t_points");
  const ResidualTerms c(coeffs);
  double acc_res = 0.0, acc_ic = 0.0;
  for (std::size_t j = 0; j < grid.zeta_points; ++j) {
    const double zeta = grid.zeta(j);
    for (std::size_t i = 0; i < grid.t_points; ++i) {
      const auto [pr, pi] = network_jets(m, grid.t(i), zeta);
      const auto [rr, ri] = residual_from_slots(pr.v, pi.v, pr.dz, pi.dz, pr.dtt, pi.dtt,
                                                pr.dttt, pi.dttt, c);
      acc_res += rr * rr + ri * ri;
      if (j == 0) {
        const double dr = pr.v - initial[i].real();
        const double di = pi.v - initial[i].imag();
        acc_ic += dr * dr + di * di;
      }
    }
  }
  const double loss = acc_res / double(grid.t_points * grid.zeta_points) +
                      acc_ic / double(grid.t_points);
  if (!std::isfinite(loss)) throw std::runtime_error("pinn_loss: non-finite forward pass");
  return loss;
}

namespace detail {

/// Tape program computing r_R^2 + r_I^2 at one collocation point.
struct ResidualProgram {
  Tape tape;
  Tape::NodeId in_t = -1, in_z = -1, out = -1;

  ResidualProgram(const std::vector<std::size_t>& layers, const ResidualTerms& c) {
    const NetworkTape net = build_network_tape(tape, layers);
    in_t = net.input_t;
    in_z = net.input_zeta;
    const auto r_v = tape.slot(net.out_r, 0);
    const auto i_v = tape.slot(net.out_i, 0);
    const auto r_tt = tape.slot(net.out_r, 2);
    const auto i_tt = tape.slot(net.out_i, 2);
    const auto r_ttt = tape.slot(net.out_r, 3);
    const auto i_ttt = tape.slot(net.out_i, 3);
    const auto r_z = tape.slot(net.out_r, 4);
    const auto i_z = tape.slot(net.out_i, 4);
    const auto mag2 = tape.add(tape.mul(r_v, r_v), tape.mul(i_v, i_v));

    const auto res_r = tape.add(
        tape.add(tape.add(tape.scale(i_z, -c.c_z), tape.scale(i_v, -c.c_att)),
                 tape.add(tape.scale(r_tt, c.c_disp), tape.scale(i_ttt, -c.c_tod))),
        tape.scale(tape.mul(mag2, r_v), c.c_nl));
    const auto res_i = tape.add(
        tape.add(tape.add(tape.scale(r_z, c.c_z), tape.scale(r_v, c.c_att)),
                 tape.add(tape.scale(i_tt, c.c_disp), tape.scale(r_ttt, c.c_tod))),
        tape.scale(tape.mul(mag2, i_v), c.c_nl));
    out = tape.add(tape.mul(res_r, res_r), tape.mul(res_i, res_i));
  }
};

/// Tape program computing the squared initial-condition mismatch at one
/// zeta = 0 point; the target is a pair of per-point constants.
struct InitialProgram {
  Tape tape;
  Tape::NodeId in_t = -1, in_z = -1, target_r = -1, target_i = -1, out = -1;

  explicit InitialProgram(const std::vector<std::size_t>& layers) {
    const NetworkTape net = build_network_tape(tape, layers);
    in_t = net.input_t;
    in_z = net.input_zeta;
    target_r = tape.constant(0.0);
    target_i = tape.constant(0.0);
    const auto dr = tape.sub(tape.slot(net.out_r, 0), target_r);
    const auto di = tape.sub(tape.slot(net.out_i, 0), target_i);
    out = tape.add(tape.mul(dr, dr), tape.mul(di, di));
  }
};

}  // namespace detail

struct LossRecord {
  std::size_t epoch;  // 1-based
  double loss;
};

struct TrainResult {
  MlpModel model;
  std::vector<LossRecord> history;
  bool diverged = false;
  std::size_t epochs_run = 0;
};

/// Full-batch gradient-descent training with Adam. The loss recorded for an
/// epoch is evaluated at the parameters entering that epoch; training stops
/// before the update once it drops under stop_loss. Deterministic for a fixed
/// (model seed, config, thread count): points are chunked by thread index and
/// the partial sums are combined in that order.
inline TrainResult train(const MlpModel& model, const NormalizedCoefficients& coeffs,
                         const Grid& grid, const std::vector<Complex>& initial,
                         const TrainConfig& cfg) {
  cfg.validate();
  grid.validate();
  model.validate_pinn_shape();
  if (initial.size() != grid.t_points)
    throw std::invalid_argument("train: initial length != t_points");

  const ResidualTerms terms(coeffs);
  const std::size_t n_params = model.param_count();
  const unsigned n_threads = std::max(1u, cfg.threads);

  struct Worker {
    detail::ResidualProgram res;
    detail::InitialProgram ic;
    std::vector<double> grad;
    double loss = 0.0;
    Worker(const std::vector<std::size_t>& layers, const ResidualTerms& c, std::size_t np)
        : res(layers, c), ic(layers), grad(np, 0.0) {}
  };
  std::vector<Worker> workers;
  workers.reserve(n_threads);
  for (unsigned w = 0; w < n_threads; ++w) workers.emplace_back(model.layer_sizes, terms, n_params);

  const std::size_t nt = grid.t_points;
  const std::size_t nz = grid.zeta_points;
  const std::size_t grid_points = nt * nz;

  const bool subsampled = cfg.collocation_points > 0 && cfg.collocation_points < grid_points;
  const std::size_t n_residual = subsampled ? cfg.collocation_points : grid_points;
  const double res_norm = 1.0 / double(n_residual);
  const double ic_norm = 1.0 / double(nt);

  // persistent permutation for drawing residual subsets without replacement
  std::vector<std::size_t> perm;
  if (subsampled) {
    perm.resize(grid_points);
    for (std::size_t k = 0; k < grid_points; ++k) perm[k] = k;
  }
  std::mt19937_64 sample_rng(cfg.subsample_seed);

  TrainResult result;
  result.model = model;
  std::vector<double> params = model.params;
  std::vector<double> grad(n_params, 0.0);
  AdamOptimizer adam(n_params, cfg.adam);

  // Residual contributions for a range of collocation points. When running
  // on the full grid the zeta = 0 sweep doubles as the initial-condition
  // pass; subsampled epochs handle the initial row separately.
  auto run_chunk = [&](Worker& wk, std::size_t begin, std::size_t end, bool ic_at_row0) {
    wk.loss = 0.0;
    std::fill(wk.grad.begin(), wk.grad.end(), 0.0);
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t k = subsampled ? perm[p] : p;
      const std::size_t i = k % nt;
      const std::size_t j = k / nt;
      const double t = grid.t(i);
      wk.res.tape.set_input(wk.res.in_t, Jet::time_input(t));
      wk.res.tape.set_input(wk.res.in_z, Jet::zeta_input(grid.zeta(j)));
      wk.res.tape.forward(params);
      wk.loss += wk.res.tape.value(wk.res.out) * res_norm;
      wk.res.tape.reverse(wk.res.out, res_norm, params, wk.grad);
      if (ic_at_row0 && j == 0) {
        wk.ic.tape.set_input(wk.ic.in_t, Jet::time_input(t));
        wk.ic.tape.set_input(wk.ic.in_z, Jet::zeta_input(0.0));
        wk.ic.tape.set_const(wk.ic.target_r, initial[i].real());
        wk.ic.tape.set_const(wk.ic.target_i, initial[i].imag());
        wk.ic.tape.forward(params);
        wk.loss += wk.ic.tape.value(wk.ic.out) * ic_norm;
        wk.ic.tape.reverse(wk.ic.out, ic_norm, params, wk.grad);
      }
    }
  };

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (subsampled) {
      for (std::size_t k = 0; k < n_residual; ++k) {
        const std::size_t r = k + std::size_t(sample_rng() % std::uint64_t(grid_points - k));
        std::swap(perm[k], perm[r]);
      }
    }

    double loss = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    if (n_threads == 1) {
      run_chunk(workers[0], 0, n_residual, !subsampled);
      loss = workers[0].loss;
      for (std::size_t i = 0; i < n_params; ++i) grad[i] += workers[0].grad[i];
    } else {
      std::vector<std::thread> pool;
      pool.reserve(n_threads);
      for (unsigned w = 0; w < n_threads; ++w) {
        const std::size_t b = n_residual * w / n_threads;
        const std::size_t e = n_residual * (w + 1) / n_threads;
        pool.emplace_back([&, w, b, e] { run_chunk(workers[w], b, e, !subsampled); });
      }
      for (auto& th : pool) th.join();
      for (unsigned w = 0; w < n_threads; ++w) {
        loss += workers[w].loss;
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += workers[w].grad[i];
      }
    }
    if (subsampled) {
      Worker& wk = workers[0];
      for (std::size_t i = 0; i < nt; ++i) {
        wk.ic.tape.set_input(wk.ic.in_t, Jet::time_input(grid.t(i)));
        wk.ic.tape.set_input(wk.ic.in_z, Jet::zeta_input(0.0));
        wk.ic.tape.set_const(wk.ic.target_r, initial[i].real());
        wk.ic.tape.set_const(wk.ic.target_i, initial[i].imag());
        wk.ic.tape.forward(params);
        loss += wk.ic.tape.value(wk.ic.out) * ic_norm;
        wk.ic.tape.reverse(wk.ic.out, ic_norm, params, grad);
      }
    }

    result.history.push_back({epoch, loss});
    result.epochs_run = epoch;
    if (cfg.log_every > 0 && epoch % cfg.log_every == 0)
      std::fprintf(stderr, "epoch %zu  loss %.6e\n", epoch, loss);
    if (!std::isfinite(loss) || loss > cfg.divergence_loss) {
      result.diverged = true;
      break;
    }
    if (loss < cfg.stop_loss) break;
    adam.step(params, grad);
  }

  result.model.params = std::move(params);
  return result;
}

/// Evaluates the model and its derivatives at every grid point.
inline EigenSnapshot snapshot(const MlpModel& m, const FiberParams& params,
                              const NormalizedCoefficients& coeffs, const Grid& grid,
                              double final_loss = 0.0, std::size_t epochs = 0) {
  grid.validate();
  m.validate_pinn_shape();
  EigenSnapshot s;
  s.params = params;
  s.coeffs = coeffs;
  s.nt = grid.t_points;
  s.nz = grid.zeta_points;
  s.final_loss = final_loss;
  s.epochs = epochs;
  const std::size_t n = s.points();
  for (auto* arr : {&s.psi_r, &s.psi_i, &s.dz_r, &s.dz_i, &s.dtt_r, &s.dtt_i, &s.dttt_r, &s.dttt_i})
    arr->assign(n, 0.0);
  for (std::size_t j = 0; j < s.nz; ++j) {
    const double zeta = grid.zeta(j);
    for (std::size_t i = 0; i < s.nt; ++i) {
      const auto [pr, pi] = network_jets(m, grid.t(i), zeta);
      const std::size_t k = j * s.nt + i;
      s.psi_r[k] = pr.v;
      s.psi_i[k] = pi.v;
      s.dz_r[k] = pr.dz;
      s.dz_i[k] = pi.dz;
      s.dtt_r[k] = pr.dtt;
      s.dtt_i[k] = pi.dtt;
      s.dttt_r[k] = pr.dttt;
      s.dttt_i[k] = pi.dttt;
    }
  }
  return s;
}

/// Field2D view of a snapshot's complex field on the grid axes.
inline Field2D snapshot_field(const EigenSnapshot& s, const Grid& grid) {
  Field2D f(grid.t_axis(), grid.zeta_axis());
  for (std::size_t k = 0; k < s.points(); ++k) f.values[k] = Complex(s.psi_r[k], s.psi_i[k]);
  f.source = s.params;
  return f;
}

}  // namespace parafiber

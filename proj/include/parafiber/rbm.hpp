#pragma once

// Reduced-basis layer: universal solutions of the parameterized equation are
// real linear combinations of eigen-solution snapshots. Greedy selection
// walks the lattice, always training a fresh principle-driven model at the
// worst-approximated parameter point; per-point coefficients come from plain
// gradient descent on the combined-field loss, whose gradient is analytic
// because the snapshots carry their derivative fields.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "parafiber/physics.hpp"
#include "parafiber/pinn.hpp"

namespace parafiber {

/// Ordered eigen-solution snapshots plus the lattice indices consumed so far.
struct EigenBasis {
  std::vector<EigenSnapshot> snapshots;
  std::vector<std::size_t> lattice_indices;

  std::size_t size() const { return snapshots.size(); }

  void append(EigenSnapshot snap, std::size_t lattice_index) {
    for (std::size_t idx : lattice_indices)
      if (idx == lattice_index)
        throw std::invalid_argument("EigenBasis: lattice index already consumed");
    if (!snapshots.empty() &&
        (snap.nt != snapshots.front().nt || snap.nz != snapshots.front().nz))
      throw std::invalid_argument("EigenBasis: snapshot grid mismatch");
    snapshots.push_back(std::move(snap));
    lattice_indices.push_back(lattice_index);
  }
};

/// Fitted combination for one target parameter point.
struct CoefficientSet {
  std::vector<double> c;
  FiberParams target;
  double loss = 0.0;
  std::size_t iterations = 0;
  bool diverged = false;
};

struct FitConfig {
  double learning_rate = 1e-2;
  std::size_t max_iterations = 2000;
  double gradient_tolerance = 1e-8;
  double divergence_loss = 1e6;
  bool warm_start = true;  // reuse previous coefficients between rounds
};

/// Pointwise combination Phi = sum_m c_m (Psi_Rm + i Psi_Im) on the grid.
inline Field2D combine(const EigenBasis& basis, const std::vector<double>& c, const Grid& grid) {
  if (basis.size() == 0) throw std::invalid_argument("combine: empty basis");
  if (c.size() != basis.size()) throw std::invalid_argument("combine: coefficient count != basis size");
  const auto& first = basis.snapshots.front();
  if (first.nt != grid.t_points || first.nz != grid.zeta_points)
    throw std::invalid_argument("combine: grid does not match the snapshots");

  Field2D f(grid.t_axis(), grid.zeta_axis());
  for (std::size_t m = 0; m < basis.size(); ++m) {
    const auto& s = basis.snapshots[m];
    for (std::size_t k = 0; k < s.points(); ++k)
      f.values[k] += Complex(c[m] * s.psi_r[k], c[m] * s.psi_i[k]);
  }
  return f;
}

/// Combination of the full snapshot (field and derivative arrays alike);
/// the derivatives combine with the same coefficients by linearity.
inline EigenSnapshot combine_full(const EigenBasis& basis, const std::vector<double>& c) {
  if (basis.size() == 0) throw std::invalid_argument("combine_full: empty basis");
  if (c.size() != basis.size())
    throw std::invalid_argument("combine_full: coefficient count != basis size");
  EigenSnapshot out = basis.snapshots.front();
  const std::size_t n = out.points();
  auto mutable_arrays = [](EigenSnapshot& s) {
    return std::array<std::vector<double>*, 8>{&s.psi_r, &s.psi_i, &s.dz_r, &s.dz_i,
                                               &s.dtt_r, &s.dtt_i, &s.dttt_r, &s.dttt_i};
  };
  auto const_arrays = [](const EigenSnapshot& s) {
    return std::array<const std::vector<double>*, 8>{&s.psi_r, &s.psi_i, &s.dz_r, &s.dz_i,
                                                     &s.dtt_r, &s.dtt_i, &s.dttt_r, &s.dttt_i};
  };
  const auto dst = mutable_arrays(out);
  for (auto* arr : dst) std::fill(arr->begin(), arr->end(), 0.0);
  for (std::size_t m = 0; m < basis.size(); ++m) {
    const auto src = const_arrays(basis.snapshots[m]);
    for (std::size_t a = 0; a < src.size(); ++a)
      for (std::size_t k = 0; k < n; ++k) (*dst[a])[k] += c[m] * (*src[a])[k];
  }
  return out;
}

/// Combined-field loss under the target parameters: same functional as the
/// training loss, evaluated from the stored snapshot arrays (no network).
inline double rbm_loss(const EigenBasis& basis, const std::vector<double>& c,
                       const NormalizedCoefficients& target,
                       const std::vector<Complex>& initial) {
  if (basis.size() == 0) throw std::invalid_argument("rbm_loss: empty basis");
  if (c.size() != basis.size()) throw std::invalid_argument("rbm_loss: coefficient count != basis size");
  const auto& s0 = basis.snapshots.front();
  if (initial.size() != s0.nt) throw std::invalid_argument("rbm_loss: initial length != nt");

  const ResidualTerms terms(target);
  const std::size_t p = basis.size();
  const std::size_t n = s0.points();
  double acc_res = 0.0, acc_ic = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double r = 0, i = 0, r_z = 0, i_z = 0, r_tt = 0, i_tt = 0, r_ttt = 0, i_ttt = 0;
    for (std::size_t m = 0; m < p; ++m) {
      const auto& s = basis.snapshots[m];
      r += c[m] * s.psi_r[k];
      i += c[m] * s.psi_i[k];
      r_z += c[m] * s.dz_r[k];
      i_z += c[m] * s.dz_i[k];
      r_tt += c[m] * s.dtt_r[k];
      i_tt += c[m] * s.dtt_i[k];
      r_ttt += c[m] * s.dttt_r[k];
      i_ttt += c[m] * s.dttt_i[k];
    }
    const auto [rr, ri] = residual_from_slots(r, i, r_z, i_z, r_tt, i_tt, r_ttt, i_ttt, terms);
    acc_res += rr * rr + ri * ri;
    if (k < s0.nt) {
      const double dr = r - initial[k].real();
      const double di = i - initial[k].imag();
      acc_ic += dr * dr + di * di;
    }
  }
  return acc_res / double(n) + acc_ic / double(s0.nt);
}

/// Analytic gradient of rbm_loss with respect to each coefficient. For each
/// squared term S(c)^2 the contribution is 2 S dS/dc_m, where dS/dc_m
/// substitutes snapshot m's fields, with the product rule on |Phi|^2 Phi.
inline std::vector<double> rbm_gradient(const EigenBasis& basis, const std::vector<double>& c,
                                        const NormalizedCoefficients& target,
                                        const std::vector<Complex>& initial) {
  if (basis.size() == 0) throw std::invalid_argument("rbm_gradient: empty basis");
  if (c.size() != basis.size())
    throw std::invalid_argument("rbm_gradient: coefficient count != basis size");
  const auto& s0 = basis.snapshots.front();
  if (initial.size() != s0.nt) throw std::invalid_argument("rbm_gradient: initial length != nt");

  const ResidualTerms terms(target);
  const std::size_t p = basis.size();
  const std::size_t n = s0.points();
  std::vector<double> grad(p, 0.0);
  const double res_norm = 2.0 / double(n);
  const double ic_norm = 2.0 / double(s0.nt);

  for (std::size_t k = 0; k < n; ++k) {
    double r = 0, i = 0, r_z = 0, i_z = 0, r_tt = 0, i_tt = 0, r_ttt = 0, i_ttt = 0;
    for (std::size_t m = 0; m < p; ++m) {
      const auto& s = basis.snapshots[m];
      r += c[m] * s.psi_r[k];
      i += c[m] * s.psi_i[k];
      r_z += c[m] * s.dz_r[k];
      i_z += c[m] * s.dz_i[k];
      r_tt += c[m] * s.dtt_r[k];
      i_tt += c[m] * s.dtt_i[k];
      r_ttt += c[m] * s.dttt_r[k];
      i_ttt += c[m] * s.dttt_i[k];
    }
    const auto [rr, ri] = residual_from_slots(r, i, r_z, i_z, r_tt, i_tt, r_ttt, i_ttt, terms);
    const double mag2 = r * r + i * i;
    for (std::size_t m = 0; m < p; ++m) {
      const auto& s = basis.snapshots[m];
      const double rm = s.psi_r[k], im = s.psi_i[k];
      const double dot = r * rm + i * im;
      // d r_R / d c_m and d r_I / d c_m
      const double drr = -terms.c_z * s.dz_i[k] - terms.c_att * im + terms.c_disp * s.dtt_r[k] -
                         terms.c_tod * s.dttt_i[k] +
                         terms.c_nl * (2.0 * r * dot + mag2 * rm);
      const double dri = terms.c_z * s.dz_r[k] + terms.c_att * rm + terms.c_disp * s.dtt_i[k] +
                         terms.c_tod * s.dttt_r[k] +
                         terms.c_nl * (2.0 * i * dot + mag2 * im);
      grad[m] += res_norm * (rr * drr + ri * dri);
    }
    if (k < s0.nt) {
      const double dr = r - initial[k].real();
      const double di = i - initial[k].imag();
      for (std::size_t m = 0; m < p; ++m) {
        const auto& s = basis.snapshots[m];
        grad[m] += ic_norm * (dr * s.psi_r[k] + di * s.psi_i[k]);
      }
    }
  }
  return grad;
}

/// Plain gradient descent c <- c - lr * grad, warm-started from `start`.
/// Tracks the best iterate along the trajectory and returns it, which makes
/// the fitted loss never worse than the warm start.
inline CoefficientSet fit_coefficients(const EigenBasis& basis,
                                       const NormalizedCoefficients& target,
                                       const FiberParams& target_params,
                                       const std::vector<Complex>& initial, const FitConfig& cfg,
                                       std::vector<double> start = {}) {
  if (basis.size() == 0) throw std::invalid_argument("fit_coefficients: empty basis");
  std::vector<double> c = std::move(start);
  c.resize(basis.size(), 0.0);  // new coefficients start at zero

  CoefficientSet best;
  best.target = target_params;
  best.c = c;
  best.loss = rbm_loss(basis, c, target, initial);

  double current_loss = best.loss;
  std::size_t it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const auto grad = rbm_gradient(basis, c, target, initial);
    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    gnorm = std::sqrt(gnorm);
    if (gnorm < cfg.gradient_tolerance) break;
    for (std::size_t m = 0; m < c.size(); ++m) c[m] -= cfg.learning_rate * grad[m];
    current_loss = rbm_loss(basis, c, target, initial);
    if (!std::isfinite(current_loss) || current_loss > cfg.divergence_loss) {
      best.diverged = true;
      break;
    }
    if (current_loss < best.loss) {
      best.loss = current_loss;
      best.c = c;
    }
  }
  best.iterations = it;
  return best;
}

/// One greedy round record: the loss table over the remaining candidates and
/// the point picked for the next eigen solution.
struct GreedyRound {
  std::size_t basis_size = 0;            // basis size the candidates were fitted against
  std::size_t chosen_lattice_index = 0;  // argmax of the fitted losses
  double worst_loss = 0.0;
  std::vector<std::pair<std::size_t, double>> candidate_losses;  // (lattice index, loss)
};

struct GreedyReport {
  std::vector<GreedyRound> rounds;
  std::map<std::size_t, CoefficientSet> coefficients;  // final map, full basis
};

struct GreedyConfig {
  std::size_t n_basis = 10;
  std::size_t first_index = std::size_t(-1);  // default: central lattice point
  FitConfig fit{};
  std::uint64_t seed = 9000;  // per-round model seeds derive from this
  unsigned threads = 1;
  bool final_sweep = true;  // fit every lattice point against the complete basis
  std::function<void(const std::string&)> log;  // optional progress sink
};

namespace detail {

inline std::uint64_t round_seed(std::uint64_t base, std::size_t round) {
  return base + 1000003ull * std::uint64_t(round);
}

}  // namespace detail

/// Full greedy build over a parameter space: train at a seed point, then
/// repeatedly fit every remaining candidate, pick the worst one, train there
/// and continue until the basis holds n_basis snapshots. A final sweep fits
/// every lattice point against the complete basis.
inline std::pair<EigenBasis, GreedyReport> greedy_build(
    const ParameterSpace& space, const PulseSpec& pulse, const Grid& grid,
    const TrainConfig& train_cfg, const GreedyConfig& cfg,
    const std::vector<std::size_t>& model_layers) {
  space.validate();
  const auto lattice = parameter_lattice(space);
  if (lattice.size() < cfg.n_basis)
    throw std::invalid_argument("greedy_build: lattice smaller than the requested basis");
  if (cfg.n_basis < 1) throw std::invalid_argument("greedy_build: n_basis must be >= 1");

  const auto initial = generate_pulse(pulse, grid);
  auto say = [&](const std::string& msg) {
    if (cfg.log) cfg.log(msg);
  };

  EigenBasis basis;
  GreedyReport report;
  std::vector<std::size_t> candidates(lattice.size());
  for (std::size_t k = 0; k < lattice.size(); ++k) candidates[k] = k;
  std::map<std::size_t, std::vector<double>> warm;  // per-candidate coefficients

  auto train_at = [&](std::size_t lattice_index, std::size_t round) -> EigenSnapshot {
    const FiberParams& params = lattice[lattice_index];
    const auto coeffs = derive_coefficients(params, pulse, grid);
    auto model = init_model(model_layers, detail::round_seed(cfg.seed, round));
    auto result = train(model, coeffs, grid, initial, train_cfg);
    if (result.diverged) throw std::runtime_error("greedy_build: training diverged");
    const double loss = pinn_loss(result.model, coeffs, grid, initial);
    say("trained eigen solution at lattice index " + std::to_string(lattice_index) +
        ", loss " + std::to_string(loss));
    return snapshot(result.model, params, coeffs, grid, loss, result.epochs_run);
  };

  auto remove_candidate = [&](std::size_t lattice_index) {
    candidates.erase(std::find(candidates.begin(), candidates.end(), lattice_index));
    warm.erase(lattice_index);
  };

  auto fit_candidates = [&](std::vector<std::pair<std::size_t, double>>& table) {
    table.resize(candidates.size());
    const unsigned n_threads = std::max(1u, cfg.threads);
    std::vector<CoefficientSet> fits(candidates.size());
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = candidates[k];
        const auto target = derive_coefficients(lattice[idx], pulse, grid);
        std::vector<double> start;
        if (cfg.fit.warm_start) {
          auto it = warm.find(idx);
          if (it != warm.end()) start = it->second;
        }
        fits[k] = fit_coefficients(basis, target, lattice[idx], initial, cfg.fit,
                                   std::move(start));
      }
    };
    if (n_threads == 1 || candidates.size() < 2) {
      work(0, candidates.size());
    } else {
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < n_threads; ++w) {
        const std::size_t b = candidates.size() * w / n_threads;
        const std::size_t e = candidates.size() * (w + 1) / n_threads;
        pool.emplace_back(work, b, e);
      }
      for (auto& th : pool) th.join();
    }
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      table[k] = {candidates[k], fits[k].loss};
      warm[candidates[k]] = fits[k].c;
    }
    return fits;
  };

  // round 1: pre-determined seed point
  const std::size_t first =
      cfg.first_index == std::size_t(-1) ? space.central_index() : cfg.first_index;
  if (first >= lattice.size()) throw std::invalid_argument("greedy_build: first index out of range");
  basis.append(train_at(first, 1), first);
  remove_candidate(first);

  while (basis.size() < cfg.n_basis) {
    GreedyRound round;
    round.basis_size = basis.size();
    auto fits = fit_candidates(round.candidate_losses);

    // argmax of the fitted losses, ties broken by the lowest lattice index
    std::size_t worst_pos = 0;
    for (std::size_t k = 1; k < round.candidate_losses.size(); ++k)
      if (round.candidate_losses[k].second > round.candidate_losses[worst_pos].second)
        worst_pos = k;
    round.chosen_lattice_index = round.candidate_losses[worst_pos].first;
    round.worst_loss = round.candidate_losses[worst_pos].second;
    say("round with basis size " + std::to_string(basis.size()) + ": worst candidate " +
        std::to_string(round.chosen_lattice_index) + " at loss " +
        std::to_string(round.worst_loss));

    // train there; if training fails fall back to the next-worst candidate
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(round.candidate_losses.size());
    for (const auto& [idx, loss] : round.candidate_losses) order.emplace_back(-loss, idx);
    std::sort(order.begin(), order.end());
    bool placed = false;
    for (const auto& [neg_loss, idx] : order) {
      try {
        basis.append(train_at(idx, basis.size() + 1), idx);
        round.chosen_lattice_index = idx;
        round.worst_loss = -neg_loss;
        placed = true;
        break;
      } catch (const std::runtime_error& e) {
        say(std::string("training failed at lattice index ") + std::to_string(idx) + ": " +
            e.what() + "; falling back to the next-worst candidate");
      }
    }
    report.rounds.push_back(round);
    if (!placed) throw std::runtime_error("greedy_build: training failed at every candidate");
    remove_candidate(report.rounds.back().chosen_lattice_index);
  }

  // final sweep: fit every lattice point against the complete basis
  if (cfg.final_sweep) {
    GreedyRound final_round;
    final_round.basis_size = basis.size();
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t worst_idx = 0;
    std::vector<std::size_t> all(lattice.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    std::swap(candidates, all);
    auto fits = fit_candidates(final_round.candidate_losses);
    std::swap(candidates, all);
    for (std::size_t k = 0; k < final_round.candidate_losses.size(); ++k) {
      const auto [idx, loss] = final_round.candidate_losses[k];
      report.coefficients[idx] = fits[k];
      const bool is_eigen = std::find(basis.lattice_indices.begin(), basis.lattice_indices.end(),
                                      idx) != basis.lattice_indices.end();
      if (!is_eigen && loss > worst) {
        worst = loss;
        worst_idx = idx;
      }
    }
    final_round.chosen_lattice_index = worst_idx;
    final_round.worst_loss = worst;
    report.rounds.push_back(final_round);
  }

  return {std::move(basis), std::move(report)};
}

/// Combined field for a fitted parameter point; with fit-on-demand the
/// coefficients are computed on the spot.
inline Field2D predict(const EigenBasis& basis, const GreedyReport& report,
                       std::size_t lattice_index, const ParameterSpace& space,
                       const PulseSpec& pulse, const Grid& grid, bool fit_on_demand = false,
                       const FitConfig& fit_cfg = {}) {
  const auto it = report.coefficients.find(lattice_index);
  std::vector<double> c;
  FiberParams params;
  if (it != report.coefficients.end() && it->second.c.size() == basis.size()) {
    c = it->second.c;
    params = it->second.target;
  } else if (fit_on_demand) {
    const auto lattice = parameter_lattice(space);
    if (lattice_index >= lattice.size())
      throw std::invalid_argument("predict: lattice index out of range");
    params = lattice[lattice_index];
    const auto target = derive_coefficients(params, pulse, grid);
    c = fit_coefficients(basis, target, params, generate_pulse(pulse, grid), fit_cfg).c;
  } else {
    throw std::invalid_argument("predict: no fitted coefficients for this parameter point");
  }
  Field2D f = combine(basis, c, grid);
  f.source = params;
  return f;
}

}  // namespace parafiber

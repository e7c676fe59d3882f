#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "parafiber/rbm.hpp"

using namespace parafiber;

namespace {

// Smooth synthetic snapshot: a few sinusoids with random weights. The
// derivative arrays are treated as data by the fitting machinery, so they do
// not need to solve the equation.
EigenSnapshot synthetic_snapshot(const Grid& grid, const NormalizedCoefficients& coeffs,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u = [&] { return double(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  const double w1 = 1.0 + u(), w2 = 2.0 + u(), amp = 0.6 + 0.3 * u();

  EigenSnapshot s;
  s.params = FiberParams{};
  s.coeffs = coeffs;
  s.nt = grid.t_points;
  s.nz = grid.zeta_points;
  for (auto* arr : {&s.psi_r, &s.psi_i, &s.dz_r, &s.dz_i, &s.dtt_r, &s.dtt_i, &s.dttt_r, &s.dttt_i})
    arr->assign(s.points(), 0.0);
  for (std::size_t j = 0; j < s.nz; ++j)
    for (std::size_t i = 0; i < s.nt; ++i) {
      const double t = grid.t(i), z = grid.zeta(j);
      const std::size_t k = j * s.nt + i;
      s.psi_r[k] = amp * std::sin(w1 * t + 0.3 * z);
      s.psi_i[k] = amp * std::cos(w2 * t - 0.5 * z);
      s.dz_r[k] = amp * 0.3 * std::cos(w1 * t + 0.3 * z);
      s.dz_i[k] = amp * 0.5 * std::sin(w2 * t - 0.5 * z);
      s.dtt_r[k] = -amp * w1 * w1 * std::sin(w1 * t + 0.3 * z);
      s.dtt_i[k] = -amp * w2 * w2 * std::cos(w2 * t - 0.5 * z);
      s.dttt_r[k] = -amp * w1 * w1 * w1 * std::cos(w1 * t + 0.3 * z);
      s.dttt_i[k] = amp * w2 * w2 * w2 * std::sin(w2 * t - 0.5 * z);
    }
  s.final_loss = 0.0;
  return s;
}

NormalizedCoefficients desk_target(double n2 = 8.84e-21, double beta2 = 6.67e-27) {
  FiberParams p;
  p.alpha = 0.0;
  p.beta2 = beta2;
  p.n2 = n2;
  return derive_coefficients(p, PulseSpec{}, Grid{});
}

}  // namespace

TEST_CASE("combine") {
  const Grid grid{16, 9, 1e5};
  const auto coeffs = desk_target();
  EigenBasis basis;
  basis.append(synthetic_snapshot(grid, coeffs, 1), 0);
  basis.append(synthetic_snapshot(grid, coeffs, 2), 5);

  SECTION("indicator coefficients copy one snapshot exactly") {
    const auto f = combine(basis, {1.0, 0.0}, grid);
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      CHECK(f.values[k].real() == basis.snapshots[0].psi_r[k]);
      CHECK(f.values[k].imag() == basis.snapshots[0].psi_i[k]);
    }
  }

  SECTION("zero coefficients give the zero field") {
    const auto f = combine(basis, {0.0, 0.0}, grid);
    for (const auto& v : f.values) CHECK(v == Complex(0.0, 0.0));
  }

  SECTION("averaging two identical snapshots reproduces the snapshot") {
    EigenBasis twin;
    twin.append(synthetic_snapshot(grid, coeffs, 3), 0);
    twin.append(synthetic_snapshot(grid, coeffs, 3), 1);
    const auto f = combine(twin, {0.5, 0.5}, grid);
    for (std::size_t k = 0; k < f.values.size(); ++k)
      CHECK(f.values[k].real() ==
            Catch::Approx(twin.snapshots[0].psi_r[k]).margin(1e-15));
  }

  SECTION("combination is exactly linear in the coefficients") {
    std::mt19937_64 rng(77);
    auto u = [&] { return double(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
    for (int rep = 0; rep < 5; ++rep) {
      const std::vector<double> c1{u(), u()}, c2{u(), u()};
      const double a = u(), b = u();
      std::vector<double> mix{a * c1[0] + b * c2[0], a * c1[1] + b * c2[1]};
      const auto fmix = combine(basis, mix, grid);
      const auto f1 = combine(basis, c1, grid);
      const auto f2 = combine(basis, c2, grid);
      for (std::size_t k = 0; k < fmix.values.size(); k += 13) {
        const Complex expect = a * f1.values[k] + b * f2.values[k];
        CHECK(std::abs(fmix.values[k] - expect) < 1e-12);
      }
    }
  }

  SECTION("size mismatch is rejected") {
    CHECK_THROWS_AS(combine(basis, {1.0}, grid), std::invalid_argument);
    CHECK_THROWS_AS(rbm_loss(basis, {1.0}, coeffs, {}), std::invalid_argument);
  }

  SECTION("consumed lattice indices stay unique") {
    CHECK_THROWS_AS(basis.append(synthetic_snapshot(grid, coeffs, 4), 5), std::invalid_argument);
  }
}

TEST_CASE("rbm loss") {
  const Grid grid{16, 9, 1e5};
  const auto coeffs = desk_target();
  const auto initial = generate_pulse(PulseSpec{}, grid);

  EigenBasis basis;
  basis.append(synthetic_snapshot(grid, coeffs, 11), 0);
  basis.append(synthetic_snapshot(grid, coeffs, 12), 1);

  SECTION("single snapshot at its own parameters reproduces the stored loss") {
    EigenBasis single;
    auto s = synthetic_snapshot(grid, coeffs, 13);
    s.final_loss = field_loss(s, coeffs, initial);
    single.append(s, 0);
    CHECK(rbm_loss(single, {1.0}, coeffs, initial) ==
          Catch::Approx(single.snapshots[0].final_loss).epsilon(1e-10));
  }

  SECTION("zero coefficients leave only the initial-condition energy") {
    double expected = 0.0;
    for (const auto& v : initial) expected += std::norm(v);
    expected /= double(grid.t_points);
    CHECK(rbm_loss(basis, {0.0, 0.0}, coeffs, initial) == Catch::Approx(expected).epsilon(1e-12));
  }

  SECTION("per-point combination equals the pre-combined field evaluation") {
    std::mt19937_64 rng(99);
    auto u = [&] { return double(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
    for (int rep = 0; rep < 10; ++rep) {
      const std::vector<double> c{u(), u()};
      const double direct = rbm_loss(basis, c, coeffs, initial);
      const double via_field = field_loss(combine_full(basis, c), coeffs, initial);
      CHECK(direct == Catch::Approx(via_field).epsilon(1e-10));
    }
  }
}

TEST_CASE("rbm gradient matches finite differences") {
  const Grid grid{12, 7, 1e5};
  const auto initial = generate_pulse(PulseSpec{}, grid);
  std::mt19937_64 rng(123);
  auto u = [&] { return double(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };

  for (int rep = 0; rep < 10; ++rep) {
    const auto target = desk_target(2.6e-22 + (2.6e-20 - 2.6e-22) * 0.5 * (u() + 1.0),
                                    (u() > 0 ? 1.0 : -1.0) * (5e-27 + 1e-26 * 0.5 * (u() + 1.0)));
    EigenBasis basis;
    const std::size_t p = 1 + std::size_t(rep % 3);
    for (std::size_t m = 0; m < p; ++m)
      basis.append(synthetic_snapshot(grid, target, 100 * rep + m), m);
    std::vector<double> c(p);
    for (auto& x : c) x = u();

    const auto grad = rbm_gradient(basis, c, target, initial);
    const double h = 1e-5;
    for (std::size_t m = 0; m < p; ++m) {
      auto cp = c, cm = c;
      cp[m] += h;
      cm[m] -= h;
      const double fd =
          (rbm_loss(basis, cp, target, initial) - rbm_loss(basis, cm, target, initial)) /
          (2.0 * h);
      CHECK(std::abs(grad[m] - fd) <= 1e-6 * std::max(std::abs(fd), 1e-6));
    }
  }
}

TEST_CASE("coefficient fitting") {
  const Grid grid{16, 9, 1e5};
  const auto target = desk_target();
  const auto initial = generate_pulse(PulseSpec{}, grid);

  EigenBasis basis;
  basis.append(synthetic_snapshot(grid, target, 21), 0);
  basis.append(synthetic_snapshot(grid, target, 22), 1);

  SECTION("zero learning rate leaves the coefficients unchanged") {
    FitConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.max_iterations = 50;
    const auto fit = fit_coefficients(basis, target, FiberParams{}, initial, cfg, {0.4, -0.2});
    CHECK(fit.c[0] == 0.4);
    CHECK(fit.c[1] == -0.2);
  }

  SECTION("fitted loss never exceeds the warm-start loss") {
    FitConfig cfg;
    const std::vector<double> start{0.3, 0.3};
    const double start_loss = rbm_loss(basis, start, target, initial);
    const auto fit = fit_coefficients(basis, target, FiberParams{}, initial, cfg, start);
    CHECK(fit.loss <= start_loss + 1e-12);
  }

  SECTION("gradient norm is small after convergence") {
    FitConfig cfg;
    cfg.max_iterations = 20000;
    cfg.gradient_tolerance = 1e-9;
    const auto fit = fit_coefficients(basis, target, FiberParams{}, initial, cfg);
    const auto grad = rbm_gradient(basis, fit.c, target, initial);
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    CHECK(std::sqrt(norm) < 1e-6);
  }

  SECTION("a basis containing the target approximates it well") {
    EigenBasis self;
    auto s = synthetic_snapshot(grid, target, 23);
    s.final_loss = field_loss(s, target, initial);
    self.append(s, 0);
    self.append(synthetic_snapshot(grid, target, 24), 1);

    FitConfig cfg;
    cfg.max_iterations = 20000;
    cfg.gradient_tolerance = 1e-10;
    const auto fit = fit_coefficients(self, target, FiberParams{}, initial, cfg);
    CHECK(fit.loss <= 2.0 * self.snapshots[0].final_loss);
  }
}

TEST_CASE("greedy build on a miniature problem") {
  ParameterSpace space;
  space.alpha = {0.0, 2e-5, 2};
  space.beta2 = {-1e-26, 1e-26, 2};
  space.n2 = {5e-21, 2.6e-20, 2};

  const Grid grid{16, 9, 1e5};
  const PulseSpec pulse;

  TrainConfig tcfg;
  tcfg.max_epochs = 200;
  tcfg.stop_loss = 1e-6;

  GreedyConfig gcfg;
  gcfg.n_basis = 3;
  gcfg.fit.max_iterations = 400;
  gcfg.seed = 7777;

  const auto [basis, report] = greedy_build(space, pulse, grid, tcfg, gcfg, {2, 8, 8, 2});

  SECTION("basis structure") {
    REQUIRE(basis.size() == 3);
    // chosen indices pairwise distinct
    for (std::size_t a = 0; a < basis.lattice_indices.size(); ++a)
      for (std::size_t b = a + 1; b < basis.lattice_indices.size(); ++b)
        CHECK(basis.lattice_indices[a] != basis.lattice_indices[b]);
    CHECK(basis.lattice_indices.front() == space.central_index());
  }

  SECTION("report covers every lattice point with full-basis coefficients") {
    REQUIRE(report.coefficients.size() == space.size());
    for (const auto& [idx, fit] : report.coefficients) {
      CHECK(fit.c.size() == basis.size());
      CHECK(std::isfinite(fit.loss));
    }
  }

  SECTION("recorded worst-loss sequence is positive and ends no higher than it starts") {
    REQUIRE(report.rounds.size() == 3);  // two selection rounds + final sweep
    for (const auto& r : report.rounds) CHECK(r.worst_loss > 0.0);
    CHECK(report.rounds.back().worst_loss <=
          1.05 * report.rounds.front().worst_loss);
  }

  SECTION("worst-case loss is drawn from the candidate table of its round") {
    for (const auto& r : report.rounds) {
      bool found = false;
      for (const auto& [idx, loss] : r.candidate_losses)
        if (idx == r.chosen_lattice_index && loss == r.worst_loss) found = true;
      CHECK(found);
    }
  }

  SECTION("predict at an eigen point with indicator coefficients") {
    GreedyReport patched = report;
    const std::size_t eigen_idx = basis.lattice_indices[1];
    CoefficientSet indicator;
    indicator.c.assign(basis.size(), 0.0);
    indicator.c[1] = 1.0;
    indicator.target = parameter_lattice(space)[eigen_idx];
    patched.coefficients[eigen_idx] = indicator;

    const auto f = predict(basis, patched, eigen_idx, space, pulse, grid);
    const auto& s = basis.snapshots[1];
    REQUIRE(f.nt() == s.nt);
    REQUIRE(f.nz() == s.nz);
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      CHECK(std::abs(f.values[k].real() - s.psi_r[k]) < 1e-10);
      CHECK(std::abs(f.values[k].imag() - s.psi_i[k]) < 1e-10);
    }
  }

  SECTION("predict without coefficients requires fit-on-demand") {
    GreedyReport empty;
    CHECK_THROWS_AS(predict(basis, empty, 0, space, pulse, grid, false), std::invalid_argument);
    const auto f = predict(basis, empty, 0, space, pulse, grid, true, gcfg.fit);
    CHECK(f.nt() == grid.t_points);
    CHECK(f.all_finite());
  }
}

TEST_CASE("single-element greedy build trains one model") {
  ParameterSpace space;
  space.alpha = {0.0, 2e-5, 2};
  space.beta2 = {-1e-26, 1e-26, 2};
  space.n2 = {5e-21, 2.6e-20, 2};
  const Grid grid{12, 7, 1e5};

  TrainConfig tcfg;
  tcfg.max_epochs = 50;
  tcfg.stop_loss = 1e-6;

  GreedyConfig gcfg;
  gcfg.n_basis = 1;
  gcfg.final_sweep = false;  // loop boundary: one training, no fits at all

  const auto [basis, report] = greedy_build(space, PulseSpec{}, grid, tcfg, gcfg, {2, 6, 2});
  CHECK(basis.size() == 1);
  CHECK(report.rounds.empty());
  CHECK(report.coefficients.empty());
}

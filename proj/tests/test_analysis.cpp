#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "parafiber/analysis.hpp"

using namespace parafiber;

namespace {

Field2D linear_field(const std::vector<double>& t, const std::vector<double>& z) {
  Field2D f(t, z);
  for (std::size_t j = 0; j < f.nz(); ++j)
    for (std::size_t i = 0; i < f.nt(); ++i)
      f.at(i, j) = Complex(2.0 * t[i] - 0.5 * z[j], -t[i] + 3.0 * z[j]);
  return f;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = lo + (hi - lo) * double(k) / double(n - 1);
  return v;
}

}  // namespace

TEST_CASE("bilinear interpolation is exact for affine fields") {
  const auto coarse = linear_field(linspace(-1, 1, 9), linspace(0, 1, 5));
  const auto fine_t = linspace(-1, 1, 33);
  const auto fine_z = linspace(0, 1, 17);
  const auto fine = interpolate_to_axes(coarse, fine_t, fine_z);
  const auto expect = linear_field(fine_t, fine_z);
  for (std::size_t k = 0; k < fine.values.size(); ++k)
    CHECK(std::abs(fine.values[k] - expect.values[k]) < 1e-13);
}

TEST_CASE("mean squared field error") {
  const auto a = linear_field(linspace(-1, 1, 16), linspace(0, 1, 8));

  SECTION("identical fields give zero") {
    CHECK(mse_vs_oracle(a, a) == 0.0);
    CHECK(amplitude_mse(a, a) == 0.0);
  }

  SECTION("a constant complex offset gives its squared modulus") {
    Field2D b = a;
    const Complex d(0.3, -0.4);
    for (auto& v : b.values) v += d;
    CHECK(mse_vs_oracle(a, b) == Catch::Approx(std::norm(d)).epsilon(1e-12));
  }

  SECTION("symmetry in the arguments") {
    Field2D b = a;
    for (std::size_t k = 0; k < b.values.size(); ++k) b.values[k] *= (k % 3 == 0 ? 1.1 : 0.9);
    CHECK(mse_vs_oracle(a, b) == mse_vs_oracle(b, a));
    CHECK(amplitude_mse(a, b) == amplitude_mse(b, a));
    CHECK(mse_vs_oracle(a, b) > 0.0);
  }

  SECTION("axis mismatch is rejected") {
    const auto b = linear_field(linspace(-1, 1, 16), linspace(0, 1, 9));
    CHECK_THROWS_AS(mse_vs_oracle(a, b), std::invalid_argument);
    const auto c = linear_field(linspace(-0.9, 1, 16), linspace(0, 1, 8));
    CHECK_THROWS_AS(mse_vs_oracle(a, c), std::invalid_argument);
  }
}

TEST_CASE("mac counts") {
  ComplexityModel model;  // stock configuration

  SECTION("network share against the per-condition model is exactly N_b / N") {
    const auto mac = mac_counts(model);
    CHECK(mac.ratio_pf_f_networks() == model.n_basis / model.n_conditions);
    CHECK(mac.ratio_pf_f_networks() == 0.01);
    CHECK(mac.ratio_pf_f() == Catch::Approx(0.01).epsilon(1e-4));
  }

  SECTION("degenerate parity at N_b = N") {
    ComplexityModel m = model;
    m.n_basis = m.n_conditions;
    CHECK(mac_counts(m).ratio_pf_f_networks() == 1.0);
  }

  SECTION("split-step ratio lands near the reported figure") {
    const auto mac = mac_counts(model);
    const double ratio = mac.ratio_pf_ssfm();
    CHECK(ratio < 3.0 * 1.13e-4);
    CHECK(ratio > 1.13e-4 / 3.0);
  }

  SECTION("c_pf is exactly linear in the basis count") {
    ComplexityModel m2 = model;
    m2.n_basis = 2.0 * model.n_basis;
    CHECK(mac_counts(m2).c_pf == 2.0 * mac_counts(model).c_pf);
  }

  SECTION("c_f is exactly linear in the evaluation-point total") {
    ComplexityModel m2 = model;
    m2.n_conditions = 2.0 * model.n_conditions;  // doubles T = N M_t M_c
    CHECK(m2.total_points() == 2.0 * model.total_points());
    CHECK(mac_counts(m2).c_f == 2.0 * mac_counts(model).c_f);
  }

  SECTION("degenerate geometry is rejected") {
    ComplexityModel bad = model;
    bad.l_u = 2.0 * bad.l_max;
    CHECK_THROWS_AS(mac_counts(bad), std::invalid_argument);
    bad = model;
    bad.neurons = 0;
    CHECK_THROWS_AS(mac_counts(bad), std::invalid_argument);
  }
}

TEST_CASE("timing harness") {
  SECTION("single repetition returns one sample") {
    const auto rows = timing_harness({{"noop", [] {}}}, 1);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].stage == "noop");
    CHECK(rows[0].samples.size() == 1);
    CHECK(rows[0].median_seconds >= 0.0);
  }

  SECTION("median of repeated runs") {
    volatile double sink = 0.0;
    const auto rows = timing_harness({{"spin", [&] {
                                         for (int i = 0; i < 100000; ++i) sink = sink + 1.0;
                                       }}},
                                     5);
    CHECK(rows[0].samples.size() == 5);
    CHECK(rows[0].median_seconds > 0.0);
  }

  SECTION("zero repetitions rejected") {
    CHECK_THROWS_AS(timing_harness({}, 0), std::invalid_argument);
  }
}

TEST_CASE("loss statistics over a fitted lattice") {
  ParameterSpace space;
  space.alpha = {0.0, 2e-5, 2};
  space.beta2 = {-1e-26, 1e-26, 2};
  space.n2 = {5e-21, 2.6e-20, 2};
  const auto lattice = parameter_lattice(space);

  GreedyReport greedy;
  const std::vector<double> losses{1e-3, 5e-4, 2e-2, 7e-4, 1e-4, 3e-3, 9e-4, 6e-4};
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    CoefficientSet fit;
    fit.c = {1.0};
    fit.target = lattice[k];
    fit.loss = losses[k];
    greedy.coefficients[k] = fit;
  }

  EigenBasis basis;  // only the consumed indices matter here
  basis.lattice_indices = {0, 5};

  const auto report = loss_statistics(greedy, basis, space, PulseSpec{});
  REQUIRE(report.entries.size() == 8);

  double mn = losses[0], mx = losses[0], sum = 0.0;
  for (double l : losses) {
    mn = std::min(mn, l);
    mx = std::max(mx, l);
    sum += l;
  }
  CHECK(report.mean_loss == Catch::Approx(sum / 8.0).epsilon(1e-15));
  CHECK(report.mean_loss >= mn);
  CHECK(report.mean_loss <= mx);
  CHECK(report.log10_mean_loss == Catch::Approx(std::log10(sum / 8.0)).epsilon(1e-12));
  CHECK(report.worst_index == 2);
  // every corner of a 2x2x2 lattice is a boundary point
  CHECK(report.boundary_fraction == 1.0);
  CHECK(report.entries[0].is_eigen);
  CHECK_FALSE(report.entries[1].is_eigen);
}

TEST_CASE("oracle evaluation fills amplitude errors") {
  // a zero-field basis: the amplitude error must equal the mean |psi|^2 of
  // the oracle field itself
  ParameterSpace space;
  space.alpha = {0.0, 0.0, 1};
  space.beta2 = {6.67e-27, 6.67e-27, 1};
  space.n2 = {8.84e-21, 8.84e-21, 1};
  const Grid grid{32, 9, 1e5};
  const PulseSpec pulse;

  EigenSnapshot zero;
  zero.params = parameter_lattice(space)[0];
  zero.coeffs = derive_coefficients(zero.params, pulse, grid);
  zero.nt = grid.t_points;
  zero.nz = grid.zeta_points;
  for (auto* arr : {&zero.psi_r, &zero.psi_i, &zero.dz_r, &zero.dz_i, &zero.dtt_r, &zero.dtt_i,
                    &zero.dttt_r, &zero.dttt_i})
    arr->assign(zero.points(), 0.0);

  EigenBasis basis;
  basis.append(zero, 0);

  GreedyReport greedy;
  CoefficientSet fit;
  fit.c = {0.0};
  fit.target = zero.params;
  fit.loss = 1.0;
  greedy.coefficients[0] = fit;

  auto report = loss_statistics(greedy, basis, space, pulse);
  const SsfmConfig ssfm_cfg{100, 1, 256};
  evaluate_against_oracle(report, basis, greedy, space, pulse, grid, ssfm_cfg);

  const auto coeffs = derive_coefficients(zero.params, pulse, grid);
  const auto oracle = propagate_pulse(pulse, coeffs, grid, ssfm_cfg);
  double expect = 0.0;
  for (const auto& v : oracle.values) expect += std::norm(v);
  expect /= double(oracle.values.size());

  REQUIRE(report.entries.size() == 1);
  CHECK(report.entries[0].amp_mse == Catch::Approx(expect).epsilon(1e-12));
  CHECK(report.mean_amp_mse == Catch::Approx(expect).epsilon(1e-12));
}

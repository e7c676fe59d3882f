#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fd_oracle.hpp"
#include "parafiber/mlp.hpp"

using namespace parafiber;

TEST_CASE("initialization is deterministic in the seed") {
  const auto a = init_model({2, 10, 10, 2}, 1234);
  const auto b = init_model({2, 10, 10, 2}, 1234);
  REQUIRE(a.params.size() == b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i] == b.params[i]);

  const auto c = init_model({2, 10, 10, 2}, 1235);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params.size(); ++i) any_diff |= (a.params[i] != c.params[i]);
  CHECK(any_diff);
}

TEST_CASE("parameter count for [2,3,2] is 17") {
  const auto m = init_model({2, 3, 2}, 1);
  CHECK(m.param_count() == 17);  // 2*3+3 + 3*2+2
  CHECK(m.params.size() == 17);
}

TEST_CASE("weights respect the xavier bound, biases start at zero") {
  const auto m = init_model({2, 40, 40, 2}, 77);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const double bound = std::sqrt(6.0 / double(m.layer_sizes[l] + m.layer_sizes[l + 1]));
    const double* w = m.params.data() + m.weight_offset(l);
    for (std::size_t k = 0; k < m.layer_sizes[l] * m.layer_sizes[l + 1]; ++k) {
      CHECK(std::abs(w[k]) <= bound);
    }
    const double* b = m.params.data() + m.bias_offset(l);
    for (std::size_t k = 0; k < m.layer_sizes[l + 1]; ++k) CHECK(b[k] == 0.0);
  }
}

TEST_CASE("degenerate layer shapes are rejected") {
  CHECK_THROWS_AS(init_model({2, 0, 2}, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_model({2}, 1), std::invalid_argument);
  auto m = init_model({3, 4, 2}, 1);
  CHECK_THROWS_AS(m.validate_pinn_shape(), std::invalid_argument);
  m = init_model({2, 4, 2}, 1);
  m.params.pop_back();
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("zero parameters give identically zero outputs") {
  auto m = init_model({2, 5, 5, 2}, 3);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  const auto [r, i] = network_jets(m, 0.37, 0.81);
  for (int s = 0; s < 5; ++s) {
    CHECK(r.slot(s) == 0.0);
    CHECK(i.slot(s) == 0.0);
  }
}

TEST_CASE("a single linear layer exposes its weights as derivatives") {
  auto m = init_model({2, 2}, 5);
  // params: W = [[w00 w01], [w10 w11]] then biases
  m.params = {1.5, -0.25, 0.75, 2.0, 0.1, -0.2};
  const auto [r, i] = network_jets(m, 0.3, 0.6);
  CHECK(r.v == Catch::Approx(1.5 * 0.3 - 0.25 * 0.6 + 0.1).epsilon(1e-15));
  CHECK(r.dt == 1.5);
  CHECK(r.dz == -0.25);
  CHECK(i.dt == 0.75);
  CHECK(i.dz == 2.0);
  CHECK(r.dtt == 0.0);
  CHECK(r.dttt == 0.0);
}

TEST_CASE("jets agree with finite differences of the plain forward pass") {
  const auto m = init_model({2, 20, 20, 2}, 2024);
  std::mt19937_64 rng(31);
  auto u = [&] { return double(rng() >> 11) * 0x1.0p-53; };

  for (int k = 0; k < 10; ++k) {
    const double t = 2.0 * u() - 1.0;
    const double z = u();
    const auto [jr, ji] = network_jets(m, t, z);

    auto fr_t = [&](double s) { return network_values(m, s, z).first; };
    auto fi_t = [&](double s) { return network_values(m, s, z).second; };
    auto fr_z = [&](double s) { return network_values(m, t, s).first; };
    auto fi_z = [&](double s) { return network_values(m, t, s).second; };

    CHECK(fd::rel_err(jr.v, network_values(m, t, z).first) < 1e-13);
    CHECK(fd::rel_err(jr.dt, fd::d1(fr_t, t)) < 1e-4);
    CHECK(fd::rel_err(jr.dtt, fd::d2(fr_t, t)) < 1e-4);
    CHECK(fd::rel_err(jr.dttt, fd::d3(fr_t, t)) < 1e-4);
    CHECK(fd::rel_err(jr.dz, fd::d1(fr_z, z)) < 1e-4);
    CHECK(fd::rel_err(ji.dt, fd::d1(fi_t, t)) < 1e-4);
    CHECK(fd::rel_err(ji.dtt, fd::d2(fi_t, t)) < 1e-4);
    CHECK(fd::rel_err(ji.dttt, fd::d3(fi_t, t)) < 1e-4);
    CHECK(fd::rel_err(ji.dz, fd::d1(fi_z, z)) < 1e-4);
  }
}

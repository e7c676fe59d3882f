#pragma once

// Fully connected network mapping (t, zeta) -> (psi_R, psi_I): tanh hidden
// layers, linear output layer. Parameters live in one flat vector, per layer
// the weight matrix row-major [out][in] followed by the bias vector; that
// layout is shared by the tape builder, the optimizer and the model file.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "parafiber/jet.hpp"
#include "parafiber/tape.hpp"

namespace parafiber {

struct MlpModel {
  std::vector<std::size_t> layer_sizes;  // e.g. {2, 100, 100, 100, 100, 2}
  std::vector<double> params;
  std::uint64_t seed = 0;

  std::size_t num_layers() const { return layer_sizes.empty() ? 0 : layer_sizes.size() - 1; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
      n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return n;
  }

  std::size_t weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return off;
  }

  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + layer_sizes[layer] * layer_sizes[layer + 1];
  }

  void validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("MlpModel: need at least two layers");
    for (std::size_t w : layer_sizes)
      if (w == 0) throw std::invalid_argument("MlpModel: zero-width layer");
    if (params.size() != param_count())
      throw std::invalid_argument("MlpModel: parameter vector does not match layer sizes");
  }

  void validate_pinn_shape() const {
    validate();
    if (layer_sizes.front() != 2 || layer_sizes.back() != 2)
      throw std::invalid_argument("MlpModel: fiber model needs 2 inputs (t, zeta) and 2 outputs (Re, Im)");
  }
};

namespace detail {

/// Uniform double in [0, 1) from the standardized mt19937_64 stream, so
/// initialization is bit-identical across platforms.
inline double uniform01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
inline MlpModel init_model(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
  MlpModel m;
  m.layer_sizes = std::move(layer_sizes);
  m.seed = seed;
  if (m.layer_sizes.size() < 2) throw std::invalid_argument("init_model: need at least two layers");
  for (std::size_t w : m.layer_sizes)
    if (w == 0) throw std::invalid_argument("init_model: zero-width layer");

  m.params.assign(m.param_count(), 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const std::size_t fan_in = m.layer_sizes[l];
    const std::size_t fan_out = m.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    double* w = m.params.data() + m.weight_offset(l);
    for (std::size_t k = 0; k < fan_in * fan_out; ++k)
      w[k] = bound * (2.0 * detail::uniform01(rng) - 1.0);
    // biases stay zero
  }
  return m;
}

/// Forward pass with jets seeded on the inputs; returns (psi_R, psi_I) jets
/// carrying every derivative the residual needs.
inline std::pair<Jet, Jet> network_jets(const MlpModel& m, double t, double zeta) {
  m.validate_pinn_shape();
  std::vector<Jet> cur{Jet::time_input(t), Jet::zeta_input(zeta)};
  std::vector<Jet> next;
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const std::size_t in = m.layer_sizes[l];
    const std::size_t out = m.layer_sizes[l + 1];
    const bool hidden = l + 2 < m.layer_sizes.size();
    const double* w = m.params.data() + m.weight_offset(l);
    const double* b = m.params.data() + m.bias_offset(l);
    next.assign(out, Jet{});
    for (std::size_t j = 0; j < out; ++j) {
      Jet acc = Jet::constant(b[j]);
      const double* wj = w + j * in;
      for (std::size_t i = 0; i < in; ++i) acc += wj[i] * cur[i];
      next[j] = hidden ? jet_tanh(acc) : acc;
    }
    cur.swap(next);
  }
  return {cur[0], cur[1]};
}

/// Plain double forward pass (no derivatives); the finite-difference oracles
/// in the test suite probe the jets against this independent path.
inline std::pair<double, double> network_values(const MlpModel& m, double t, double zeta) {
  m.validate_pinn_shape();
  std::vector<double> cur{t, zeta};
  std::vector<double> next;
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const std::size_t in = m.layer_sizes[l];
    const std::size_t out = m.layer_sizes[l + 1];
    const bool hidden = l + 2 < m.layer_sizes.size();
    const double* w = m.params.data() + m.weight_offset(l);
    const double* b = m.params.data() + m.bias_offset(l);
    next.assign(out, 0.0);
    for (std::size_t j = 0; j < out; ++j) {
      double acc = b[j];
      const double* wj = w + j * in;
      for (std::size_t i = 0; i < in; ++i) acc += wj[i] * cur[i];
      next[j] = hidden ? std::tanh(acc) : acc;
    }
    cur.swap(next);
  }
  return {cur[0], cur[1]};
}

/// Network tape program: inputs (t, zeta), outputs the two final-layer nodes.
struct NetworkTape {
  Tape::NodeId input_t = -1;
  Tape::NodeId input_zeta = -1;
  Tape::NodeId out_r = -1;
  Tape::NodeId out_i = -1;
};

inline NetworkTape build_network_tape(Tape& tape, const std::vector<std::size_t>& layer_sizes) {
  if (layer_sizes.size() < 2 || layer_sizes.front() != 2 || layer_sizes.back() != 2)
    throw std::invalid_argument("build_network_tape: layer sizes must start and end with 2");

  NetworkTape net;
  net.input_t = tape.input();
  net.input_zeta = tape.input();

  MlpModel offsets;  // reuse the offset arithmetic
  offsets.layer_sizes = layer_sizes;

  std::vector<Tape::NodeId> cur{net.input_t, net.input_zeta};
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l];
    const std::size_t out = layer_sizes[l + 1];
    const bool hidden = l + 2 < layer_sizes.size();
    const auto w0 = std::int32_t(offsets.weight_offset(l));
    const auto b0 = std::int32_t(offsets.bias_offset(l));
    std::vector<Tape::NodeId> next(out);
    for (std::size_t j = 0; j < out; ++j) {
      Tape::NodeId z = tape.affine(cur, w0 + std::int32_t(j * in), b0 + std::int32_t(j));
      next[j] = hidden ? tape.tanh(z) : z;
    }
    cur.swap(next);
  }
  net.out_r = cur[0];
  net.out_i = cur[1];
  return net;
}

}  // namespace parafiber

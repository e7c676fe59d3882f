#pragma once

// File formats and configuration.
//
// Field binary (.f2d): uint32 nt, uint32 nz, then nt*nz complex samples as
// little-endian float64 (re, im) pairs, row-major with t fastest.
// Model file (.mlp): uint32 layer count, uint32 sizes[], uint64 seed,
// uint32 activation tag (0 = tanh hidden / linear output), then the flat
// parameter vector as little-endian float64 in layer order, weights row-major
// before biases.
// CSV exports print doubles with 17 significant digits so parsing them back
// reproduces the in-memory values exactly.
// The run configuration file is flat key/value sections in INI style.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "parafiber/mlp.hpp"
#include "parafiber/physics.hpp"
#include "parafiber/pinn.hpp"
#include "parafiber/rbm.hpp"
#include "parafiber/ssfm.hpp"

namespace parafiber::io {

inline std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void require_stream(const std::ios& s, const std::string& path, const char* what) {
  if (!s) throw std::runtime_error(std::string(what) + ": " + path);
}

// ---------------------------------------------------------------------------
// field binary and CSV

inline void save_field(const Field2D& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require_stream(out, path, "cannot open for writing");
  const std::uint32_t nt = std::uint32_t(f.nt());
  const std::uint32_t nz = std::uint32_t(f.nz());
  out.write(reinterpret_cast<const char*>(&nt), sizeof nt);
  out.write(reinterpret_cast<const char*>(&nz), sizeof nz);
  for (const Complex& v : f.values) {
    const double re = v.real(), im = v.imag();
    out.write(reinterpret_cast<const char*>(&re), sizeof re);
    out.write(reinterpret_cast<const char*>(&im), sizeof im);
  }
  require_stream(out, path, "write failed");
}

/// Loads the sample block of a field file; the axes are not stored in the
/// binary and must be supplied by the caller (they are implied by the grid).
inline Field2D load_field(const std::string& path, std::vector<double> t_axis = {},
                          std::vector<double> zeta_axis = {}) {
  std::ifstream in(path, std::ios::binary);
  require_stream(in, path, "cannot open");
  std::uint32_t nt = 0, nz = 0;
  in.read(reinterpret_cast<char*>(&nt), sizeof nt);
  in.read(reinterpret_cast<char*>(&nz), sizeof nz);
  require_stream(in, path, "truncated header");
  if (t_axis.empty()) {
    t_axis.resize(nt);
    for (std::uint32_t i = 0; i < nt; ++i) t_axis[i] = double(i);
  }
  if (zeta_axis.empty()) {
    zeta_axis.resize(nz);
    for (std::uint32_t j = 0; j < nz; ++j) zeta_axis[j] = double(j);
  }
  if (t_axis.size() != nt || zeta_axis.size() != nz)
    throw std::runtime_error("load_field: axes do not match the stored dimensions");
  Field2D f(std::move(t_axis), std::move(zeta_axis));
  for (Complex& v : f.values) {
    double re = 0, im = 0;
    in.read(reinterpret_cast<char*>(&re), sizeof re);
    in.read(reinterpret_cast<char*>(&im), sizeof im);
    v = Complex(re, im);
  }
  require_stream(in, path, "truncated data");
  return f;
}

inline void save_field_csv(const Field2D& f, const std::string& path) {
  std::ofstream out(path);
  require_stream(out, path, "cannot open for writing");
  out << "t,zeta,re,im,abs\n";
  for (std::size_t j = 0; j < f.nz(); ++j)
    for (std::size_t i = 0; i < f.nt(); ++i) {
      const Complex& v = f.at(i, j);
      out << g17(f.t_axis[i]) << ',' << g17(f.zeta_axis[j]) << ',' << g17(v.real()) << ','
          << g17(v.imag()) << ',' << g17(std::abs(v)) << '\n';
    }
  require_stream(out, path, "write failed");
}

// ---------------------------------------------------------------------------
// model file

inline void save_model(const MlpModel& m, const std::string& path) {
  m.validate();
  std::ofstream out(path, std::ios::binary);
  require_stream(out, path, "cannot open for writing");
  const std::uint32_t n_layers = std::uint32_t(m.layer_sizes.size());
  out.write(reinterpret_cast<const char*>(&n_layers), sizeof n_layers);
  for (std::size_t s : m.layer_sizes) {
    const std::uint32_t w = std::uint32_t(s);
    out.write(reinterpret_cast<const char*>(&w), sizeof w);
  }
  out.write(reinterpret_cast<const char*>(&m.seed), sizeof m.seed);
  const std::uint32_t activation = 0;  // tanh hidden, linear output
  out.write(reinterpret_cast<const char*>(&activation), sizeof activation);
  out.write(reinterpret_cast<const char*>(m.params.data()),
            std::streamsize(m.params.size() * sizeof(double)));
  require_stream(out, path, "write failed");
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require_stream(in, path, "cannot open");
  std::uint32_t n_layers = 0;
  in.read(reinterpret_cast<char*>(&n_layers), sizeof n_layers);
  require_stream(in, path, "truncated header");
  if (n_layers < 2 || n_layers > 64) throw std::runtime_error("load_model: bad layer count");
  MlpModel m;
  m.layer_sizes.resize(n_layers);
  for (auto& s : m.layer_sizes) {
    std::uint32_t w = 0;
    in.read(reinterpret_cast<char*>(&w), sizeof w);
    s = w;
  }
  in.read(reinterpret_cast<char*>(&m.seed), sizeof m.seed);
  std::uint32_t activation = 1;
  in.read(reinterpret_cast<char*>(&activation), sizeof activation);
  if (activation != 0) throw std::runtime_error("load_model: unknown activation tag");
  m.params.resize(m.param_count());
  in.read(reinterpret_cast<char*>(m.params.data()),
          std::streamsize(m.params.size() * sizeof(double)));
  require_stream(in, path, "truncated parameters");
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// CSV tables

inline void save_lattice_csv(const std::vector<FiberParams>& lattice, const std::string& path) {
  std::ofstream out(path);
  require_stream(out, path, "cannot open for writing");
  out << "index,alpha,beta2,beta3,n2\n";
  for (std::size_t k = 0; k < lattice.size(); ++k)
    out << k << ',' << g17(lattice[k].alpha) << ',' << g17(lattice[k].beta2) << ','
        << g17(lattice[k].beta3) << ',' << g17(lattice[k].n2) << '\n';
  require_stream(out, path, "write failed");
}

inline void save_history_csv(const std::vector<LossRecord>& history, const std::string& path) {
  std::ofstream out(path);
  require_stream(out, path, "cannot open for writing");
  out << "epoch,loss\n";
  for (const auto& h : history) out << h.epoch << ',' << g17(h.loss) << '\n';
  require_stream(out, path, "write failed");
}

inline void save_coefficients_csv(const std::map<std::size_t, CoefficientSet>& map,
                                  std::size_t basis_size, const std::string& path) {
  std::ofstream out(path);
  require_stream(out, path, "cannot open for writing");
  out << "lattice_index";
  for (std::size_t m = 1; m <= basis_size; ++m) out << ",c_" << m;
  out << ",loss\n";
  for (const auto& [idx, fit] : map) {
    out << idx;
    for (std::size_t m = 0; m < basis_size; ++m)
      out << ',' << g17(m < fit.c.size() ? fit.c[m] : 0.0);
    out << ',' << g17(fit.loss) << '\n';
  }
  require_stream(out, path, "write failed");
}

inline std::map<std::size_t, CoefficientSet> load_coefficients_csv(const std::string& path) {
  std::ifstream in(path);
  require_stream(in, path, "cannot open");
  std::map<std::size_t, CoefficientSet> map;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) throw std::runtime_error("coefficients csv: malformed row");
    CoefficientSet fit;
    const std::size_t idx = std::stoul(cells.front());
    for (std::size_t k = 1; k + 1 < cells.size(); ++k) fit.c.push_back(std::stod(cells[k]));
    fit.loss = std::stod(cells.back());
    map[idx] = fit;
  }
  return map;
}

inline void save_rounds_csv(const GreedyReport& report, const std::string& path) {
  std::ofstream out(path);
  require_stream(out, path, "cannot open for writing");
  out << "round,basis_size,chosen_index,worst_loss\n";
  for (std::size_t r = 0; r < report.rounds.size(); ++r) {
    const auto& round = report.rounds[r];
    out << (r + 1) << ',' << round.basis_size << ',' << round.chosen_lattice_index << ','
        << g17(round.worst_loss) << '\n';
  }
  require_stream(out, path, "write failed");
}

inline void save_candidate_table_csv(const GreedyReport& report, const std::string& path) {
  std::ofstream out(path);
  require_stream(out, path, "cannot open for writing");
  out << "basis_size,lattice_index,loss\n";
  for (const auto& round : report.rounds)
    for (const auto& [idx, loss] : round.candidate_losses)
      out << round.basis_size << ',' << idx << ',' << g17(loss) << '\n';
  require_stream(out, path, "write failed");
}

struct ErrorRow {
  std::size_t index;
  double alpha, beta2, n2, loss, amp_mse;
};

inline void save_error_csv(const std::vector<ErrorRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require_stream(out, path, "cannot open for writing");
  out << "index,alpha,beta2,n2,loss,log10_loss,amplitude_mse\n";
  for (const auto& r : rows)
    out << r.index << ',' << g17(r.alpha) << ',' << g17(r.beta2) << ',' << g17(r.n2) << ','
        << g17(r.loss) << ',' << g17(std::log10(r.loss)) << ',' << g17(r.amp_mse) << '\n';
  require_stream(out, path, "write failed");
}

inline void save_scatter_csv(const std::vector<ErrorRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require_stream(out, path, "cannot open for writing");
  out << "alpha,beta2,n2,log10_loss\n";
  for (const auto& r : rows)
    out << g17(r.alpha) << ',' << g17(r.beta2) << ',' << g17(r.n2) << ','
        << g17(std::log10(r.loss)) << '\n';
  require_stream(out, path, "write failed");
}

// ---------------------------------------------------------------------------
// basis persistence: a directory holding one manifest plus four field files
// per snapshot (psi, dzeta, dtt, dttt), each in the field binary layout with
// the real part of the pair holding the R-array and the imaginary the I-array.

namespace detail {

inline Field2D arrays_as_field(const std::vector<double>& re, const std::vector<double>& im,
                               std::size_t nt, std::size_t nz) {
  std::vector<double> ta(nt), za(nz);
  for (std::size_t i = 0; i < nt; ++i) ta[i] = double(i);
  for (std::size_t j = 0; j < nz; ++j) za[j] = double(j);
  Field2D f(std::move(ta), std::move(za));
  for (std::size_t k = 0; k < re.size(); ++k) f.values[k] = Complex(re[k], im[k]);
  return f;
}

inline void field_to_arrays(const Field2D& f, std::vector<double>& re, std::vector<double>& im) {
  re.resize(f.values.size());
  im.resize(f.values.size());
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    re[k] = f.values[k].real();
    im[k] = f.values[k].imag();
  }
}

inline nlohmann::json params_to_json(const FiberParams& p) {
  return {{"alpha", p.alpha}, {"beta2", p.beta2}, {"beta3", p.beta3},
          {"n2", p.n2},       {"a_eff", p.a_eff}, {"lambda0", p.lambda0}};
}

inline FiberParams params_from_json(const nlohmann::json& j) {
  FiberParams p;
  p.alpha = j.at("alpha");
  p.beta2 = j.at("beta2");
  p.beta3 = j.at("beta3");
  p.n2 = j.at("n2");
  p.a_eff = j.at("a_eff");
  p.lambda0 = j.at("lambda0");
  return p;
}

}  // namespace detail

inline void save_basis(const EigenBasis& basis, const Grid& grid, const PulseSpec& pulse,
                       const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["grid"] = {{"t_points", grid.t_points}, {"zeta_points", grid.zeta_points},
                      {"l_max", grid.l_max}};
  manifest["pulse"] = {{"shape", to_string(pulse.shape)},
                       {"order", pulse.order},
                       {"t0", pulse.t0},
                       {"p0", pulse.p0},
                       {"t_max", pulse.t_max},
                       {"peak_offsets", pulse.peak_offsets}};
  manifest["snapshots"] = nlohmann::json::array();

  for (std::size_t m = 0; m < basis.size(); ++m) {
    const auto& s = basis.snapshots[m];
    char prefix[32];
    std::snprintf(prefix, sizeof(prefix), "s%03zu", m);
    const std::string base = std::string(prefix);
    save_field(detail::arrays_as_field(s.psi_r, s.psi_i, s.nt, s.nz), dir + "/" + base + "_psi.f2d");
    save_field(detail::arrays_as_field(s.dz_r, s.dz_i, s.nt, s.nz), dir + "/" + base + "_dzeta.f2d");
    save_field(detail::arrays_as_field(s.dtt_r, s.dtt_i, s.nt, s.nz), dir + "/" + base + "_dtt.f2d");
    save_field(detail::arrays_as_field(s.dttt_r, s.dttt_i, s.nt, s.nz),
               dir + "/" + base + "_dttt.f2d");
    manifest["snapshots"].push_back({{"file_prefix", base},
                                     {"lattice_index", basis.lattice_indices[m]},
                                     {"params", detail::params_to_json(s.params)},
                                     {"final_loss", s.final_loss},
                                     {"epochs", s.epochs}});
  }
  std::ofstream out(dir + "/manifest.json");
  require_stream(out, dir, "cannot write manifest");
  out << manifest.dump(2) << '\n';
}

inline std::pair<EigenBasis, std::pair<Grid, PulseSpec>> load_basis(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  require_stream(in, dir + "/manifest.json", "cannot open manifest");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("corrupt basis manifest: ") + e.what());
  }

  Grid grid;
  PulseSpec pulse;
  try {
    grid.t_points = manifest.at("grid").at("t_points");
    grid.zeta_points = manifest.at("grid").at("zeta_points");
    grid.l_max = manifest.at("grid").at("l_max");
    pulse.shape = pulse_shape_from_string(manifest.at("pulse").at("shape"));
    pulse.order = manifest.at("pulse").at("order");
    pulse.t0 = manifest.at("pulse").at("t0");
    pulse.p0 = manifest.at("pulse").at("p0");
    pulse.t_max = manifest.at("pulse").at("t_max");
    pulse.peak_offsets = manifest.at("pulse").at("peak_offsets").get<std::vector<double>>();

    EigenBasis basis;
    for (const auto& snap : manifest.at("snapshots")) {
      const std::string base = snap.at("file_prefix");
      EigenSnapshot s;
      s.params = detail::params_from_json(snap.at("params"));
      s.coeffs = derive_coefficients(s.params, pulse, grid);
      s.final_loss = snap.at("final_loss");
      s.epochs = snap.at("epochs");
      s.nt = grid.t_points;
      s.nz = grid.zeta_points;
      const auto psi = load_field(dir + "/" + base + "_psi.f2d");
      const auto dz = load_field(dir + "/" + base + "_dzeta.f2d");
      const auto dtt = load_field(dir + "/" + base + "_dtt.f2d");
      const auto dttt = load_field(dir + "/" + base + "_dttt.f2d");
      if (psi.nt() != s.nt || psi.nz() != s.nz)
        throw std::runtime_error("basis snapshot does not match the manifest grid");
      detail::field_to_arrays(psi, s.psi_r, s.psi_i);
      detail::field_to_arrays(dz, s.dz_r, s.dz_i);
      detail::field_to_arrays(dtt, s.dtt_r, s.dtt_i);
      detail::field_to_arrays(dttt, s.dttt_r, s.dttt_i);
      basis.append(std::move(s), snap.at("lattice_index"));
    }
    return {std::move(basis), {grid, pulse}};
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("corrupt basis manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// flat key/value configuration sections

class IniConfig {
 public:
  IniConfig() = default;

  static IniConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    require_stream(in, path, "cannot open config");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  static IniConfig parse(const std::string& text, const std::string& origin = "<string>") {
    IniConfig cfg;
    std::string section = "";
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string trimmed = trim(strip_comment(line));
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": unterminated section");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[section + "." + key] = value;
    }
    return cfg;
  }

  bool has(const std::string& section, const std::string& key) const {
    return values_.count(section + "." + key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const auto it = values_.find(section + "." + key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    const auto it = values_.find(section + "." + key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw std::runtime_error("config value " + section + "." + key + " is not a number: " +
                               it->second);
    }
  }

  std::size_t get_size(const std::string& section, const std::string& key,
                       std::size_t fallback) const {
    const auto it = values_.find(section + "." + key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoul(it->second);
    } catch (const std::exception&) {
      throw std::runtime_error("config value " + section + "." + key + " is not a count: " +
                               it->second);
    }
  }

  std::vector<double> get_list(const std::string& section, const std::string& key,
                               std::vector<double> fallback) const {
    const auto it = values_.find(section + "." + key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string t = trim(cell);
      if (t.empty()) continue;
      try {
        out.push_back(std::stod(t));
      } catch (const std::exception&) {
        throw std::runtime_error("config value " + section + "." + key + " has a bad entry: " + t);
      }
    }
    return out;
  }

 private:
  static std::string strip_comment(const std::string& s) {
    const auto pos = s.find_first_of("#;");
    return pos == std::string::npos ? s : s.substr(0, pos);
  }
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// configuration -> domain objects (defaults reproduce the stock setup)

inline Grid load_grid(const IniConfig& ini) {
  Grid g;
  g.t_points = ini.get_size("grid", "t_points", 100);
  g.zeta_points = ini.get_size("grid", "zeta_points", 101);
  g.l_max = ini.get_double("grid", "l_max", 1e5);
  g.validate();
  return g;
}

inline PulseSpec load_pulse(const IniConfig& ini) {
  PulseSpec p;
  p.shape = pulse_shape_from_string(ini.get_string("pulse", "shape", "gaussian"));
  p.order = int(ini.get_size("pulse", "order", 4));
  p.t0 = ini.get_double("pulse", "t0", 1e-9 / std::sqrt(10.0));
  p.p0 = ini.get_double("pulse", "p0", 1e-3);
  p.t_max = ini.get_double("pulse", "t_max", 5e-9 / std::sqrt(10.0));
  p.peak_offsets = ini.get_list("pulse", "peak_offsets", {0.0});
  p.validate();
  return p;
}

inline ParameterSpace load_space(const IniConfig& ini) {
  ParameterSpace s;
  auto axis = [&](const char* key, AxisSpec fallback) {
    const auto v = ini.get_list("space", key, {fallback.lo, fallback.hi, double(fallback.points)});
    if (v.size() != 3) throw std::runtime_error(std::string("space.") + key +
                                                " needs lo, hi, points");
    if (v[2] < 1.0) throw std::runtime_error(std::string("space.") + key + " needs points >= 1");
    return AxisSpec{v[0], v[1], std::size_t(v[2])};
  };
  s.alpha = axis("alpha", s.alpha);
  s.beta2 = axis("beta2", s.beta2);
  s.n2 = axis("n2", s.n2);
  s.beta3 = ini.get_double("space", "beta3", s.beta3);
  s.a_eff = ini.get_double("space", "a_eff", s.a_eff);
  s.lambda0 = ini.get_double("space", "lambda0", s.lambda0);
  s.validate();
  return s;
}

inline SsfmConfig load_ssfm(const IniConfig& ini) {
  SsfmConfig c;
  c.steps_per_unit_zeta = ini.get_size("ssfm", "steps_per_unit_zeta", 1000);
  c.record_every = ini.get_size("ssfm", "record_every", 1);
  c.time_points = ini.get_size("ssfm", "time_points", 1024);
  return c;
}

inline std::vector<std::size_t> load_layers(const IniConfig& ini) {
  const auto v = ini.get_list("train", "layers", {2, 100, 100, 100, 100, 2});
  std::vector<std::size_t> layers;
  for (double x : v) layers.push_back(std::size_t(x));
  return layers;
}

inline TrainConfig load_train(const IniConfig& ini, unsigned threads) {
  TrainConfig c;
  c.max_epochs = ini.get_size("train", "max_epochs", 60000);
  c.stop_loss = ini.get_double("train", "stop_loss", 1e-5);
  c.adam.learning_rate = ini.get_double("train", "learning_rate", 1e-3);
  c.adam.beta1 = ini.get_double("train", "beta1", 0.9);
  c.adam.beta2 = ini.get_double("train", "beta2", 0.999);
  c.adam.epsilon = ini.get_double("train", "epsilon", 1e-8);
  c.collocation_points = ini.get_size("train", "collocation_points", 0);
  c.log_every = ini.get_size("train", "log_every", 0);
  c.threads = threads;
  c.validate();
  return c;
}

inline GreedyConfig load_greedy(const IniConfig& ini, std::uint64_t seed, unsigned threads) {
  GreedyConfig c;
  c.n_basis = ini.get_size("rbm", "n_basis", 10);
  if (ini.has("rbm", "first_index")) c.first_index = ini.get_size("rbm", "first_index", 0);
  c.fit.learning_rate = ini.get_double("rbm", "fit_learning_rate", 1e-2);
  c.fit.max_iterations = ini.get_size("rbm", "fit_max_iterations", 2000);
  c.fit.gradient_tolerance = ini.get_double("rbm", "fit_gradient_tolerance", 1e-8);
  c.fit.warm_start = ini.get_size("rbm", "warm_start", 1) != 0;
  c.seed = seed;
  c.threads = threads;
  return c;
}

}  // namespace parafiber::io

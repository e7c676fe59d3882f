// Command-line front end: lattice export, oracle runs, eigen training, the
// greedy basis build, prediction, lattice-wide evaluation, the complexity
// table and a wall-clock harness. Configuration comes from an INI file with
// command-line overrides (precedence: flags > file > defaults); all
// randomness flows from one seed recorded in the run manifest.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "parafiber/analysis.hpp"
#include "parafiber/io.hpp"
#include "parafiber/pinn.hpp"
#include "parafiber/rbm.hpp"
#include "parafiber/ssfm.hpp"

using namespace parafiber;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240901;

struct RunContext {
  std::string config_path;
  std::string out_dir = "out";
  std::string basis_dir;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 0;  // 0 = hardware concurrency
  bool verbose = false;

  io::IniConfig ini;

  unsigned worker_count() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
  }

  std::string basis_directory() const {
    return basis_dir.empty() ? out_dir + "/basis" : basis_dir;
  }

  void load() {
    if (!config_path.empty()) ini = io::IniConfig::parse_file(config_path);
    fs::create_directories(out_dir);
  }

  void write_manifest(const std::string& command, const nlohmann::json& extra = {}) const {
    nlohmann::json m;
    m["command"] = command;
    m["seed"] = seed;
    m["threads"] = threads;
    m["config"] = config_path.empty() ? "defaults" : config_path;
    if (!extra.empty()) m["options"] = extra;
    std::ofstream out(out_dir + "/manifest.json");
    out << m.dump(2) << '\n';
  }

  void say(const std::string& msg) const {
    if (verbose) std::fprintf(stderr, "%s\n", msg.c_str());
  }
};

int cmd_lattice(RunContext& ctx) {
  const auto space = io::load_space(ctx.ini);
  const auto lattice = parameter_lattice(space);
  io::save_lattice_csv(lattice, ctx.out_dir + "/lattice.csv");
  ctx.write_manifest("lattice");
  std::printf("wrote %zu parameter sets to %s/lattice.csv\n", lattice.size(),
              ctx.out_dir.c_str());
  return 0;
}

int cmd_ssfm(RunContext& ctx, std::size_t index) {
  const auto space = io::load_space(ctx.ini);
  const auto lattice = parameter_lattice(space);
  if (index >= lattice.size())
    throw std::invalid_argument("ssfm: lattice index " + std::to_string(index) +
                                " out of range (lattice has " +
                                std::to_string(lattice.size()) + " points)");
  const auto pulse = io::load_pulse(ctx.ini);
  const auto grid = io::load_grid(ctx.ini);
  const auto cfg = io::load_ssfm(ctx.ini);
  const auto coeffs = derive_coefficients(lattice[index], pulse, grid);

  const auto field = propagate_pulse(pulse, coeffs, grid, cfg);
  const std::string stem = ctx.out_dir + "/ssfm_" + std::to_string(index);
  io::save_field(field, stem + ".f2d");
  io::save_field_csv(field, stem + ".csv");
  ctx.write_manifest("ssfm", {{"index", index}});

  double p0 = 0.0, p1 = 0.0;
  for (std::size_t i = 0; i < field.nt(); ++i) {
    p0 += std::norm(field.at(i, 0));
    p1 += std::norm(field.at(i, field.nz() - 1));
  }
  std::printf("ssfm index %zu: %zu x %zu samples, end-to-end power ratio %s\n", index,
              field.nt(), field.nz(), io::g17(p1 / p0).c_str());
  return 0;
}

int cmd_train_eigen(RunContext& ctx, std::size_t index) {
  const auto space = io::load_space(ctx.ini);
  const auto lattice = parameter_lattice(space);
  if (index >= lattice.size())
    throw std::invalid_argument("train-eigen: lattice index out of range");
  const auto pulse = io::load_pulse(ctx.ini);
  const auto grid = io::load_grid(ctx.ini);
  const auto train_cfg = io::load_train(ctx.ini, ctx.worker_count());
  const auto layers = io::load_layers(ctx.ini);
  const auto coeffs = derive_coefficients(lattice[index], pulse, grid);
  const auto initial = generate_pulse(pulse, grid);

  const auto model = init_model(layers, ctx.seed);
  ctx.say("training eigen solution at lattice index " + std::to_string(index));
  const auto result = train(model, coeffs, grid, initial, train_cfg);

  const std::string stem = ctx.out_dir + "/eigen_" + std::to_string(index);
  io::save_history_csv(result.history, stem + "_loss.csv");
  if (result.diverged) {
    std::fprintf(stderr, "training diverged after %zu epochs; partial history saved to %s\n",
                 result.epochs_run, (stem + "_loss.csv").c_str());
    return 2;
  }
  io::save_model(result.model, stem + ".mlp");

  const double final_loss = pinn_loss(result.model, coeffs, grid, initial);
  const auto snap = snapshot(result.model, lattice[index], coeffs, grid, final_loss,
                             result.epochs_run);
  EigenBasis single;
  single.append(snap, index);
  io::save_basis(single, grid, pulse, stem + "_snapshot");
  ctx.write_manifest("train-eigen", {{"index", index}, {"epochs", result.epochs_run},
                                     {"final_loss", final_loss}});
  std::printf("trained eigen solution %zu: %zu epochs, final loss %s\n", index,
              result.epochs_run, io::g17(final_loss).c_str());
  return 0;
}

int cmd_greedy(RunContext& ctx, bool resume) {
  const auto space = io::load_space(ctx.ini);
  const auto pulse = io::load_pulse(ctx.ini);
  const auto grid = io::load_grid(ctx.ini);
  const auto train_cfg = io::load_train(ctx.ini, ctx.worker_count());
  const auto layers = io::load_layers(ctx.ini);
  auto greedy_cfg = io::load_greedy(ctx.ini, ctx.seed, ctx.worker_count());
  if (ctx.verbose) greedy_cfg.log = [&](const std::string& m) { ctx.say(m); };

  EigenBasis resume_basis;
  const EigenBasis* resume_ptr = nullptr;
  const std::string basis_dir = ctx.basis_directory();
  if (resume) {
    auto [loaded, meta] = io::load_basis(basis_dir);
    if (meta.first.t_points != grid.t_points || meta.first.zeta_points != grid.zeta_points)
      throw std::invalid_argument("greedy --resume: basis grid differs from the configuration");
    resume_basis = std::move(loaded);
    resume_ptr = &resume_basis;
    ctx.say("resuming from " + std::to_string(resume_basis.size()) + " snapshots");
  }

  const auto [basis, report] =
      greedy_build(space, pulse, grid, train_cfg, greedy_cfg, layers, resume_ptr);

  io::save_basis(basis, grid, pulse, basis_dir);
  io::save_rounds_csv(report, ctx.out_dir + "/greedy_rounds.csv");
  io::save_candidate_table_csv(report, ctx.out_dir + "/greedy_candidates.csv");
  io::save_coefficients_csv(report.coefficients, basis.size(), ctx.out_dir + "/coefficients.csv");
  ctx.write_manifest("greedy", {{"n_basis", greedy_cfg.n_basis}, {"resume", resume}});

  std::printf("basis of %zu eigen solutions in %s; chosen lattice indices:", basis.size(),
              basis_dir.c_str());
  for (std::size_t idx : basis.lattice_indices) std::printf(" %zu", idx);
  std::printf("\n");
  for (const auto& round : report.rounds)
    std::printf("basis size %zu: worst candidate loss %s at index %zu\n", round.basis_size,
                io::g17(round.worst_loss).c_str(), round.chosen_lattice_index);
  return 0;
}

int cmd_predict(RunContext& ctx, std::size_t index, bool fit_on_demand) {
  const auto space = io::load_space(ctx.ini);
  const auto [basis, meta] = io::load_basis(ctx.basis_directory());
  const auto& grid = meta.first;
  const auto& pulse = meta.second;

  GreedyReport report;
  const std::string coeff_path = ctx.out_dir + "/coefficients.csv";
  if (fs::exists(coeff_path)) {
    const auto map = io::load_coefficients_csv(coeff_path);
    for (const auto& [idx, fit] : map) report.coefficients[idx] = fit;
    const auto lattice = parameter_lattice(space);
    for (auto& [idx, fit] : report.coefficients)
      if (idx < lattice.size()) fit.target = lattice[idx];
  }

  auto fit_cfg = io::load_greedy(ctx.ini, ctx.seed, 1).fit;
  const auto field = predict(basis, report, index, space, pulse, grid, fit_on_demand, fit_cfg);
  const std::string stem = ctx.out_dir + "/predict_" + std::to_string(index);
  io::save_field(field, stem + ".f2d");
  io::save_field_csv(field, stem + ".csv");
  ctx.write_manifest("predict", {{"index", index}, {"fit_on_demand", fit_on_demand}});
  std::printf("predicted field for lattice index %zu written to %s.csv\n", index, stem.c_str());
  return 0;
}

int cmd_evaluate(RunContext& ctx, bool with_oracle) {
  const auto space = io::load_space(ctx.ini);
  const auto [basis, meta] = io::load_basis(ctx.basis_directory());
  const auto& grid = meta.first;
  const auto& pulse = meta.second;
  const auto ssfm_cfg = io::load_ssfm(ctx.ini);

  const std::string coeff_path = ctx.out_dir + "/coefficients.csv";
  if (!fs::exists(coeff_path))
    throw std::invalid_argument("evaluate: " + coeff_path +
                                " not found; run the greedy command first");
  GreedyReport report;
  const auto lattice = parameter_lattice(space);
  for (const auto& [idx, fit] : io::load_coefficients_csv(coeff_path)) {
    report.coefficients[idx] = fit;
    if (idx < lattice.size()) report.coefficients[idx].target = lattice[idx];
  }

  auto stats = loss_statistics(report, basis, space, pulse);
  if (with_oracle)
    evaluate_against_oracle(stats, basis, report, space, pulse, grid, ssfm_cfg,
                            ctx.worker_count());

  std::vector<io::ErrorRow> rows;
  for (const auto& e : stats.entries)
    rows.push_back({e.lattice_index, e.params.alpha, e.params.beta2, e.params.n2, e.loss,
                    e.amp_mse});
  io::save_error_csv(rows, ctx.out_dir + "/errors.csv");
  io::save_scatter_csv(rows, ctx.out_dir + "/scatter.csv");
  ctx.write_manifest("evaluate", {{"oracle", with_oracle}});

  std::printf("pulse %s: mean loss %s (log10 %s), worst lattice index %zu\n",
              stats.pulse_shape.c_str(), io::g17(stats.mean_loss).c_str(),
              io::g17(stats.log10_mean_loss).c_str(), stats.worst_index);
  if (with_oracle)
    std::printf("mean amplitude MSE against the oracle: %s\n",
                io::g17(stats.mean_amp_mse).c_str());
  std::printf("boundary fraction of the eigen parameters: %s\n",
              io::g17(stats.boundary_fraction).c_str());
  return 0;
}

int cmd_complexity(RunContext& ctx) {
  ComplexityModel model;
  const auto space = io::load_space(ctx.ini);
  const auto grid = io::load_grid(ctx.ini);
  const auto layers = io::load_layers(ctx.ini);
  model.n_conditions = double(space.size());
  model.m_t = double(grid.t_points);
  model.m_c = double(grid.zeta_points);
  model.hidden_layers = double(layers.size() - 2);
  model.neurons = layers.size() > 2 ? double(layers[1]) : 1.0;
  model.n_basis = double(ctx.ini.get_size("rbm", "n_basis", 10));
  model.l_max = grid.l_max;
  model.l_u = grid.l_max / double(io::load_ssfm(ctx.ini).steps_per_unit_zeta);
  model.n_dispersion = ctx.ini.get_double("complexity", "n_dispersion", 6.0 * model.m_t);
  model.n_nonlinear = ctx.ini.get_double("complexity", "n_nonlinear", 10.0 * model.m_t);

  const auto mac = mac_counts(model);
  std::printf("MAC counts (per-condition multiplicity N = %s)\n",
              io::g17(model.n_conditions).c_str());
  std::printf("  split-step:            %s\n", io::g17(mac.c_ssfm).c_str());
  std::printf("  per-condition network: %s\n", io::g17(mac.c_f).c_str());
  std::printf("  parameterized model:   %s (network %s + combination %s)\n",
              io::g17(mac.c_pf).c_str(), io::g17(mac.c_pf_network).c_str(),
              io::g17(mac.c_pf_combine).c_str());
  std::printf("ratio network/previous-model: %s\n", io::g17(mac.ratio_pf_f_networks()).c_str());
  std::printf("ratio parameterized/previous-model: %s\n", io::g17(mac.ratio_pf_f()).c_str());
  std::printf("ratio parameterized/split-step: %s\n", io::g17(mac.ratio_pf_ssfm()).c_str());

  std::ofstream out(ctx.out_dir + "/complexity.csv");
  out << "quantity,value\n";
  out << "c_ssfm," << io::g17(mac.c_ssfm) << "\n";
  out << "c_f," << io::g17(mac.c_f) << "\n";
  out << "c_pf," << io::g17(mac.c_pf) << "\n";
  out << "c_pf_network," << io::g17(mac.c_pf_network) << "\n";
  out << "c_pf_combine," << io::g17(mac.c_pf_combine) << "\n";
  out << "ratio_pf_f_networks," << io::g17(mac.ratio_pf_f_networks()) << "\n";
  out << "ratio_pf_f," << io::g17(mac.ratio_pf_f()) << "\n";
  out << "ratio_pf_ssfm," << io::g17(mac.ratio_pf_ssfm()) << "\n";
  ctx.write_manifest("complexity");
  return 0;
}

int cmd_timing(RunContext& ctx, std::size_t reps) {
  const auto space = io::load_space(ctx.ini);
  const auto pulse = io::load_pulse(ctx.ini);
  const auto grid = io::load_grid(ctx.ini);
  const auto ssfm_cfg = io::load_ssfm(ctx.ini);
  const auto layers = io::load_layers(ctx.ini);
  auto train_cfg = io::load_train(ctx.ini, ctx.worker_count());
  train_cfg.max_epochs = ctx.ini.get_size("timing", "train_epochs", 50);

  const auto lattice = parameter_lattice(space);
  const std::size_t idx = space.central_index();
  const auto coeffs = derive_coefficients(lattice[idx], pulse, grid);
  const auto initial = generate_pulse(pulse, grid);

  EigenBasis basis;
  {
    const auto model = init_model(layers, ctx.seed);
    const auto result = train(model, coeffs, grid, initial, train_cfg);
    basis.append(snapshot(result.model, lattice[idx], coeffs, grid, 0.0, result.epochs_run),
                 idx);
  }
  const FitConfig fit_cfg = io::load_greedy(ctx.ini, ctx.seed, 1).fit;

  const auto rows = timing_harness(
      {{"eigen_training_epoch_block",
        [&] {
          auto cfg = train_cfg;
          cfg.max_epochs = std::max<std::size_t>(1, train_cfg.max_epochs / 5);
          const auto model = init_model(layers, ctx.seed + 1);
          (void)train(model, coeffs, grid, initial, cfg);
        }},
       {"coefficient_fit",
        [&] { (void)fit_coefficients(basis, coeffs, lattice[idx], initial, fit_cfg); }},
       {"predict_combine", [&] { (void)combine(basis, std::vector<double>(basis.size(), 0.5), grid); }},
       {"ssfm_propagation", [&] { (void)propagate_pulse(pulse, coeffs, grid, ssfm_cfg); }}},
      reps);

  std::ofstream out(ctx.out_dir + "/timing.csv");
  out << "stage,median_seconds,samples\n";
  for (const auto& row : rows) {
    out << row.stage << ',' << io::g17(row.median_seconds) << ',';
    for (std::size_t k = 0; k < row.samples.size(); ++k)
      out << (k ? ";" : "") << io::g17(row.samples[k]);
    out << '\n';
    std::printf("%-28s median %.6f s\n", row.stage.c_str(), row.median_seconds);
  }
  ctx.write_manifest("timing", {{"reps", reps}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunContext ctx;
  if (const char* env_out = std::getenv("PARAFIBER_OUT")) ctx.out_dir = env_out;

  CLI::App app{"parameterized fiber-propagation meta-solver"};
  app.require_subcommand(1);
  app.add_option("--config", ctx.config_path, "INI configuration file");
  app.add_option("--out", ctx.out_dir, "output directory");
  app.add_option("--basis-dir", ctx.basis_dir, "basis directory (default <out>/basis)");
  app.add_option("--seed", ctx.seed, "global random seed");
  app.add_option("--threads", ctx.threads, "worker threads (0 = hardware)");
  app.add_flag("--verbose", ctx.verbose, "progress logging to stderr");

  auto* lattice_cmd = app.add_subcommand("lattice", "export the parameter lattice as CSV");

  std::size_t index = 0;
  auto* ssfm_cmd = app.add_subcommand("ssfm", "run the split-step oracle at one lattice point");
  ssfm_cmd->add_option("--index", index, "lattice index")->required();

  auto* train_cmd = app.add_subcommand("train-eigen", "train one eigen solution");
  train_cmd->add_option("--index", index, "lattice index")->required();

  bool resume = false;
  auto* greedy_cmd = app.add_subcommand("greedy", "greedy basis build over the lattice");
  greedy_cmd->add_flag("--resume", resume, "continue from an existing basis directory");

  bool fit_on_demand = false;
  auto* predict_cmd = app.add_subcommand("predict", "combine the basis at one lattice point");
  predict_cmd->add_option("--index", index, "lattice index")->required();
  predict_cmd->add_flag("--fit-on-demand", fit_on_demand,
                        "fit coefficients when the point is missing from the map");

  bool no_oracle = false;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "loss statistics and oracle comparison");
  evaluate_cmd->add_flag("--no-oracle", no_oracle, "skip the split-step comparison");

  auto* complexity_cmd = app.add_subcommand("complexity", "multiply-accumulate count table");

  std::size_t reps = 3;
  auto* timing_cmd = app.add_subcommand("timing", "wall-clock medians per pipeline stage");
  timing_cmd->add_option("--reps", reps, "repetitions per stage");

  CLI11_PARSE(app, argc, argv);

  try {
    ctx.load();
    if (lattice_cmd->parsed()) return cmd_lattice(ctx);
    if (ssfm_cmd->parsed()) return cmd_ssfm(ctx, index);
    if (train_cmd->parsed()) return cmd_train_eigen(ctx, index);
    if (greedy_cmd->parsed()) return cmd_greedy(ctx, resume);
    if (predict_cmd->parsed()) return cmd_predict(ctx, index, fit_on_demand);
    if (evaluate_cmd->parsed()) return cmd_evaluate(ctx, !no_oracle);
    if (complexity_cmd->parsed()) return cmd_complexity(ctx);
    if (timing_cmd->parsed()) return cmd_timing(ctx, reps);
  } catch (const SsfmBlowup& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "airfl/config.hpp"
#include "airfl/experiment.hpp"

namespace {

using airfl::CsvTable;
using airfl::ExperimentConfig;

void write_outputs(
    const ExperimentConfig& cfg, const std::string& command,
    const std::vector<std::pair<std::string, const CsvTable*>>& outputs) {
  std::filesystem::create_directories(cfg.output_dir);
  const std::filesystem::path dir(cfg.output_dir);
  for (const auto& [name, table] : outputs) {
    table->write_file((dir / name).string());
    std::cout << name << ": " << table->rows() << " rows\n";
  }
  const std::string manifest = airfl::manifest_text(cfg, command, outputs);
  std::ofstream mf(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) throw airfl::ConfigError("cannot write manifest.json");
  mf << manifest;
}

int run_sweep_cmd(const ExperimentConfig& cfg, int threads) {
  const airfl::MseSweepResult result =
      airfl::run_mse_sweep(cfg, cfg.q_values, threads);
  for (const auto& pt : result.points)
    if (!pt.ok)
      std::cerr << "mse-sweep point failed (q=" << pt.q
                << ", seed=" << pt.seed << "): " << pt.error << "\n";
  const CsvTable table = airfl::mse_sweep_table(result);
  write_outputs(cfg, "mse-sweep", {{"mse_sweep.csv", &table}});
  return result.failures == 0 ? 0 : 2;
}

int run_train_cmd(const ExperimentConfig& cfg, int threads) {
  const airfl::TrainingSuite suite = airfl::run_training(cfg, threads);
  for (const auto& run : suite.runs)
    if (!run.ok)
      std::cerr << "training run failed (mode=" << run.mode
                << ", seed=" << run.seed << "): " << run.error << "\n";
  const CsvTable rounds = airfl::training_rounds_table(suite);
  const CsvTable summary = airfl::training_summary_table(suite);
  write_outputs(cfg, "train",
                {{"training_rounds.csv", &rounds},
                 {"training_summary.csv", &summary}});
  return suite.failures == 0 ? 0 : 2;
}

int run_pareto_cmd(const ExperimentConfig& cfg, int threads) {
  std::vector<airfl::ProfilingVector> kappas;
  if (cfg.kappa_list.empty()) {
    const std::size_t cells = cfg.scenario.cells();
    kappas.push_back(airfl::ProfilingVector{
        std::vector<double>(cells, 1.0 / static_cast<double>(cells))});
  } else {
    for (const auto& k : cfg.kappa_list)
      kappas.push_back(airfl::ProfilingVector{k});
  }
  const airfl::ParetoResult result = airfl::run_pareto(cfg, kappas, threads);
  for (const auto& per_seed : result.per_seed)
    for (const auto& pt : per_seed.points)
      if (!pt.ok)
        std::cerr << "pareto point failed (seed=" << per_seed.seed
                  << "): " << pt.error << "\n";
  const CsvTable table = airfl::pareto_table(result);
  write_outputs(cfg, "pareto", {{"pareto.csv", &table}});
  return result.failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Experiment harness for STAR-RIS assisted over-the-air vertical "
      "federated learning"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::vector<std::uint64_t> seed_override;
  int threads = 1;
  app.add_option("--config", config_path, "experiment config file (JSON)")
      ->required();
  app.add_option("--out", out_override, "override the config's output_dir");
  app.add_option("--seed", seed_override,
                 "override the config's seed list (repeatable)");
  app.add_option("--threads", threads, "worker threads")
      ->check(CLI::PositiveNumber);

  auto* sweep_cmd = app.add_subcommand(
      "mse-sweep", "aggregation error versus RIS element count");
  auto* train_cmd = app.add_subcommand(
      "train", "federated training across the configured channel modes");
  std::string mode_override;
  train_cmd->add_option("--mode", mode_override,
                        "run a single channel mode instead of the list");
  auto* pareto_cmd = app.add_subcommand(
      "pareto", "gap trade-off sweep over profiling vectors");
  auto* validate_cmd = app.add_subcommand(
      "validate-config", "parse and echo the effective config with its hash");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = airfl::load_config(config_path);
    if (!seed_override.empty()) cfg.seeds = seed_override;
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (train_cmd->parsed() && !mode_override.empty())
      cfg.training.modes = {mode_override};
    cfg.validate();

    if (validate_cmd->parsed()) {
      const std::string text = airfl::canonical_config_text(cfg);
      std::cout << text;
      std::cout << "config_hash: " << airfl::hex64(airfl::fnv1a64(text))
                << "\n";
      return 0;
    }
    if (sweep_cmd->parsed()) return run_sweep_cmd(cfg, threads);
    if (train_cmd->parsed()) return run_train_cmd(cfg, threads);
    if (pareto_cmd->parsed()) return run_pareto_cmd(cfg, threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "airfl/config.hpp"

namespace airfl {

inline constexpr const char* kCodeVersion = "0.1.0";

/// In-memory CSV with schema enforcement: every row must carry exactly one
/// cell per column, numeric cells must be finite, and text cells may not
/// contain separators. Rows are accumulated first and written in one pass,
/// which is what keeps output bytes independent of worker scheduling.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  CsvTable& add(double v);
  template <typename T,
            std::enable_if_t<std::is_integral_v<T>, int> = 0>
  CsvTable& add(T v) {
    push_cell(std::to_string(v));
    return *this;
  }
  CsvTable& add(const std::string& v);
  CsvTable& add(const char* v) { return add(std::string(v)); }
  void end_row();

  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& columns() const { return columns_; }
  std::string text() const;
  void write_file(const std::string& path) const;

 private:
  void push_cell(std::string cell);

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> pending_;
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

/// One (seed, Q) design point of the element-count sweep.
struct MseSweepPoint {
  Eigen::Index q = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<double> mse_ul;  // per cell, closed form
  std::vector<double> mse_dl;  // per cell, mean over the cell's devices
  double zeta_ul = 0.0;
  double zeta_dl = 0.0;
};

struct MseSweepResult {
  /// Indexed seed-major: points[si * q_values.size() + qi].
  std::vector<MseSweepPoint> points;
  std::vector<Eigen::Index> q_values;  // ascending, deduplicated
  std::vector<std::uint64_t> seeds;
  std::size_t failures = 0;
  std::size_t cells = 0;
};

/// For each seed: one channel draw at the largest Q, then a chained sweep
/// over ascending Q on element-restricted copies of that draw. Each step
/// keeps the best of {cold solve, warm solve, previous design padded with
/// off elements}, judged per direction by mean closed-form MSE, so the
/// reported curves are non-increasing in Q by construction.
MseSweepResult run_mse_sweep(const ExperimentConfig& config,
                             std::vector<Eigen::Index> q_values,
                             int threads = 1);

CsvTable mse_sweep_table(const MseSweepResult& result);

/// One training run: a channel mode paired with a seed. The dataset draw
/// depends on the seed only, so modes compare on identical tasks.
struct TrainingRun {
  std::string mode;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  TrainResult result;
  std::vector<double> final_loss;      // per cell
  std::vector<double> final_accuracy;  // per cell
};

struct TrainingSuite {
  std::vector<TrainingRun> runs;
  std::size_t failures = 0;
};

TrainingSuite run_training(const ExperimentConfig& config, int threads = 1);

CsvTable training_rounds_table(const TrainingSuite& suite);
CsvTable training_summary_table(const TrainingSuite& suite);

struct ParetoSeedResult {
  std::uint64_t seed = 0;
  std::vector<GapPoint> points;
};

struct ParetoResult {
  std::vector<ParetoSeedResult> per_seed;
  std::size_t failures = 0;
  std::size_t cells = 0;
};

/// Gap-profile sweep: per seed, one channel draw and one alternating
/// optimization per profiling vector.
ParetoResult run_pareto(const ExperimentConfig& config,
                        const std::vector<ProfilingVector>& kappa_list,
                        int threads = 1);

CsvTable pareto_table(const ParetoResult& result);

/// Provenance record written next to the CSVs: canonical-config hash, code
/// version, seeds, and the shape of every output file. Carries no
/// timestamps so repeated runs stay byte-identical.
std::string manifest_text(
    const ExperimentConfig& config, const std::string& command,
    const std::vector<std::pair<std::string, const CsvTable*>>& outputs);

}  // namespace airfl

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "airfl/beamforming.hpp"
#include "airfl/channel.hpp"
#include "airfl/data.hpp"
#include "airfl/topology.hpp"
#include "airfl/vfl.hpp"

namespace airfl {

/// Physical scenario. Every dB / dBm / meter quantity keeps its unit in the
/// key name and is converted to linear scale exactly once, in the factory
/// functions below.
struct ScenarioConfig {
  std::vector<Point2> bs_positions_m{{0.0, 0.0}, {40.0, 0.0}};
  Point2 ris_position_m{20.0, 0.0};
  std::size_t devices_per_cell = 4;
  double cell_radius_m = 20.0;
  std::size_t antennas = 8;
  double pathloss_exponent = 2.5;
  double rician_factor_db = 5.0;
  double wavelength_m = 0.1;
  double min_distance_m = 1.0;
  double power_ul_dbm = 30.0;
  double power_dl_dbm = 30.0;
  double noise_ul_dbm = -10.0;
  double noise_dl_dbm = -10.0;
  bool symmetric_devices = false;

  std::size_t cells() const { return bs_positions_m.size(); }
};

struct RisSectionConfig {
  Eigen::Index elements = 10;
  std::string mode_policy = "equal-split";
};

/// Flat view of the nested optimizer tolerances; assembled into
/// AlternatingOptions by make_alternating_options.
struct OptimizerConfig {
  double outer_rel_tol = 1e-4;
  int max_outer = 10;
  double sca_rel_tol = 1e-5;
  int sca_max_iters = 50;
  int phase_grid_points = 64;
  double phase_refine_tol_rad = 1e-4;
  int phase_max_passes = 4;
  double phase_rel_tol = 1e-6;
};

struct TrainingConfig {
  int rounds = 200;
  double learning_rate = 0.01;
  double lambda = 1e-3;
  bool reoptimize_each_round = true;
  /// Channel modes compared side by side; see channel_mode_from_string.
  std::vector<std::string> modes{"noiseless", "star-ris", "no-ris"};
};

struct DatasetSectionConfig {
  /// "synthetic" draws Gaussian cluster tasks; "idx" reads image files.
  std::string kind = "synthetic";
  std::string images;
  std::string labels;
  std::string test_images;
  std::string test_labels;
  /// Binary task per cell, e.g. [[0,1],[2,3]]; idx datasets only.
  std::vector<std::array<int, 2>> class_pairs;
  std::size_t train_samples = 500;
  std::size_t test_samples = 200;
  std::string partition = "contiguous";
  bool standardize_features = true;
  Eigen::Index synthetic_dim = 8;
  double synthetic_separation = 2.0;
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  RisSectionConfig ris;
  OptimizerConfig optimizer;
  TrainingConfig training;
  DatasetSectionConfig dataset;
  std::vector<Eigen::Index> q_values{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::vector<double>> kappa_list;  // empty -> uniform only
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";

  /// Cross-field checks plus existence of referenced dataset files.
  void validate() const;
};

/// Parse a JSON config. Unknown keys anywhere are an error, so a typo like
/// "noise_ul_db" cannot silently fall back to a default. Relative dataset
/// paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& base_dir = ".");

ExperimentConfig load_config(const std::string& path);

/// Effective config serialized back to JSON with defaults filled in; two
/// files that parse to the same config produce identical text. This is the
/// string the run manifest hashes.
std::string canonical_config_text(const ExperimentConfig& config);

ChannelMode channel_mode_from_string(const std::string& name);
std::string to_string(ChannelMode mode);

PartitionPolicy partition_policy_from_string(const std::string& name);

TopologySpec make_topology_spec(const ScenarioConfig& scenario,
                                Eigen::Index elements);
FadingParams make_fading(const ScenarioConfig& scenario);
AlternatingOptions make_alternating_options(const OptimizerConfig& optimizer);

/// Device placement drawn from the seed's placement sub-stream, so sweeps
/// and training runs sharing a seed see the same geometry.
NetworkTopology make_topology(const ExperimentConfig& config,
                              Eigen::Index elements, std::uint64_t seed);

/// Topology + powers + noise, ready for train().
ChannelStack make_stack(const ExperimentConfig& config, std::uint64_t seed);

/// Per-cell train/test tasks for one seed. Synthetic tasks draw a fresh
/// cluster direction per cell and split one sample pool into train and test
/// halves, so the two splits come from the same distribution. Idx tasks
/// filter the configured class pair per cell, subsample, fit the feature
/// scaler on the training subset only, and partition vertically.
struct TaskBundle {
  std::vector<VerticalDataset> train;
  std::vector<VerticalDataset> test;
};

TaskBundle build_tasks(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace airfl

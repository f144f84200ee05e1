#include "airfl/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "airfl/rng.hpp"
#include "airfl/star_ris.hpp"

namespace airfl {

namespace {

using nlohmann::json;

// Sub-stream tags so placement and dataset draws never alias the training
// loop's per-round channel stream.
constexpr std::uint64_t kPlacementStream = 0x706c6163ULL;
constexpr std::uint64_t kDataStream = 0x64617461ULL;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* k) { return it.key() == k; });
    if (!known) bad("unknown key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
  if (p.empty()) return p;
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return p;
  return (std::filesystem::path(base_dir) / fp).lexically_normal().string();
}

void parse_scenario(const json& j, ScenarioConfig& s) {
  check_keys(j, "scenario",
             {"bs_positions_m", "ris_position_m", "devices_per_cell",
              "cell_radius_m", "antennas", "pathloss_exponent",
              "rician_factor_db", "wavelength_m", "min_distance_m",
              "power_ul_dbm", "power_dl_dbm", "noise_ul_dbm", "noise_dl_dbm",
              "symmetric_devices"});
  read_field(j, "bs_positions_m", s.bs_positions_m);
  read_field(j, "ris_position_m", s.ris_position_m);
  read_field(j, "devices_per_cell", s.devices_per_cell);
  read_field(j, "cell_radius_m", s.cell_radius_m);
  read_field(j, "antennas", s.antennas);
  read_field(j, "pathloss_exponent", s.pathloss_exponent);
  read_field(j, "rician_factor_db", s.rician_factor_db);
  read_field(j, "wavelength_m", s.wavelength_m);
  read_field(j, "min_distance_m", s.min_distance_m);
  read_field(j, "power_ul_dbm", s.power_ul_dbm);
  read_field(j, "power_dl_dbm", s.power_dl_dbm);
  read_field(j, "noise_ul_dbm", s.noise_ul_dbm);
  read_field(j, "noise_dl_dbm", s.noise_dl_dbm);
  read_field(j, "symmetric_devices", s.symmetric_devices);
}

void parse_ris(const json& j, RisSectionConfig& r) {
  check_keys(j, "ris", {"elements", "mode_policy"});
  read_field(j, "elements", r.elements);
  read_field(j, "mode_policy", r.mode_policy);
}

void parse_optimizer(const json& j, OptimizerConfig& o) {
  check_keys(j, "optimizer",
             {"outer_rel_tol", "max_outer", "sca_rel_tol", "sca_max_iters",
              "phase_grid_points", "phase_refine_tol_rad", "phase_max_passes",
              "phase_rel_tol"});
  read_field(j, "outer_rel_tol", o.outer_rel_tol);
  read_field(j, "max_outer", o.max_outer);
  read_field(j, "sca_rel_tol", o.sca_rel_tol);
  read_field(j, "sca_max_iters", o.sca_max_iters);
  read_field(j, "phase_grid_points", o.phase_grid_points);
  read_field(j, "phase_refine_tol_rad", o.phase_refine_tol_rad);
  read_field(j, "phase_max_passes", o.phase_max_passes);
  read_field(j, "phase_rel_tol", o.phase_rel_tol);
}

void parse_training(const json& j, TrainingConfig& t) {
  check_keys(j, "training",
             {"rounds", "learning_rate", "lambda", "reoptimize_each_round",
              "modes"});
  read_field(j, "rounds", t.rounds);
  read_field(j, "learning_rate", t.learning_rate);
  read_field(j, "lambda", t.lambda);
  read_field(j, "reoptimize_each_round", t.reoptimize_each_round);
  read_field(j, "modes", t.modes);
}

void parse_dataset(const json& j, DatasetSectionConfig& d,
                   const std::string& base_dir) {
  check_keys(j, "dataset",
             {"kind", "images", "labels", "test_images", "test_labels",
              "class_pairs", "train_samples", "test_samples", "partition",
              "standardize_features", "synthetic_dim",
              "synthetic_separation"});
  read_field(j, "kind", d.kind);
  read_field(j, "images", d.images);
  read_field(j, "labels", d.labels);
  read_field(j, "test_images", d.test_images);
  read_field(j, "test_labels", d.test_labels);
  read_field(j, "class_pairs", d.class_pairs);
  read_field(j, "train_samples", d.train_samples);
  read_field(j, "test_samples", d.test_samples);
  read_field(j, "partition", d.partition);
  read_field(j, "standardize_features", d.standardize_features);
  read_field(j, "synthetic_dim", d.synthetic_dim);
  read_field(j, "synthetic_separation", d.synthetic_separation);
  d.images = resolve_path(d.images, base_dir);
  d.labels = resolve_path(d.labels, base_dir);
  d.test_images = resolve_path(d.test_images, base_dir);
  d.test_labels = resolve_path(d.test_labels, base_dir);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) bad(std::string("dataset.") + what + " is required");
  if (!std::filesystem::exists(path))
    bad(std::string("dataset.") + what + " not found: " + path);
}

json positions_to_json(const std::vector<Point2>& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back({p[0], p[1]});
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config root",
             {"scenario", "ris", "optimizer", "training", "dataset",
              "q_values", "kappa_list", "seeds", "output_dir"});

  ExperimentConfig c;
  if (j.contains("scenario")) parse_scenario(j.at("scenario"), c.scenario);
  if (j.contains("ris")) parse_ris(j.at("ris"), c.ris);
  if (j.contains("optimizer")) parse_optimizer(j.at("optimizer"), c.optimizer);
  if (j.contains("training")) parse_training(j.at("training"), c.training);
  if (j.contains("dataset"))
    parse_dataset(j.at("dataset"), c.dataset, base_dir);
  read_field(j, "q_values", c.q_values);
  read_field(j, "kappa_list", c.kappa_list);
  read_field(j, "seeds", c.seeds);
  read_field(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(),
                      std::filesystem::path(path).parent_path().string());
}

void ExperimentConfig::validate() const {
  if (scenario.bs_positions_m.empty()) bad("scenario needs at least one BS");
  if (scenario.devices_per_cell == 0)
    bad("scenario.devices_per_cell must be >= 1");
  if (scenario.antennas == 0) bad("scenario.antennas must be >= 1");
  if (scenario.cell_radius_m <= 0.0)
    bad("scenario.cell_radius_m must be > 0");
  if (scenario.pathloss_exponent <= 0.0)
    bad("scenario.pathloss_exponent must be > 0");
  if (scenario.wavelength_m <= 0.0) bad("scenario.wavelength_m must be > 0");
  if (scenario.min_distance_m <= 0.0)
    bad("scenario.min_distance_m must be > 0");

  if (ris.elements < 0) bad("ris.elements must be >= 0");
  mode_policy_from_string(ris.mode_policy);

  if (optimizer.outer_rel_tol <= 0.0 || optimizer.sca_rel_tol <= 0.0 ||
      optimizer.phase_refine_tol_rad <= 0.0 || optimizer.phase_rel_tol <= 0.0)
    bad("optimizer tolerances must be > 0");
  if (optimizer.max_outer < 1 || optimizer.sca_max_iters < 1 ||
      optimizer.phase_max_passes < 1)
    bad("optimizer iteration caps must be >= 1");
  if (optimizer.phase_grid_points < 2)
    bad("optimizer.phase_grid_points must be >= 2");

  if (training.rounds < 0) bad("training.rounds must be >= 0");
  if (training.learning_rate <= 0.0) bad("training.learning_rate must be > 0");
  if (training.lambda <= 0.0) bad("training.lambda must be > 0");
  if (training.modes.empty()) bad("training.modes must not be empty");
  for (const auto& m : training.modes) channel_mode_from_string(m);

  const std::size_t cells = scenario.cells();
  if (dataset.kind == "synthetic") {
    if (dataset.synthetic_dim <
        static_cast<Eigen::Index>(scenario.devices_per_cell))
      bad("dataset.synthetic_dim must be >= devices_per_cell");
    if (dataset.synthetic_separation < 0.0)
      bad("dataset.synthetic_separation must be >= 0");
    if (dataset.train_samples < 2) bad("dataset.train_samples must be >= 2");
  } else if (dataset.kind == "idx") {
    require_file(dataset.images, "images");
    require_file(dataset.labels, "labels");
    require_file(dataset.test_images, "test_images");
    require_file(dataset.test_labels, "test_labels");
    if (dataset.class_pairs.size() != cells)
      bad("dataset.class_pairs needs one [a,b] pair per cell (" +
          std::to_string(cells) + " cells, got " +
          std::to_string(dataset.class_pairs.size()) + ")");
    for (const auto& p : dataset.class_pairs)
      if (p[0] == p[1]) bad("dataset.class_pairs entries must be distinct");
    if (dataset.train_samples < 2) bad("dataset.train_samples must be >= 2");
  } else {
    bad("dataset.kind must be \"synthetic\" or \"idx\"");
  }
  if (dataset.test_samples < 1) bad("dataset.test_samples must be >= 1");
  partition_policy_from_string(dataset.partition);

  if (q_values.empty()) bad("q_values must not be empty");
  for (auto q : q_values)
    if (q < 0) bad("q_values entries must be >= 0");
  {
    std::set<Eigen::Index> uniq(q_values.begin(), q_values.end());
    if (uniq.size() != q_values.size()) bad("q_values has duplicates");
  }

  for (const auto& k : kappa_list) {
    ProfilingVector pv{k};
    pv.validate(cells);
  }

  if (seeds.empty()) bad("seeds must not be empty");
  {
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) bad("seeds has duplicates");
  }
  if (output_dir.empty()) bad("output_dir must not be empty");
}

std::string canonical_config_text(const ExperimentConfig& c) {
  json j;
  j["scenario"] = {
      {"bs_positions_m", positions_to_json(c.scenario.bs_positions_m)},
      {"ris_position_m", {c.scenario.ris_position_m[0],
                          c.scenario.ris_position_m[1]}},
      {"devices_per_cell", c.scenario.devices_per_cell},
      {"cell_radius_m", c.scenario.cell_radius_m},
      {"antennas", c.scenario.antennas},
      {"pathloss_exponent", c.scenario.pathloss_exponent},
      {"rician_factor_db", c.scenario.rician_factor_db},
      {"wavelength_m", c.scenario.wavelength_m},
      {"min_distance_m", c.scenario.min_distance_m},
      {"power_ul_dbm", c.scenario.power_ul_dbm},
      {"power_dl_dbm", c.scenario.power_dl_dbm},
      {"noise_ul_dbm", c.scenario.noise_ul_dbm},
      {"noise_dl_dbm", c.scenario.noise_dl_dbm},
      {"symmetric_devices", c.scenario.symmetric_devices},
  };
  j["ris"] = {{"elements", c.ris.elements},
              {"mode_policy", c.ris.mode_policy}};
  j["optimizer"] = {
      {"outer_rel_tol", c.optimizer.outer_rel_tol},
      {"max_outer", c.optimizer.max_outer},
      {"sca_rel_tol", c.optimizer.sca_rel_tol},
      {"sca_max_iters", c.optimizer.sca_max_iters},
      {"phase_grid_points", c.optimizer.phase_grid_points},
      {"phase_refine_tol_rad", c.optimizer.phase_refine_tol_rad},
      {"phase_max_passes", c.optimizer.phase_max_passes},
      {"phase_rel_tol", c.optimizer.phase_rel_tol},
  };
  j["training"] = {
      {"rounds", c.training.rounds},
      {"learning_rate", c.training.learning_rate},
      {"lambda", c.training.lambda},
      {"reoptimize_each_round", c.training.reoptimize_each_round},
      {"modes", c.training.modes},
  };
  j["dataset"] = {
      {"kind", c.dataset.kind},
      {"images", c.dataset.images},
      {"labels", c.dataset.labels},
      {"test_images", c.dataset.test_images},
      {"test_labels", c.dataset.test_labels},
      {"class_pairs", c.dataset.class_pairs},
      {"train_samples", c.dataset.train_samples},
      {"test_samples", c.dataset.test_samples},
      {"partition", c.dataset.partition},
      {"standardize_features", c.dataset.standardize_features},
      {"synthetic_dim", c.dataset.synthetic_dim},
      {"synthetic_separation", c.dataset.synthetic_separation},
  };
  j["q_values"] = c.q_values;
  j["kappa_list"] = c.kappa_list;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

ChannelMode channel_mode_from_string(const std::string& name) {
  if (name == "noiseless") return ChannelMode::Noiseless;
  if (name == "single-cell") return ChannelMode::AircompSingleCell;
  if (name == "no-ris") return ChannelMode::AircompMultiCell;
  if (name == "star-ris") return ChannelMode::AircompMultiCellStarRis;
  bad("unknown channel mode: " + name +
      " (expected noiseless, single-cell, no-ris, or star-ris)");
}

std::string to_string(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::Noiseless: return "noiseless";
    case ChannelMode::AircompSingleCell: return "single-cell";
    case ChannelMode::AircompMultiCell: return "no-ris";
    case ChannelMode::AircompMultiCellStarRis: return "star-ris";
  }
  return "?";
}

PartitionPolicy partition_policy_from_string(const std::string& name) {
  if (name == "contiguous") return PartitionPolicy::Contiguous;
  if (name == "strided") return PartitionPolicy::Strided;
  bad("unknown partition policy: " + name);
}

TopologySpec make_topology_spec(const ScenarioConfig& s,
                                Eigen::Index elements) {
  TopologySpec spec;
  spec.bs_positions = s.bs_positions_m;
  spec.ris_position = s.ris_position_m;
  spec.devices_per_cell.assign(s.cells(), s.devices_per_cell);
  spec.cell_radius_m = s.cell_radius_m;
  spec.antennas = s.antennas;
  spec.elements = static_cast<std::size_t>(elements);
  spec.symmetric_devices = s.symmetric_devices;
  return spec;
}

FadingParams make_fading(const ScenarioConfig& s) {
  FadingParams f;
  f.pathloss_exponent = s.pathloss_exponent;
  f.rician_factor = db_to_linear(s.rician_factor_db);
  f.wavelength_m = s.wavelength_m;
  f.min_distance_m = s.min_distance_m;
  f.validate();
  return f;
}

AlternatingOptions make_alternating_options(const OptimizerConfig& o) {
  AlternatingOptions opts;
  opts.outer_rel_tol = o.outer_rel_tol;
  opts.max_outer = o.max_outer;
  opts.sca.rel_tol = o.sca_rel_tol;
  opts.sca.max_iters = o.sca_max_iters;
  opts.phase.grid_points = o.phase_grid_points;
  opts.phase.refine_tol = o.phase_refine_tol_rad;
  opts.phase.max_passes = o.phase_max_passes;
  opts.phase.rel_tol = o.phase_rel_tol;
  return opts;
}

NetworkTopology make_topology(const ExperimentConfig& c, Eigen::Index elements,
                              std::uint64_t seed) {
  return build_topology(make_topology_spec(c.scenario, elements),
                        derive_seed(seed, {kPlacementStream}));
}

ChannelStack make_stack(const ExperimentConfig& c, std::uint64_t seed) {
  ChannelStack stack;
  stack.topology = make_topology(c, c.ris.elements, seed);
  stack.fading = make_fading(c.scenario);
  stack.elements = c.ris.elements;
  stack.p_ul = dbm_to_watts(c.scenario.power_ul_dbm);
  stack.p_dl = dbm_to_watts(c.scenario.power_dl_dbm);
  stack.noise_ul = dbm_to_watts(c.scenario.noise_ul_dbm);
  stack.noise_dl = dbm_to_watts(c.scenario.noise_dl_dbm);
  return stack;
}

namespace {

RawDataset take_rows(const RawDataset& src, std::size_t begin,
                     std::size_t count) {
  RawDataset out;
  out.features = src.features.middleRows(static_cast<Eigen::Index>(begin),
                                         static_cast<Eigen::Index>(count));
  out.labels.assign(src.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    src.labels.begin() +
                        static_cast<std::ptrdiff_t>(begin + count));
  return out;
}

void standardize_pair(RawDataset& train, RawDataset& test) {
  const FeatureScaler scaler = fit_feature_scaler(train.features);
  train.features = apply_feature_scaler(scaler, train.features);
  test.features = apply_feature_scaler(scaler, test.features);
}

}  // namespace

TaskBundle build_tasks(const ExperimentConfig& c, std::uint64_t seed) {
  const std::size_t cells = c.scenario.cells();
  const std::size_t devices = c.scenario.devices_per_cell;
  const PartitionPolicy policy =
      partition_policy_from_string(c.dataset.partition);

  TaskBundle bundle;
  bundle.train.reserve(cells);
  bundle.test.reserve(cells);

  RawDataset idx_train_all, idx_test_all;
  if (c.dataset.kind == "idx") {
    idx_train_all = load_idx(c.dataset.images, c.dataset.labels);
    idx_test_all = load_idx(c.dataset.test_images, c.dataset.test_labels);
  }

  for (std::size_t m = 0; m < cells; ++m) {
    Rng rng(derive_seed(seed, {kDataStream, m}));
    RawDataset train_raw, test_raw;
    if (c.dataset.kind == "synthetic") {
      // One pool split in two keeps train and test on the same cluster
      // direction; separate draws would pose two different problems.
      const RawDataset pool =
          make_synthetic(c.dataset.train_samples + c.dataset.test_samples,
                         c.dataset.synthetic_dim,
                         c.dataset.synthetic_separation, rng);
      train_raw = take_rows(pool, 0, c.dataset.train_samples);
      test_raw = take_rows(pool, c.dataset.train_samples,
                           c.dataset.test_samples);
    } else {
      const auto& pair = c.dataset.class_pairs[m];
      RawDataset train_filt =
          binary_task_filter(idx_train_all, pair[0], pair[1]);
      RawDataset test_filt = binary_task_filter(idx_test_all, pair[0], pair[1]);
      train_raw = subsample(train_filt, c.dataset.train_samples, rng);
      test_raw = subsample(test_filt, c.dataset.test_samples, rng);
    }
    if (c.dataset.standardize_features) standardize_pair(train_raw, test_raw);
    bundle.train.push_back(vertical_partition(train_raw, devices, policy));
    bundle.test.push_back(vertical_partition(test_raw, devices, policy));
  }
  return bundle;
}

}  // namespace airfl

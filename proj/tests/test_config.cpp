#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "airfl/config.hpp"

using namespace airfl;

namespace {

std::filesystem::path repo_root() {
  return std::filesystem::path(__FILE__).parent_path().parent_path();
}

std::string digits_path(const char* name) {
  return (repo_root() / "data" / name).string();
}

// Minimal but complete idx-backed dataset section pointing at the bundled
// digits files.
std::string digits_dataset_json() {
  return std::string("\"dataset\": {\"kind\": \"idx\",") +
         "\"images\": \"" + digits_path("digits-train-images.idx") + "\"," +
         "\"labels\": \"" + digits_path("digits-train-labels.idx") + "\"," +
         "\"test_images\": \"" + digits_path("digits-test-images.idx") +
         "\"," + "\"test_labels\": \"" + digits_path("digits-test-labels.idx") +
         "\"," + "\"class_pairs\": [[0,1],[2,3]]," +
         "\"train_samples\": 100, \"test_samples\": 50}";
}

}  // namespace

TEST_CASE("an empty config parses to pure defaults") {
  const ExperimentConfig cfg = parse_config("{}");
  CHECK(cfg.scenario.cells() == 2);
  CHECK(cfg.scenario.devices_per_cell == 4);
  CHECK(cfg.scenario.antennas == 8);
  CHECK(cfg.ris.elements == 10);
  CHECK(cfg.training.rounds == 200);
  CHECK(cfg.training.modes.size() == 3);
  CHECK(cfg.dataset.kind == "synthetic");
  CHECK(cfg.q_values.size() == 11);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
}

TEST_CASE("the canonical echo is a fixpoint of parsing") {
  const ExperimentConfig a = parse_config(
      "{\"scenario\": {\"antennas\": 3, \"noise_ul_dbm\": -3.5},"
      " \"training\": {\"lambda\": 0.01}, \"seeds\": [4, 9]}");
  const std::string text = canonical_config_text(a);
  const ExperimentConfig b = parse_config(text);
  CHECK(canonical_config_text(b) == text);
}

TEST_CASE("unit-suffixed keys convert to linear scale exactly once") {
  const ExperimentConfig cfg = parse_config(
      "{\"scenario\": {\"power_ul_dbm\": 30, \"power_dl_dbm\": 0,"
      " \"noise_ul_dbm\": -10, \"noise_dl_dbm\": -30,"
      " \"rician_factor_db\": 5, \"wavelength_m\": 0.25}}");
  const ChannelStack stack = make_stack(cfg, 1);
  CHECK(stack.p_ul == doctest::Approx(1.0));
  CHECK(stack.p_dl == doctest::Approx(1e-3));
  CHECK(stack.noise_ul == doctest::Approx(1e-4));
  CHECK(stack.noise_dl == doctest::Approx(1e-6));
  CHECK(stack.fading.rician_factor == doctest::Approx(3.16227766017));
  CHECK(stack.fading.wavelength_m == 0.25);
  CHECK(stack.topology.cells() == 2);
  CHECK(stack.topology.devices() == 8);
  CHECK(stack.topology.antennas == 8);
  CHECK(stack.topology.elements == 10);
}

TEST_CASE("unknown keys are typo-safe rejections") {
  CHECK_THROWS_WITH_AS(parse_config("{\"scenari\": {}}"),
                       doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\"scenario\": {\"noise_ul_db\": 0}}"),
                       doctest::Contains("noise_ul_db"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\"training\": {\"mode\": \"x\"}}"),
                       doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_AS(parse_config("not json at all"), ConfigError);
}

TEST_CASE("cross-field validation catches inconsistent configs") {
  CHECK_THROWS_AS(parse_config("{\"scenario\": {\"devices_per_cell\": 0}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("{\"training\": {\"lambda\": 0}}"),
                  ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config("{\"training\": {\"modes\": [\"warp\"]}}"),
      doctest::Contains("unknown channel mode"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"q_values\": [1, 1]}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"q_values\": []}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"seeds\": []}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"seeds\": [3, 3]}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"kappa_list\": [[0.9, 0.9]]}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("{\"dataset\": {\"kind\": \"csv\"}}"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_config("{\"dataset\": {\"partition\": \"diagonal\"}}"),
      ConfigError);
  // Four devices cannot split a three-wide feature vector.
  CHECK_THROWS_AS(parse_config("{\"dataset\": {\"synthetic_dim\": 3}}"),
                  ConfigError);
  // Referenced idx files must exist at validation time.
  CHECK_THROWS_WITH_AS(
      parse_config("{\"dataset\": {\"kind\": \"idx\","
                   " \"images\": \"/nonexistent/i.idx\","
                   " \"labels\": \"/nonexistent/l.idx\","
                   " \"test_images\": \"/nonexistent/ti.idx\","
                   " \"test_labels\": \"/nonexistent/tl.idx\","
                   " \"class_pairs\": [[0,1],[2,3]]}}"),
      doctest::Contains("not found"), ConfigError);
  // One class pair per cell.
  CHECK_THROWS_AS(parse_config("{" + digits_dataset_json() +
                               ", \"scenario\": {\"bs_positions_m\":"
                               " [[0,0],[40,0],[80,0]]}}"),
                  ConfigError);
}

TEST_CASE("relative dataset paths resolve against the config directory") {
  const auto dir =
      std::filesystem::temp_directory_path() / "airfl_cfg_paths";
  std::filesystem::create_directories(dir);
  for (const char* name : {"i.idx", "l.idx", "ti.idx", "tl.idx"})
    std::ofstream(dir / name) << "x";
  const std::string text =
      "{\"dataset\": {\"kind\": \"idx\", \"images\": \"i.idx\","
      " \"labels\": \"l.idx\", \"test_images\": \"ti.idx\","
      " \"test_labels\": \"tl.idx\", \"class_pairs\": [[0,1],[2,3]]}}";
  std::ofstream(dir / "cfg.json") << text;

  const ExperimentConfig cfg = load_config((dir / "cfg.json").string());
  CHECK(cfg.dataset.images == (dir / "i.idx").string());
  CHECK(cfg.dataset.test_labels == (dir / "tl.idx").string());
}

TEST_CASE("channel mode names round-trip") {
  for (const char* name : {"noiseless", "single-cell", "no-ris", "star-ris"})
    CHECK(to_string(channel_mode_from_string(name)) == name);
  CHECK_THROWS_AS(channel_mode_from_string("quantum"), ConfigError);
}

TEST_CASE("synthetic task bundles are seed-deterministic and standardized") {
  const ExperimentConfig cfg = parse_config(
      "{\"scenario\": {\"devices_per_cell\": 3},"
      " \"dataset\": {\"synthetic_dim\": 6, \"train_samples\": 30,"
      " \"test_samples\": 12}}");
  const TaskBundle a = build_tasks(cfg, 9);
  REQUIRE(a.train.size() == 2);
  REQUIRE(a.test.size() == 2);
  for (std::size_t m = 0; m < 2; ++m) {
    a.train[m].validate();
    a.test[m].validate();
    CHECK(a.train[m].samples() == 30);
    CHECK(a.test[m].samples() == 12);
    CHECK(a.train[m].devices() == 3);
    CHECK(a.train[m].dim() == 6);
    // Scaler fitted on the training split: centered, unit variance.
    const RMat X = a.train[m].concatenated();
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      CHECK(std::abs(X.col(c).mean()) < 1e-12);
      const double var = X.col(c).squaredNorm() / 30.0 -
                         X.col(c).mean() * X.col(c).mean();
      CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  // Cells pose different tasks, reruns reproduce them exactly.
  CHECK((a.train[0].concatenated() - a.train[1].concatenated()).norm() > 1.0);
  const TaskBundle b = build_tasks(cfg, 9);
  CHECK((a.train[0].concatenated() - b.train[0].concatenated()).norm() == 0.0);
  CHECK((a.test[1].concatenated() - b.test[1].concatenated()).norm() == 0.0);
  const TaskBundle c = build_tasks(cfg, 10);
  CHECK((a.train[0].concatenated() - c.train[0].concatenated()).norm() > 0.0);
}

TEST_CASE("idx task bundles filter the configured class pair per cell") {
  const ExperimentConfig cfg =
      parse_config("{" + digits_dataset_json() + "}");
  const TaskBundle bundle = build_tasks(cfg, 3);
  REQUIRE(bundle.train.size() == 2);
  for (std::size_t m = 0; m < 2; ++m) {
    bundle.train[m].validate();
    CHECK(bundle.train[m].samples() == 100);
    CHECK(bundle.test[m].samples() == 50);
    CHECK(bundle.train[m].dim() == 64);
    CHECK(bundle.train[m].devices() == 4);
    // Binary relabeling holds regardless of the source digit pair.
    for (Eigen::Index i = 0; i < 100; ++i) {
      const double y = bundle.train[m].labels(i);
      CHECK((y == 0.0 || y == 1.0));
    }
  }
  const TaskBundle again = build_tasks(cfg, 3);
  CHECK((bundle.train[0].concatenated() - again.train[0].concatenated())
            .norm() == 0.0);
  CHECK((bundle.train[1].labels - again.train[1].labels).norm() == 0.0);
}

TEST_CASE("the config hash reacts to every section") {
  const std::string base = canonical_config_text(parse_config("{}"));
  const char* edits[] = {
      "{\"scenario\": {\"antennas\": 9}}",
      "{\"ris\": {\"elements\": 11}}",
      "{\"optimizer\": {\"max_outer\": 11}}",
      "{\"training\": {\"rounds\": 201}}",
      "{\"dataset\": {\"train_samples\": 501}}",
      "{\"q_values\": [0, 1]}",
      "{\"seeds\": [2]}",
      "{\"output_dir\": \"elsewhere\"}",
  };
  for (const char* text : edits)
    CHECK(canonical_config_text(parse_config(text)) != base);
}

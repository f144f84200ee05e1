#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>

#include <json.hpp>

#include "airfl/experiment.hpp"
#include "airfl/rng.hpp"

using namespace airfl;

namespace {

// Small two-cell scenario with loose optimizer caps; fast enough to sweep
// and train inside a unit test.
ExperimentConfig tiny_config() {
  return parse_config(
      "{\"scenario\": {\"devices_per_cell\": 2, \"antennas\": 2,"
      "  \"noise_ul_dbm\": 0, \"noise_dl_dbm\": 0},"
      " \"ris\": {\"elements\": 3},"
      " \"optimizer\": {\"max_outer\": 2, \"sca_max_iters\": 8,"
      "  \"phase_max_passes\": 1, \"phase_grid_points\": 16},"
      " \"training\": {\"rounds\": 3, \"learning_rate\": 0.05,"
      "  \"modes\": [\"noiseless\", \"star-ris\"]},"
      " \"dataset\": {\"synthetic_dim\": 4, \"train_samples\": 16,"
      "  \"test_samples\": 8},"
      " \"q_values\": [3, 0, 1],"
      " \"seeds\": [1, 2, 3]}");
}

double cell_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("csv tables enforce their schema") {
  CsvTable t({"a", "b"});
  t.add(1).add(2.5);
  t.end_row();
  CHECK(t.rows() == 1);
  CHECK(t.text() == "a,b\n1,2.5\n");

  SUBCASE("row length must match the header") {
    t.add(3);
    CHECK_THROWS_AS(t.end_row(), ConfigError);
  }
  SUBCASE("rows cannot overflow the header") {
    t.add(1).add(2);
    CHECK_THROWS_AS(t.add(3), ConfigError);
  }
  SUBCASE("numeric cells must be finite") {
    CHECK_THROWS_AS(t.add(std::nan("")), ConfigError);
    CHECK_THROWS_AS(t.add(INFINITY), ConfigError);
  }
  SUBCASE("text cells must not smuggle separators") {
    CHECK_THROWS_AS(t.add("x,y"), ConfigError);
    CHECK_THROWS_AS(t.add("x\ny"), ConfigError);
  }
  SUBCASE("tables need at least one column") {
    CHECK_THROWS_AS(CsvTable(std::vector<std::string>{}), ConfigError);
  }
}

TEST_CASE("doubles are formatted as shortest round-trip decimals") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5) == "-2.5");
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    const double v = std::exp(rng.uniform(-40.0, 40.0)) *
                     (rng.uniform() < 0.5 ? -1.0 : 1.0);
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("the config hash uses reference fnv1a values") {
  // Published FNV-1a 64-bit test vectors.
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
}

TEST_CASE("the element sweep's averaged error never rises with more elements") {
  const ExperimentConfig cfg = tiny_config();
  const MseSweepResult result = run_mse_sweep(cfg, cfg.q_values, 1);
  CHECK(result.failures == 0);
  CHECK(result.q_values == std::vector<Eigen::Index>{0, 1, 3});
  REQUIRE(result.points.size() == 9);

  for (std::size_t si = 0; si < result.seeds.size(); ++si) {
    double prev_ul = INFINITY, prev_dl = INFINITY;
    for (std::size_t qi = 0; qi < result.q_values.size(); ++qi) {
      const auto& pt = result.points[si * result.q_values.size() + qi];
      REQUIRE(pt.ok);
      CHECK(pt.q == result.q_values[qi]);
      CHECK(pt.mse_ul.size() == 2);
      const double ul = cell_mean(pt.mse_ul);
      const double dl = cell_mean(pt.mse_dl);
      CHECK(ul <= prev_ul + 1e-12);
      CHECK(dl <= prev_dl + 1e-12);
      prev_ul = ul;
      prev_dl = dl;
    }
  }

  const CsvTable table = mse_sweep_table(result);
  CHECK(table.rows() == 9 * 2);
  CHECK(table.columns() ==
        std::vector<std::string>{"q", "seed", "cell", "mse_ul", "mse_dl",
                                 "zeta_ul", "zeta_dl"});
}

TEST_CASE("sweep results are byte-identical whatever the worker count") {
  const ExperimentConfig cfg = tiny_config();
  const std::string serial = mse_sweep_table(run_mse_sweep(cfg, cfg.q_values, 1)).text();
  const std::string threaded =
      mse_sweep_table(run_mse_sweep(cfg, cfg.q_values, 4)).text();
  CHECK(serial == threaded);
  CHECK(serial.substr(0, serial.find('\n')) ==
        "q,seed,cell,mse_ul,mse_dl,zeta_ul,zeta_dl");
}

TEST_CASE("a training suite runs every mode-seed pairing to completion") {
  ExperimentConfig cfg = tiny_config();
  cfg.seeds = {1, 2};
  cfg.validate();
  const TrainingSuite suite = run_training(cfg, 2);
  CHECK(suite.failures == 0);
  REQUIRE(suite.runs.size() == 4);
  for (const auto& run : suite.runs) {
    CHECK(run.ok);
    CHECK(run.result.history.size() == 3);
    CHECK(run.final_loss.size() == 2);
    CHECK(run.result.premise_ok);
  }
  // Modes pair on the same seed list, in config order.
  CHECK(suite.runs[0].mode == "noiseless");
  CHECK(suite.runs[1].seed == 2);
  CHECK(suite.runs[2].mode == "star-ris");

  const CsvTable rounds = training_rounds_table(suite);
  const CsvTable summary = training_summary_table(suite);
  CHECK(rounds.rows() == 4 * 3 * 2);
  CHECK(summary.rows() == 4 * 2);
  CHECK(rounds.columns()[0] == "round");
  CHECK(summary.columns()[3] == "final_loss");

  const TrainingSuite again = run_training(cfg, 4);
  CHECK(training_rounds_table(again).text() == rounds.text());
  CHECK(training_summary_table(again).text() == summary.text());
}

TEST_CASE("zero training rounds leave a header-only table and initial metrics") {
  ExperimentConfig cfg = tiny_config();
  cfg.training.rounds = 0;
  cfg.training.modes = {"noiseless"};
  cfg.seeds = {5};
  cfg.validate();
  const TrainingSuite suite = run_training(cfg, 1);
  CHECK(suite.failures == 0);
  REQUIRE(suite.runs.size() == 1);

  const CsvTable rounds = training_rounds_table(suite);
  CHECK(rounds.rows() == 0);
  CHECK(rounds.text() == "round,cell,mode,loss,accuracy,gap,bound,seed\n");

  const CsvTable summary = training_summary_table(suite);
  CHECK(summary.rows() == 2);
  // All-zero weights score ln 2 on any balanced logistic objective.
  for (std::size_t m = 0; m < 2; ++m) {
    CHECK(suite.runs[0].final_loss[m] == doctest::Approx(std::log(2.0)));
    CHECK(suite.runs[0].final_accuracy[m] >= 0.0);
    CHECK(suite.runs[0].final_accuracy[m] <= 1.0);
  }
}

TEST_CASE("pareto rows satisfy the profiled-gap identity") {
  ExperimentConfig cfg = tiny_config();
  cfg.seeds = {1, 2};
  cfg.validate();
  const std::vector<ProfilingVector> kappas = {
      ProfilingVector{{0.5, 0.5}}, ProfilingVector{{0.3, 0.7}}};
  const ParetoResult result = run_pareto(cfg, kappas, 2);
  CHECK(result.failures == 0);
  REQUIRE(result.per_seed.size() == 2);
  for (const auto& per_seed : result.per_seed) {
    REQUIRE(per_seed.points.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      const GapPoint& pt = per_seed.points[i];
      REQUIRE(pt.ok);
      const double zeta = pt.zeta_ul + pt.zeta_dl;
      for (std::size_t m = 0; m < 2; ++m)
        CHECK(pt.gaps[m] ==
              doctest::Approx(kappas[i].kappa[m] * zeta).epsilon(1e-12));
    }
    // Uniform weights split the gap evenly; the skewed vector tilts it.
    CHECK(per_seed.points[0].gaps[0] ==
          doctest::Approx(per_seed.points[0].gaps[1]));
    CHECK(per_seed.points[1].gaps[1] > per_seed.points[1].gaps[0]);
  }

  const CsvTable table = pareto_table(result);
  CHECK(table.rows() == 4);
  CHECK(table.columns() ==
        std::vector<std::string>{"kappa_1", "kappa_2", "delta_1", "delta_2",
                                 "zeta_ul", "zeta_dl", "converged", "seed"});
}

TEST_CASE("per-point failures are logged and excluded from the table") {
  ExperimentConfig cfg = tiny_config();
  cfg.seeds = {1};
  cfg.validate();
  // A zero profiling weight leaves an empty feasible set, so the first
  // point must fail while the second still solves.
  const std::vector<ProfilingVector> kappas = {ProfilingVector{{0.0, 1.0}},
                                               ProfilingVector{{0.5, 0.5}}};
  const ParetoResult result = run_pareto(cfg, kappas, 1);
  CHECK(result.failures == 1);
  REQUIRE(result.per_seed.size() == 1);
  CHECK_FALSE(result.per_seed[0].points[0].ok);
  CHECK(!result.per_seed[0].points[0].error.empty());
  CHECK(result.per_seed[0].points[1].ok);
  CHECK(pareto_table(result).rows() == 1);
}

TEST_CASE("manifests hash the canonical config and list every output") {
  const ExperimentConfig cfg = tiny_config();
  CsvTable t({"x"});
  t.add(1.0);
  t.end_row();
  const std::string a = manifest_text(cfg, "mse-sweep", {{"out.csv", &t}});
  const std::string b = manifest_text(cfg, "mse-sweep", {{"out.csv", &t}});
  CHECK(a == b);

  const auto j = nlohmann::json::parse(a);
  CHECK(j.at("command") == "mse-sweep");
  CHECK(j.at("code_version") == kCodeVersion);
  CHECK(j.at("config_hash") ==
        hex64(fnv1a64(canonical_config_text(cfg))));
  CHECK(j.at("seeds").get<std::vector<std::uint64_t>>() == cfg.seeds);
  CHECK(j.at("outputs").at("out.csv").at("rows") == 1);
  CHECK(j.at("outputs").at("out.csv").at("columns")[0] == "x");

  ExperimentConfig other = cfg;
  other.training.rounds += 1;
  CHECK(manifest_text(other, "mse-sweep", {{"out.csv", &t}}) != a);
}

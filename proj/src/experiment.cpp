#include "airfl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "airfl/aircomp.hpp"
#include "airfl/rng.hpp"

namespace airfl {

namespace {

constexpr std::uint64_t kChannelStream = 0x6368616eULL;

// Work items are claimed off a shared counter; every result lands in a
// preallocated slot keyed by item index, so output content never depends on
// which worker ran what.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
        body(i);
    });
  for (auto& t : pool) t.join();
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

StarRisConfig pad_config(const StarRisConfig& c, Eigen::Index q) {
  StarRisConfig out = StarRisConfig::all_off(q);
  for (std::size_t i = 0; i < c.mode.size(); ++i) {
    out.mode[i] = c.mode[i];
    out.phase_t[i] = c.phase_t[i];
    out.phase_r[i] = c.phase_r[i];
  }
  return out;
}

// Off-state elements contribute nothing to the cascaded channel, so the
// padded design reproduces the smaller one's MSE exactly. That makes it a
// always-available fallback candidate and the anchor of the sweep's
// monotonicity.
TransceiverSolution extend_solution(const TransceiverSolution& s,
                                    Eigen::Index q) {
  TransceiverSolution out = s;
  out.ris_ul = pad_config(s.ris_ul, q);
  out.ris_dl = pad_config(s.ris_dl, q);
  return out;
}

double uplink_score(const TransceiverSolution& s, const ChannelSet& ch,
                    const NetworkTopology& topo) {
  const auto h = combined_all(ch, topo, s.ris_ul);
  return mean(uplink_mse(s.uplink, h, topo));
}

double downlink_score(const TransceiverSolution& s, const ChannelSet& ch,
                      const NetworkTopology& topo) {
  const auto h = combined_all(ch, topo, s.ris_dl);
  return mean(downlink_mse(s.downlink, h, topo));
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> columns)
    : columns_(std::move(columns)) {
  if (columns_.empty()) throw ConfigError("csv needs at least one column");
}

void CsvTable::push_cell(std::string cell) {
  if (pending_.size() >= columns_.size())
    throw ConfigError("csv row overflows its " +
                      std::to_string(columns_.size()) + " columns");
  pending_.push_back(std::move(cell));
}

CsvTable& CsvTable::add(double v) {
  if (!std::isfinite(v))
    throw ConfigError("csv cell in column \"" + columns_[pending_.size()] +
                      "\" is not finite");
  push_cell(format_double(v));
  return *this;
}

CsvTable& CsvTable::add(const std::string& v) {
  if (v.find_first_of(",\"\n\r") != std::string::npos)
    throw ConfigError("csv text cell contains a separator: " + v);
  push_cell(v);
  return *this;
}

void CsvTable::end_row() {
  if (pending_.size() != columns_.size())
    throw ConfigError("csv row has " + std::to_string(pending_.size()) +
                      " cells, expected " + std::to_string(columns_.size()));
  rows_.push_back(std::move(pending_));
  pending_.clear();
}

std::string CsvTable::text() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i > 0) out += ',';
    out += columns_[i];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

void CsvTable::write_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  const std::string body = text();
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  f.close();
  if (!f) throw ConfigError("write failed: " + path);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[16];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, 16);
  const std::string digits(buf, res.ptr);
  return std::string(16 - digits.size(), '0') + digits;
}

MseSweepResult run_mse_sweep(const ExperimentConfig& config,
                             std::vector<Eigen::Index> q_values,
                             int threads) {
  if (q_values.empty()) throw ConfigError("q_values must not be empty");
  for (auto q : q_values)
    if (q < 0) throw ConfigError("q_values entries must be >= 0");
  std::sort(q_values.begin(), q_values.end());
  q_values.erase(std::unique(q_values.begin(), q_values.end()),
                 q_values.end());

  const Eigen::Index q_max = q_values.back();
  const std::size_t nq = q_values.size();
  const std::size_t cells = config.scenario.cells();
  const AlternatingOptions opts = make_alternating_options(config.optimizer);
  const double p_ul = dbm_to_watts(config.scenario.power_ul_dbm);
  const double p_dl = dbm_to_watts(config.scenario.power_dl_dbm);
  const double noise_ul = dbm_to_watts(config.scenario.noise_ul_dbm);
  const double noise_dl = dbm_to_watts(config.scenario.noise_dl_dbm);
  const ProfilingVector kappa{
      std::vector<double>(cells, 1.0 / static_cast<double>(cells))};

  MseSweepResult result;
  result.q_values = q_values;
  result.seeds = config.seeds;
  result.cells = cells;
  result.points.assign(config.seeds.size() * nq, MseSweepPoint{});

  parallel_for(config.seeds.size(), threads, [&](std::size_t si) {
    const std::uint64_t seed = config.seeds[si];
    for (std::size_t qi = 0; qi < nq; ++qi) {
      auto& pt = result.points[si * nq + qi];
      pt.q = q_values[qi];
      pt.seed = seed;
    }

    NetworkTopology topo;
    ChannelSet ch_full;
    try {
      topo = make_topology(config, q_max, seed);
      Rng ch_rng(derive_seed(seed, {kChannelStream}));
      ch_full = sample_channels(topo, make_fading(config.scenario), ch_rng);
    } catch (const std::exception& e) {
      for (std::size_t qi = 0; qi < nq; ++qi)
        result.points[si * nq + qi].error = e.what();
      return;
    }

    bool have_prev = false;
    TransceiverSolution prev;
    for (std::size_t qi = 0; qi < nq; ++qi) {
      auto& pt = result.points[si * nq + qi];
      NetworkTopology topo_q = topo;
      topo_q.elements = static_cast<std::size_t>(pt.q);
      const ChannelSet ch_q = restrict_elements(ch_full, pt.q);

      std::vector<TransceiverSolution> candidates;
      std::string last_error = "no candidate design";
      try {
        candidates.push_back(alternating_optimize(
            ch_q, topo_q, kappa, p_ul, p_dl, noise_ul, noise_dl, opts));
      } catch (const std::exception& e) {
        last_error = e.what();
      }
      if (have_prev) {
        TransceiverSolution ext = extend_solution(prev, pt.q);
        try {
          candidates.push_back(alternating_optimize(ch_q, topo_q, kappa, p_ul,
                                                    p_dl, noise_ul, noise_dl,
                                                    opts, nullptr, &ext));
        } catch (const std::exception& e) {
          last_error = e.what();
        }
        candidates.push_back(std::move(ext));
      }
      if (candidates.empty()) {
        pt.error = last_error;
        continue;
      }

      const double inf = std::numeric_limits<double>::infinity();
      std::size_t best_ul = candidates.size(), best_dl = candidates.size();
      double score_ul = inf, score_dl = inf;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        try {
          const double su = uplink_score(candidates[i], ch_q, topo_q);
          if (su < score_ul) {
            score_ul = su;
            best_ul = i;
          }
        } catch (const std::exception&) {
        }
        try {
          const double sd = downlink_score(candidates[i], ch_q, topo_q);
          if (sd < score_dl) {
            score_dl = sd;
            best_dl = i;
          }
        } catch (const std::exception&) {
        }
      }
      if (best_ul == candidates.size() || best_dl == candidates.size()) {
        pt.error = "every candidate design is degenerate";
        continue;
      }

      TransceiverSolution chosen;
      chosen.uplink = candidates[best_ul].uplink;
      chosen.ris_ul = candidates[best_ul].ris_ul;
      chosen.zeta_ul = candidates[best_ul].zeta_ul;
      chosen.downlink = candidates[best_dl].downlink;
      chosen.ris_dl = candidates[best_dl].ris_dl;
      chosen.zeta_dl = candidates[best_dl].zeta_dl;

      const auto h_ul = combined_all(ch_q, topo_q, chosen.ris_ul);
      const auto h_dl = combined_all(ch_q, topo_q, chosen.ris_dl);
      pt.mse_ul = uplink_mse(chosen.uplink, h_ul, topo_q);
      const auto per_device = downlink_mse(chosen.downlink, h_dl, topo_q);
      pt.mse_dl.assign(cells, 0.0);
      for (std::size_t m = 0; m < cells; ++m) {
        const auto members = topo_q.devices_in_cell(m);
        double acc = 0.0;
        for (auto k : members) acc += per_device[k];
        pt.mse_dl[m] = members.empty()
                           ? 0.0
                           : acc / static_cast<double>(members.size());
      }
      pt.zeta_ul = chosen.zeta_ul;
      pt.zeta_dl = chosen.zeta_dl;
      pt.ok = true;

      prev = std::move(chosen);
      have_prev = true;
    }
  });

  for (const auto& pt : result.points)
    if (!pt.ok) ++result.failures;
  return result;
}

CsvTable mse_sweep_table(const MseSweepResult& result) {
  CsvTable t({"q", "seed", "cell", "mse_ul", "mse_dl", "zeta_ul", "zeta_dl"});
  const std::size_t nq = result.q_values.size();
  for (std::size_t qi = 0; qi < nq; ++qi) {
    for (std::size_t si = 0; si < result.seeds.size(); ++si) {
      const auto& pt = result.points[si * nq + qi];
      if (!pt.ok) continue;
      for (std::size_t m = 0; m < result.cells; ++m) {
        t.add(static_cast<long long>(pt.q))
            .add(pt.seed)
            .add(m)
            .add(pt.mse_ul[m])
            .add(pt.mse_dl[m])
            .add(pt.zeta_ul)
            .add(pt.zeta_dl);
        t.end_row();
      }
    }
  }
  return t;
}

TrainingSuite run_training(const ExperimentConfig& config, int threads) {
  const auto& modes = config.training.modes;
  if (modes.empty()) throw ConfigError("training.modes must not be empty");
  const std::size_t n_seeds = config.seeds.size();
  const std::size_t cells = config.scenario.cells();

  // One dataset draw per seed, shared by every mode, so the comparison set
  // trains on identical tasks.
  std::vector<TaskBundle> bundles(n_seeds);
  std::vector<std::string> bundle_errors(n_seeds);
  parallel_for(n_seeds, threads, [&](std::size_t si) {
    try {
      bundles[si] = build_tasks(config, config.seeds[si]);
    } catch (const std::exception& e) {
      bundle_errors[si] = e.what();
    }
  });

  TrainingSuite suite;
  suite.runs.assign(modes.size() * n_seeds, TrainingRun{});
  parallel_for(suite.runs.size(), threads, [&](std::size_t idx) {
    const std::size_t mi = idx / n_seeds;
    const std::size_t si = idx % n_seeds;
    TrainingRun& run = suite.runs[idx];
    run.mode = modes[mi];
    run.seed = config.seeds[si];
    if (!bundle_errors[si].empty()) {
      run.error = "dataset: " + bundle_errors[si];
      return;
    }
    try {
      TrainConfig tc;
      tc.rounds = config.training.rounds;
      tc.learning_rate = config.training.learning_rate;
      tc.lambda = config.training.lambda;
      tc.mode = channel_mode_from_string(run.mode);
      tc.seed = run.seed;
      tc.reoptimize_each_round = config.training.reoptimize_each_round;
      tc.design = make_alternating_options(config.optimizer);
      const ChannelStack stack = make_stack(config, run.seed);
      run.result = train(bundles[si].train, bundles[si].test, stack, tc);

      if (!run.result.history.empty()) {
        run.final_loss = run.result.history.back().loss;
        run.final_accuracy = run.result.history.back().accuracy;
      } else {
        run.final_loss.resize(cells);
        run.final_accuracy.resize(cells);
        for (std::size_t m = 0; m < cells; ++m) {
          run.final_loss[m] = objective_value(run.result.state.models[m],
                                              bundles[si].train[m], tc.lambda);
          run.final_accuracy[m] = classification_accuracy(
              run.result.state.models[m], bundles[si].test[m]);
        }
      }
      run.ok = !run.result.aborted;
      if (run.result.aborted) run.error = run.result.error;
    } catch (const std::exception& e) {
      run.ok = false;
      run.error = e.what();
    }
  });

  for (const auto& run : suite.runs)
    if (!run.ok) ++suite.failures;
  return suite;
}

CsvTable training_rounds_table(const TrainingSuite& suite) {
  CsvTable t({"round", "cell", "mode", "loss", "accuracy", "gap", "bound",
              "seed"});
  for (const auto& run : suite.runs) {
    for (std::size_t r = 0; r < run.result.history.size(); ++r) {
      const auto& rec = run.result.history[r];
      for (std::size_t m = 0; m < rec.loss.size(); ++m) {
        t.add(r)
            .add(m)
            .add(run.mode)
            .add(rec.loss[m])
            .add(rec.accuracy[m])
            .add(rec.gap[m])
            .add(rec.bound[m])
            .add(run.seed);
        t.end_row();
      }
    }
  }
  return t;
}

CsvTable training_summary_table(const TrainingSuite& suite) {
  CsvTable t({"mode", "seed", "cell", "final_loss", "final_accuracy",
              "premise_ok", "aborted"});
  for (const auto& run : suite.runs) {
    for (std::size_t m = 0; m < run.final_loss.size(); ++m) {
      t.add(run.mode)
          .add(run.seed)
          .add(m)
          .add(run.final_loss[m])
          .add(run.final_accuracy[m])
          .add(run.result.premise_ok)
          .add(run.result.aborted);
      t.end_row();
    }
  }
  return t;
}

ParetoResult run_pareto(const ExperimentConfig& config,
                        const std::vector<ProfilingVector>& kappa_list,
                        int threads) {
  if (kappa_list.empty())
    throw ConfigError("pareto needs at least one profiling vector");
  const std::size_t cells = config.scenario.cells();
  for (const auto& pv : kappa_list) pv.validate(cells);
  const AlternatingOptions opts = make_alternating_options(config.optimizer);
  const double p_ul = dbm_to_watts(config.scenario.power_ul_dbm);
  const double p_dl = dbm_to_watts(config.scenario.power_dl_dbm);
  const double noise_ul = dbm_to_watts(config.scenario.noise_ul_dbm);
  const double noise_dl = dbm_to_watts(config.scenario.noise_dl_dbm);

  ParetoResult result;
  result.cells = cells;
  result.per_seed.assign(config.seeds.size(), ParetoSeedResult{});

  parallel_for(config.seeds.size(), threads, [&](std::size_t si) {
    auto& out = result.per_seed[si];
    out.seed = config.seeds[si];
    try {
      const NetworkTopology topo =
          make_topology(config, config.ris.elements, out.seed);
      Rng rng(derive_seed(out.seed, {kChannelStream}));
      const ChannelSet ch =
          sample_channels(topo, make_fading(config.scenario), rng);
      out.points = gap_tradeoff_sweep(ch, topo, kappa_list, p_ul, p_dl,
                                      noise_ul, noise_dl, opts);
    } catch (const std::exception& e) {
      out.points.assign(kappa_list.size(), GapPoint{});
      for (std::size_t i = 0; i < kappa_list.size(); ++i) {
        out.points[i].kappa = kappa_list[i].kappa;
        out.points[i].error = e.what();
      }
    }
  });

  for (const auto& per_seed : result.per_seed)
    for (const auto& pt : per_seed.points)
      if (!pt.ok) ++result.failures;
  return result;
}

CsvTable pareto_table(const ParetoResult& result) {
  std::vector<std::string> cols;
  for (std::size_t m = 1; m <= result.cells; ++m)
    cols.push_back("kappa_" + std::to_string(m));
  for (std::size_t m = 1; m <= result.cells; ++m)
    cols.push_back("delta_" + std::to_string(m));
  cols.insert(cols.end(), {"zeta_ul", "zeta_dl", "converged", "seed"});
  CsvTable t(std::move(cols));
  for (const auto& per_seed : result.per_seed) {
    for (const auto& pt : per_seed.points) {
      if (!pt.ok) continue;
      for (double k : pt.kappa) t.add(k);
      for (double g : pt.gaps) t.add(g);
      t.add(pt.zeta_ul).add(pt.zeta_dl).add(pt.converged ? 1 : 0);
      t.add(per_seed.seed);
      t.end_row();
    }
  }
  return t;
}

std::string manifest_text(
    const ExperimentConfig& config, const std::string& command,
    const std::vector<std::pair<std::string, const CsvTable*>>& outputs) {
  nlohmann::json j;
  j["command"] = command;
  j["code_version"] = kCodeVersion;
  j["config_hash"] = hex64(fnv1a64(canonical_config_text(config)));
  j["seeds"] = config.seeds;
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& [name, table] : outputs)
    outs[name] = {{"rows", table->rows()}, {"columns", table->columns()}};
  j["outputs"] = outs;
  return j.dump(2) + "\n";
}

}  // namespace airfl

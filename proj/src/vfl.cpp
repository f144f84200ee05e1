#include "airfl/vfl.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace airfl {

namespace {

// Standardization floor: a constant stream still standardizes to zeros
// instead of dividing by zero, and reconstruction returns the mean.
constexpr double kScaleFloor = 1e-12;

double square(double v) { return v * v; }

// Stable log(1 + e^z); the cross-entropy is softplus(z) - y z.
double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

RVec model_scores(const VerticalModel& model, const VerticalDataset& data) {
  if (model.w.size() != data.devices())
    throw ConfigError("model has " + std::to_string(model.w.size()) +
                      " weight blocks for a " + std::to_string(data.devices()) +
                      "-device task");
  RVec z = RVec::Zero(static_cast<Eigen::Index>(data.samples()));
  for (std::size_t k = 0; k < model.w.size(); ++k)
    z += local_predict(model.w[k], data.blocks[k]);
  return z;
}

ChannelSet isolate_cells(ChannelSet ch, const NetworkTopology& topo) {
  for (std::size_t m = 0; m < ch.direct.size(); ++m)
    for (std::size_t k = 0; k < ch.direct[m].size(); ++k)
      if (topo.cell_of_device[k] != m) ch.direct[m][k].setZero();
  return ch;
}

// Per-round randomness stream id, fixed so other consumers of the same base
// seed cannot collide with the training loop.
constexpr std::uint64_t kRoundStream = 0x747261696eULL;

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Auxiliary auxiliary_g(double z, double y) {
  const double s = sigmoid(z);
  return {s - y, s * (1.0 - s)};
}

RVec local_predict(const RVec& w_k, const RMat& x_k) {
  if (w_k.size() != x_k.cols())
    throw ConfigError("weight block has " + std::to_string(w_k.size()) +
                      " entries but the feature block has " +
                      std::to_string(x_k.cols()) + " columns");
  return x_k * w_k;
}

RVec partial_gradient(const RVec& g_values, const RMat& x_k, const RVec& w_k,
                      double lambda) {
  if (x_k.rows() == 0) throw ConfigError("gradient over an empty sample set");
  if (g_values.size() != x_k.rows())
    throw ConfigError("got " + std::to_string(g_values.size()) +
                      " loss derivatives for " + std::to_string(x_k.rows()) +
                      " samples");
  if (w_k.size() != x_k.cols())
    throw ConfigError("weight block has " + std::to_string(w_k.size()) +
                      " entries but the feature block has " +
                      std::to_string(x_k.cols()) + " columns");
  return x_k.transpose() * g_values / static_cast<double>(x_k.rows()) +
         lambda * w_k;
}

RVec VerticalModel::concatenated() const {
  Eigen::Index total = 0;
  for (const RVec& block : w) total += block.size();
  RVec out(total);
  Eigen::Index at = 0;
  for (const RVec& block : w) {
    out.segment(at, block.size()) = block;
    at += block.size();
  }
  return out;
}

VerticalModel VerticalModel::zeros_like(const VerticalDataset& data) {
  VerticalModel model;
  model.w.reserve(data.blocks.size());
  for (const RMat& block : data.blocks)
    model.w.push_back(RVec::Zero(block.cols()));
  return model;
}

double objective_value(const VerticalModel& model, const VerticalDataset& data,
                       double lambda) {
  if (data.samples() == 0) throw ConfigError("objective over an empty task");
  const RVec z = model_scores(model, data);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    loss += softplus(z(i)) - data.labels(i) * z(i);
  loss /= static_cast<double>(z.size());
  double reg = 0.0;
  for (const RVec& block : model.w) reg += block.squaredNorm();
  return loss + 0.5 * lambda * reg;
}

double classification_accuracy(const VerticalModel& model,
                               const VerticalDataset& data) {
  if (data.samples() == 0) throw ConfigError("accuracy over an empty task");
  const RVec z = model_scores(model, data);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double predicted = z(i) >= 0.0 ? 1.0 : 0.0;
    if (predicted == data.labels(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(z.size());
}

ConvergenceParams estimate_convergence_params(const VerticalDataset& data,
                                              double lambda) {
  if (lambda <= 0.0)
    throw ConfigError("strong convexity needs a positive regularizer");
  data.validate();
  const RMat x = data.concatenated();

  // Largest eigenvalue of the Gram matrix (1/L) X^T X by matrix-free power
  // iteration with a residual-based stop. A zero feature matrix yields 0.
  double top = 0.0;
  if (x.rows() > 0 && x.cols() > 0) {
    const double samples = static_cast<double>(x.rows());
    Rng rng(derive_seed(0x67726d, {static_cast<std::uint64_t>(x.rows()),
                                   static_cast<std::uint64_t>(x.cols())}));
    RVec v(x.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.gaussian();
    if (v.norm() < kScaleFloor) v.setOnes();
    v.normalize();
    for (int it = 0; it < 10000; ++it) {
      const RVec u = x.transpose() * (x * v) / samples;
      top = v.dot(u);
      if ((u - top * v).norm() <= 1e-6 * std::max(top, kScaleFloor)) break;
      const double len = u.norm();
      if (len < 1e-300) {
        top = 0.0;
        break;
      }
      v = u / len;
    }
  }

  ConvergenceParams params;
  params.alpha = lambda;
  params.beta = lambda + top / 4.0;
  params.rho = 1.0 - params.alpha / params.beta;
  return params;
}

void TrainConfig::validate() const {
  if (rounds < 0) throw ConfigError("round count must be >= 0");
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be > 0");
  if (lambda <= 0.0) throw ConfigError("regularizer must be > 0");
}

std::vector<double> NoiselessTransport::uplink_slot(
    const std::vector<double>& signals, Rng&) {
  if (signals.size() != topo_->devices())
    throw ConfigError("uplink slot carries one scalar per device");
  std::vector<double> sums(topo_->cells(), 0.0);
  for (std::size_t k = 0; k < signals.size(); ++k)
    sums[topo_->cell_of_device[k]] += signals[k];
  return sums;
}

std::vector<double> NoiselessTransport::downlink_slot(
    const std::vector<double>& values, Rng&) {
  if (values.size() != topo_->cells())
    throw ConfigError("downlink slot carries one scalar per cell");
  std::vector<double> received(topo_->devices(), 0.0);
  for (std::size_t k = 0; k < received.size(); ++k)
    received[k] = values[topo_->cell_of_device[k]];
  return received;
}

std::vector<double> NoiselessTransport::uplink_error_power() const {
  return std::vector<double>(topo_->cells(), 0.0);
}

std::vector<double> NoiselessTransport::downlink_error_power() const {
  return std::vector<double>(topo_->devices(), 0.0);
}

AircompTransport::AircompTransport(const NetworkTopology& topo,
                                   UplinkDesign uplink, DownlinkDesign downlink,
                                   CombinedChannels h_ul, CombinedChannels h_dl)
    : topo_(&topo),
      uplink_(std::move(uplink)),
      downlink_(std::move(downlink)),
      h_ul_(std::move(h_ul)),
      h_dl_(std::move(h_dl)) {
  // The beamformers may predate these channel draws (cached designs), so the
  // power-control normalizers are always refreshed here.
  set_normalizers(uplink_, h_ul_, *topo_);
  mse_ul_ = uplink_mse(uplink_, h_ul_, *topo_);
  mse_dl_ = downlink_mse(downlink_, h_dl_, *topo_);
}

std::vector<double> AircompTransport::uplink_slot(
    const std::vector<double>& signals, Rng& rng) {
  return uplink_transmit_round(signals, uplink_, h_ul_, *topo_, rng).estimate;
}

std::vector<double> AircompTransport::downlink_slot(
    const std::vector<double>& values, Rng& rng) {
  return downlink_transmit_round(values, downlink_, h_dl_, *topo_, rng)
      .estimate;
}

std::vector<double> AircompTransport::uplink_error_power() const {
  return mse_ul_;
}

std::vector<double> AircompTransport::downlink_error_power() const {
  return mse_dl_;
}

RoundRecord gd_round(VflState& state, const std::vector<VerticalDataset>& tasks,
                     const NetworkTopology& topo, AnalogTransport& transport,
                     Rng& rng, const TrainConfig& config,
                     const std::vector<VerticalDataset>* test_tasks) {
  const std::size_t cells = topo.cells();
  if (tasks.size() != cells) throw ConfigError("need one task per cell");
  if (state.models.size() != cells)
    throw ConfigError("need one model per cell");
  if (test_tasks != nullptr && test_tasks->size() != cells)
    throw ConfigError("need one test task per cell");

  std::vector<std::vector<std::size_t>> members(cells);
  std::size_t slots = 0;
  for (std::size_t m = 0; m < cells; ++m) {
    members[m] = topo.devices_in_cell(m);
    if (tasks[m].devices() != members[m].size())
      throw ConfigError("cell " + std::to_string(m) + " task has " +
                        std::to_string(tasks[m].devices()) +
                        " blocks for " + std::to_string(members[m].size()) +
                        " devices");
    if (state.models[m].w.size() != members[m].size())
      throw ConfigError("cell " + std::to_string(m) + " model block count");
    slots = std::max(slots, tasks[m].samples());
  }

  const bool standardize = transport.wants_standardization();
  const double mu = config.learning_rate;

  // Local prediction: per-sample inner products at every device, plus the
  // standardization side info. Each device reports its own mean, and the
  // cell shares one scale (the widest device spread) so the over-the-air
  // sum stays invertible and no device exceeds unit signal variance.
  std::vector<std::vector<RVec>> s(cells);
  std::vector<std::vector<double>> offset(cells);
  std::vector<double> up_scale(cells, 1.0);
  for (std::size_t m = 0; m < cells; ++m) {
    const std::size_t local = members[m].size();
    s[m].resize(local);
    offset[m].assign(local, 0.0);
    double widest = 0.0;
    for (std::size_t i = 0; i < local; ++i) {
      s[m][i] = local_predict(state.models[m].w[i], tasks[m].blocks[i]);
      if (standardize && s[m][i].size() > 0) {
        offset[m][i] = s[m][i].mean();
        widest = std::max(
            widest,
            std::sqrt((s[m][i].array() - offset[m][i]).square().mean()));
      }
    }
    if (standardize) up_scale[m] = std::max(widest, kScaleFloor);
  }

  RoundRecord rec;
  rec.ul_error_power.assign(cells, 0.0);
  rec.dl_error_power.assign(cells, 0.0);
  rec.ul_slots.assign(cells, 0);
  rec.side_scalars_per_device = standardize ? 2 : 0;

  // Uplink aggregation, one time slot per sample index. Cells that ran out
  // of samples stay silent (zero signal draws no transmit power).
  std::vector<RVec> g_true(cells), g_hat(cells);
  for (std::size_t m = 0; m < cells; ++m) {
    const Eigen::Index len = static_cast<Eigen::Index>(tasks[m].samples());
    g_true[m] = RVec::Zero(len);
    for (const RVec& stream : s[m]) g_true[m] += stream;
    g_hat[m] = RVec::Zero(len);
    rec.ul_slots[m] = tasks[m].samples();
  }
  for (std::size_t i = 0; i < slots; ++i) {
    std::vector<double> signals(topo.devices(), 0.0);
    for (std::size_t m = 0; m < cells; ++m) {
      if (i >= tasks[m].samples()) continue;
      for (std::size_t j = 0; j < members[m].size(); ++j)
        signals[members[m][j]] =
            (s[m][j](static_cast<Eigen::Index>(i)) - offset[m][j]) /
            up_scale[m];
    }
    const std::vector<double> est = transport.uplink_slot(signals, rng);
    for (std::size_t m = 0; m < cells; ++m) {
      if (i >= tasks[m].samples()) continue;
      double shift = 0.0;
      for (double o : offset[m]) shift += o;
      const double recon = up_scale[m] * est[m] + shift;
      const Eigen::Index at = static_cast<Eigen::Index>(i);
      g_hat[m](at) = recon;
      rec.ul_error_power[m] += square(recon - g_true[m](at));
    }
  }
  for (std::size_t m = 0; m < cells; ++m)
    rec.ul_error_power[m] /= std::max<std::size_t>(tasks[m].samples(), 1);

  // BS side. Only the noisy aggregates and the labels enter here: the loss
  // derivative stream to broadcast, and the curvature stream at the true
  // aggregate kept aside for the gap bookkeeping.
  std::vector<RVec> g_bs(cells), gprime_true(cells);
  for (std::size_t m = 0; m < cells; ++m) {
    const Eigen::Index len = g_hat[m].size();
    g_bs[m].resize(len);
    gprime_true[m].resize(len);
    for (Eigen::Index i = 0; i < len; ++i) {
      g_bs[m](i) = auxiliary_g(g_hat[m](i), tasks[m].labels(i)).value;
      gprime_true[m](i) =
          auxiliary_g(g_true[m](i), tasks[m].labels(i)).derivative;
    }
  }

  // Downlink broadcast of the derivative stream, standardized per cell.
  std::vector<double> dn_offset(cells, 0.0), dn_scale(cells, 1.0);
  if (standardize) {
    for (std::size_t m = 0; m < cells; ++m) {
      if (g_bs[m].size() == 0) continue;
      dn_offset[m] = g_bs[m].mean();
      dn_scale[m] = std::max(
          std::sqrt((g_bs[m].array() - dn_offset[m]).square().mean()),
          kScaleFloor);
    }
  }
  std::vector<RVec> g_dev(topo.devices());
  for (std::size_t m = 0; m < cells; ++m)
    for (std::size_t k : members[m]) g_dev[k] = RVec::Zero(g_bs[m].size());
  for (std::size_t i = 0; i < slots; ++i) {
    std::vector<double> values(cells, 0.0);
    for (std::size_t m = 0; m < cells; ++m)
      if (i < tasks[m].samples())
        values[m] = (g_bs[m](static_cast<Eigen::Index>(i)) - dn_offset[m]) /
                    dn_scale[m];
    const std::vector<double> est = transport.downlink_slot(values, rng);
    for (std::size_t m = 0; m < cells; ++m) {
      if (i >= tasks[m].samples()) continue;
      const Eigen::Index at = static_cast<Eigen::Index>(i);
      for (std::size_t k : members[m]) {
        const double recon = dn_scale[m] * est[k] + dn_offset[m];
        g_dev[k](at) = recon;
        rec.dl_error_power[m] += square(recon - g_bs[m](at));
      }
    }
  }
  for (std::size_t m = 0; m < cells; ++m)
    rec.dl_error_power[m] /=
        std::max<std::size_t>(tasks[m].samples() * members[m].size(), 1);

  // Local model update from the received derivative stream.
  for (std::size_t m = 0; m < cells; ++m)
    for (std::size_t j = 0; j < members[m].size(); ++j) {
      RVec& w = state.models[m].w[j];
      w -= mu * partial_gradient(g_dev[members[m][j]], tasks[m].blocks[j], w,
                                 config.lambda);
    }

  // Closed-form gap for this round: per-device weights at the pre-update
  // iterate, error powers mapped back to raw units through the
  // standardization scales.
  GapWeights weights;
  weights.phi1.assign(topo.devices(), 0.0);
  weights.phi2.assign(topo.devices(), 0.0);
  for (std::size_t m = 0; m < cells; ++m)
    for (std::size_t j = 0; j < members[m].size(); ++j) {
      const std::size_t k = members[m][j];
      const RMat& block = tasks[m].blocks[j];
      for (Eigen::Index i = 0; i < block.rows(); ++i) {
        const double row2 = block.row(i).squaredNorm();
        weights.phi1[k] += square(gprime_true[m](i)) * row2;
        weights.phi2[k] += row2;
      }
    }
  std::vector<double> mse_ul = transport.uplink_error_power();
  std::vector<double> mse_dl = transport.downlink_error_power();
  for (std::size_t m = 0; m < cells; ++m) mse_ul[m] *= square(up_scale[m]);
  for (std::size_t k = 0; k < mse_dl.size(); ++k)
    mse_dl[k] *= square(dn_scale[topo.cell_of_device[k]]);
  rec.gap = cell_gap(weights, mse_ul, mse_dl, topo);

  // Post-update metrics. Accuracy prefers the held-out split when present.
  rec.loss.resize(cells);
  rec.accuracy.resize(cells);
  rec.bound.assign(cells, 0.0);
  for (std::size_t m = 0; m < cells; ++m) {
    rec.loss[m] = objective_value(state.models[m], tasks[m], config.lambda);
    const VerticalDataset& eval =
        test_tasks != nullptr ? (*test_tasks)[m] : tasks[m];
    rec.accuracy[m] = classification_accuracy(state.models[m], eval);
  }
  return rec;
}

CentralizedRun centralized_descent(const VerticalDataset& data, double lambda,
                                   double step, int max_iters, double grad_tol,
                                   bool record_trajectory) {
  data.validate();
  if (data.samples() == 0) throw ConfigError("descent on an empty dataset");
  if (step <= 0.0) throw ConfigError("step size must be > 0");
  const RMat x = data.concatenated();
  const double samples = static_cast<double>(x.rows());

  const auto objective = [&](const RVec& w) {
    const RVec z = x * w;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      loss += softplus(z(i)) - data.labels(i) * z(i);
    return loss / samples + 0.5 * lambda * w.squaredNorm();
  };
  const auto gradient = [&](const RVec& w) {
    const RVec z = x * w;
    RVec g(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      g(i) = sigmoid(z(i)) - data.labels(i);
    return RVec(x.transpose() * g / samples + lambda * w);
  };

  CentralizedRun run;
  run.w = RVec::Zero(x.cols());
  while (run.iterations < max_iters) {
    const RVec grad = gradient(run.w);
    run.grad_norm = grad.norm();
    if (run.grad_norm <= grad_tol) break;
    run.w -= step * grad;
    ++run.iterations;
    if (record_trajectory) run.trajectory.push_back(objective(run.w));
  }
  run.grad_norm = gradient(run.w).norm();
  run.objective = objective(run.w);
  return run;
}

std::vector<double> optimality_gap_bound(const ConvergenceParams& params,
                                         double initial_gap,
                                         const std::vector<double>& gap_terms,
                                         std::size_t samples) {
  if (samples == 0) throw ConfigError("bound needs the sample count");
  if (params.beta <= 0.0 || params.rho < 0.0 || params.rho >= 1.0)
    throw ConfigError("convergence parameters out of range");
  const double denom =
      2.0 * params.beta * static_cast<double>(samples) * samples;
  std::vector<double> bound;
  bound.reserve(gap_terms.size() + 1);
  double b = initial_gap;
  bound.push_back(b);
  for (double term : gap_terms) {
    b = params.rho * b + term / denom;
    bound.push_back(b);
  }
  return bound;
}

TrainResult train(const std::vector<VerticalDataset>& tasks,
                  const std::vector<VerticalDataset>& test_tasks,
                  const ChannelStack& stack, const TrainConfig& config) {
  config.validate();
  const NetworkTopology& topo = stack.topology;
  const std::size_t cells = topo.cells();
  if (tasks.size() != cells) throw ConfigError("need one task per cell");
  const bool with_tests = !test_tasks.empty();
  if (with_tests && test_tasks.size() != cells)
    throw ConfigError("need one test task per cell");

  TrainResult result;
  result.design_cached =
      !config.reoptimize_each_round && config.mode != ChannelMode::Noiseless;

  // Curvature constants, the premise check, and the optimality oracle. The
  // reference minimizer is computed once, independent of the channel mode.
  std::vector<double> running_bound(cells, 0.0);
  for (std::size_t m = 0; m < cells; ++m) {
    const ConvergenceParams params =
        estimate_convergence_params(tasks[m], config.lambda);
    if (config.learning_rate > 1.0 / params.beta * (1.0 + 1e-9))
      result.premise_ok = false;
    const CentralizedRun star = centralized_descent(
        tasks[m], config.lambda, 1.0 / params.beta, 500000, 1e-10);
    const VerticalModel zero = VerticalModel::zeros_like(tasks[m]);
    const double gap0 =
        objective_value(zero, tasks[m], config.lambda) - star.objective;
    result.params.push_back(params);
    result.f_star.push_back(star.objective);
    result.initial_gap.push_back(gap0);
    running_bound[m] = gap0;
  }

  result.state.models.reserve(cells);
  for (const VerticalDataset& task : tasks)
    result.state.models.push_back(VerticalModel::zeros_like(task));

  ProfilingVector kappa = config.kappa;
  if (kappa.kappa.empty())
    kappa.kappa.assign(cells, 1.0 / static_cast<double>(cells));

  TransceiverSolution cached;
  bool have_cached = false;

  for (int t = 0; t < config.rounds; ++t) {
    Rng round_rng(
        derive_seed(config.seed, {kRoundStream, static_cast<std::uint64_t>(t)}));
    try {
      std::unique_ptr<AnalogTransport> transport;
      if (config.mode == ChannelMode::Noiseless) {
        transport = std::make_unique<NoiselessTransport>(topo);
      } else {
        ChannelSet ch = sample_channels(topo, stack.fading, round_rng);
        const Eigen::Index q =
            config.mode == ChannelMode::AircompMultiCellStarRis
                ? std::min(stack.elements, ch.elements())
                : 0;
        ch = restrict_elements(ch, q);
        if (config.mode == ChannelMode::AircompSingleCell)
          ch = isolate_cells(std::move(ch), topo);

        TransceiverSolution design;
        if (have_cached && !config.reoptimize_each_round) {
          design = cached;
        } else {
          design = alternating_optimize(ch, topo, kappa, stack.p_ul,
                                        stack.p_dl, stack.noise_ul,
                                        stack.noise_dl, config.design);
          if (!config.reoptimize_each_round) {
            cached = design;
            have_cached = true;
          }
        }
        transport = std::make_unique<AircompTransport>(
            topo, design.uplink, design.downlink,
            combined_all(ch, topo, design.ris_ul),
            combined_all(ch, topo, design.ris_dl));
      }

      RoundRecord rec =
          gd_round(result.state, tasks, topo, *transport, round_rng, config,
                   with_tests ? &test_tasks : nullptr);
      for (std::size_t m = 0; m < cells; ++m) {
        const double samples = static_cast<double>(tasks[m].samples());
        running_bound[m] =
            result.params[m].rho * running_bound[m] +
            rec.gap[m] / (2.0 * result.params[m].beta * samples * samples);
        rec.bound[m] = running_bound[m];
      }
      result.history.push_back(std::move(rec));
    } catch (const std::exception& ex) {
      result.aborted = true;
      result.error = "round " + std::to_string(t) + ": " + ex.what();
      break;
    }
  }
  return result;
}

}  // namespace airfl

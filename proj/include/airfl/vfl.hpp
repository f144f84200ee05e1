#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "airfl/beamforming.hpp"
#include "airfl/channel.hpp"
#include "airfl/data.hpp"

namespace airfl {

/// Overflow-safe logistic function.
double sigmoid(double z);

/// The loss derivative taken with respect to the aggregated prediction, and
/// its own derivative. For the binary cross-entropy task these are
/// sigmoid(z) - y and sigmoid(z)(1 - sigmoid(z)); the quadratic weight
/// penalty is handled where gradients are assembled, not here.
struct Auxiliary {
  double value = 0.0;
  double derivative = 0.0;
};

Auxiliary auxiliary_g(double z, double y);

/// Per-sample inner products w_k^T x_k of one device's feature block.
RVec local_predict(const RVec& w_k, const RMat& x_k);

/// One device's gradient block: (1/L) sum_i g_i x_k^i + lambda w_k.
RVec partial_gradient(const RVec& g_values, const RMat& x_k, const RVec& w_k,
                      double lambda);

/// One cell's model, stored as the per-device weight blocks whose
/// concatenation is the global model.
struct VerticalModel {
  std::vector<RVec> w;

  RVec concatenated() const;
  static VerticalModel zeros_like(const VerticalDataset& data);
};

/// Regularized training objective (1/L) sum_i f(sigma(z_i); y_i)
/// + (lambda/2) ||w||^2, evaluated with stable softplus arithmetic.
double objective_value(const VerticalModel& model, const VerticalDataset& data,
                       double lambda);

/// Fraction of samples whose thresholded prediction matches the label.
double classification_accuracy(const VerticalModel& model,
                               const VerticalDataset& data);

/// Curvature constants of the regularized objective: alpha = lambda,
/// beta = lambda + lambda_max((1/L) X^T X)/4 via matrix-free power
/// iteration, rho = 1 - alpha/beta.
struct ConvergenceParams {
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 0.0;
};

ConvergenceParams estimate_convergence_params(const VerticalDataset& data,
                                              double lambda);

/// Analog delivery of the per-slot scalars. Uplink: every device puts one
/// scalar on the air, each BS gets an estimate of its own cell's sum.
/// Downlink: every BS broadcasts one scalar, each device gets an estimate
/// of its serving cell's value. Implementations: exact aggregation, AirComp
/// through designed transceivers, and test fakes with forced errors.
class AnalogTransport {
 public:
  virtual ~AnalogTransport() = default;

  virtual std::vector<double> uplink_slot(const std::vector<double>& signals,
                                          Rng& rng) = 0;
  virtual std::vector<double> downlink_slot(const std::vector<double>& values,
                                            Rng& rng) = 0;

  /// Closed-form error powers under unit-variance signaling; zero for exact
  /// transports. Uplink per cell, downlink per device.
  virtual std::vector<double> uplink_error_power() const = 0;
  virtual std::vector<double> downlink_error_power() const = 0;

  /// Whether payloads should be standardized before hitting the channel
  /// (exact transports skip the round trip).
  virtual bool wants_standardization() const = 0;
};

/// Exact sums and broadcasts; the mathematical reference path.
class NoiselessTransport final : public AnalogTransport {
 public:
  explicit NoiselessTransport(const NetworkTopology& topo) : topo_(&topo) {}

  std::vector<double> uplink_slot(const std::vector<double>& signals,
                                  Rng& rng) override;
  std::vector<double> downlink_slot(const std::vector<double>& values,
                                    Rng& rng) override;
  std::vector<double> uplink_error_power() const override;
  std::vector<double> downlink_error_power() const override;
  bool wants_standardization() const override { return false; }

 private:
  const NetworkTopology* topo_;
};

/// AirComp through concrete transceiver designs and combined channels.
/// Normalizers are recomputed for the supplied channels on construction.
class AircompTransport final : public AnalogTransport {
 public:
  AircompTransport(const NetworkTopology& topo, UplinkDesign uplink,
                   DownlinkDesign downlink, CombinedChannels h_ul,
                   CombinedChannels h_dl);

  std::vector<double> uplink_slot(const std::vector<double>& signals,
                                  Rng& rng) override;
  std::vector<double> downlink_slot(const std::vector<double>& values,
                                    Rng& rng) override;
  std::vector<double> uplink_error_power() const override;
  std::vector<double> downlink_error_power() const override;
  bool wants_standardization() const override { return true; }

 private:
  const NetworkTopology* topo_;
  UplinkDesign uplink_;
  DownlinkDesign downlink_;
  CombinedChannels h_ul_, h_dl_;
  std::vector<double> mse_ul_, mse_dl_;
};

enum class ChannelMode {
  Noiseless,
  AircompSingleCell,
  AircompMultiCell,
  AircompMultiCellStarRis,
};

struct TrainConfig {
  int rounds = 200;
  double learning_rate = 0.01;
  double lambda = 1e-3;
  ChannelMode mode = ChannelMode::Noiseless;
  std::uint64_t seed = 1;
  /// Redesign transceivers for every round's channel draw (default) or keep
  /// the first round's design. The cheap path is flagged in the result.
  bool reoptimize_each_round = true;
  ProfilingVector kappa;  // empty -> uniform
  AlternatingOptions design;

  void validate() const;
};

/// All cells' models, advanced jointly round by round.
struct VflState {
  std::vector<VerticalModel> models;
};

struct RoundRecord {
  std::vector<double> loss;            // per cell, after the update
  std::vector<double> accuracy;        // per cell
  std::vector<double> ul_error_power;  // realized, per cell
  std::vector<double> dl_error_power;  // realized, per cell
  std::vector<double> gap;             // closed-form Gap_m for the round
  std::vector<double> bound;           // optimality-gap bound, set by train
  std::vector<std::size_t> ul_slots;   // uplink time slots used per cell
  std::size_t side_scalars_per_device = 0;
};

/// One synchronized round of the three procedures for every cell: devices
/// transmit standardized local predictions slot by slot, each BS computes
/// the loss derivatives on its noisy aggregates (it sees only those and the
/// labels), broadcasts them back, and devices take a gradient step with
/// what they received.
RoundRecord gd_round(VflState& state,
                     const std::vector<VerticalDataset>& tasks,
                     const NetworkTopology& topo, AnalogTransport& transport,
                     Rng& rng, const TrainConfig& config,
                     const std::vector<VerticalDataset>* test_tasks = nullptr);

/// Full-batch GD on one cell's task with everything local; reference for
/// equivalence tests and the F(w*) oracle.
struct CentralizedRun {
  RVec w;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  std::vector<double> trajectory;  // objective after each step, if recorded
};

CentralizedRun centralized_descent(const VerticalDataset& data, double lambda,
                                   double step, int max_iters,
                                   double grad_tol = 1e-10,
                                   bool record_trajectory = false);

/// Optimality-gap bound trajectory: element T is
///   rho^T G0 + 1/(2 beta L^2) * sum_t rho^(T-1-t) gap_terms[t],
/// evaluated by the recursion B(t+1) = rho B(t) + gap_terms[t]/(2 beta L^2).
std::vector<double> optimality_gap_bound(const ConvergenceParams& params,
                                         double initial_gap,
                                         const std::vector<double>& gap_terms,
                                         std::size_t samples);

/// Physical scenario shared by every round: geometry, fading, element
/// budget, powers and noise levels.
struct ChannelStack {
  NetworkTopology topology;
  FadingParams fading;
  Eigen::Index elements = 0;
  double p_ul = 1.0;
  double p_dl = 1.0;
  double noise_ul = 0.0;
  double noise_dl = 0.0;
};

struct TrainResult {
  std::vector<RoundRecord> history;
  VflState state;
  std::vector<ConvergenceParams> params;  // per cell
  std::vector<double> f_star;             // per cell
  std::vector<double> initial_gap;        // per cell
  bool premise_ok = true;   // learning rate within 1/beta for every cell
  bool design_cached = false;
  bool aborted = false;
  std::string error;
};

/// Runs the vertical-FL loop for `config.rounds` rounds. Each round draws
/// fresh channels, designs transceivers per the channel mode, and advances
/// all cells through gd_round. Per-round failures abort the loop with the
/// partial history preserved. Deterministic for a fixed config.
TrainResult train(const std::vector<VerticalDataset>& tasks,
                  const std::vector<VerticalDataset>& test_tasks,
                  const ChannelStack& stack, const TrainConfig& config);

}  // namespace airfl

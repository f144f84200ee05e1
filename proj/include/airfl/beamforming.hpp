#pragma once

#include <optional>
#include <string>
#include <vector>

#include "airfl/aircomp.hpp"
#include "airfl/channel.hpp"
#include "airfl/conic.hpp"

namespace airfl {

/// Per-cell weights steering the gap trade-off; nonnegative, sums to one.
struct ProfilingVector {
  std::vector<double> kappa;

  void validate(std::size_t cells) const;
};

/// Iterate of the uplink surrogate problem: scaled beamformers
/// q_m = r_m / sqrt(eta_m), interference slacks b(m, j) for every victim
/// cell m and out-of-cell device j, and the current objective value.
struct UplinkScaState {
  std::vector<CVec> q;
  RMat b;  // cells x devices; row m meaningful where cell_of(j) != m
  double zeta = 0.0;
};

/// Iterate of the downlink surrogate problem: transmit beamformers,
/// per-device error slacks, objective value.
struct DownlinkScaState {
  std::vector<CVec> t;
  RVec d;
  double zeta = 0.0;
};

struct SolveReport {
  std::vector<double> zeta_trajectory;
  std::vector<int> stage_iterations;
  bool converged = false;
  std::vector<double> achieved_gaps;
  std::string message;
};

struct ScaOptions {
  double rel_tol = 1e-5;
  int max_iters = 50;
  SolverOptions inner;
};

struct PhaseOptions {
  int grid_points = 64;
  double refine_tol = 1e-4;  // radians
  int max_passes = 4;
  double rel_tol = 1e-6;
};

struct AlternatingOptions {
  double outer_rel_tol = 1e-4;
  int max_outer = 10;
  ScaOptions sca;
  PhaseOptions phase;
  ModePolicy mode_policy = ModePolicy::EqualSplit;
};

/// Joint design produced by the alternating optimization: transceivers for
/// both directions plus the RIS configurations they were tuned against.
struct TransceiverSolution {
  UplinkDesign uplink;
  DownlinkDesign downlink;
  StarRisConfig ris_ul;
  StarRisConfig ris_dl;
  double zeta_ul = 0.0;
  double zeta_dl = 0.0;
  std::vector<double> gaps;  // kappa_m * (zeta_ul + zeta_dl)
};

enum class LinkDirection { Uplink, Downlink };

/// Feasible starting point: channel-matched q with a 2x margin on the
/// min-power constraint, slacks tight at the implied ratios. Throws
/// SolverError when no feasible start exists (degenerate channels, or a
/// zero profiling weight that forces an empty feasible set).
UplinkScaState init_uplink_state(const CombinedChannels& h_bar,
                                 const NetworkTopology& topo,
                                 const ProfilingVector& kappa,
                                 double max_power, double noise_power);

DownlinkScaState init_downlink_state(const CombinedChannels& h_bar,
                                     const NetworkTopology& topo,
                                     const ProfilingVector& kappa,
                                     double max_power, double noise_power);

/// Worst violation of the original (pre-linearization) constraints at the
/// given iterate; <= 0 means feasible.
double uplink_violation(const UplinkScaState& state,
                        const CombinedChannels& h_bar,
                        const NetworkTopology& topo,
                        const ProfilingVector& kappa, double max_power,
                        double noise_power);

double downlink_violation(const DownlinkScaState& state,
                          const CombinedChannels& h_bar,
                          const NetworkTopology& topo,
                          const ProfilingVector& kappa, double max_power,
                          double noise_power);

/// Successive convex approximation over q: each round linearizes the
/// concave sides of the interference and min-power constraints at the
/// current iterate and solves the resulting cone program. The objective
/// trajectory never increases and every accepted iterate satisfies the
/// original constraints.
std::pair<UplinkScaState, SolveReport> solve_uplink_sca(
    const CombinedChannels& h_bar, const NetworkTopology& topo,
    const ProfilingVector& kappa, double max_power, double noise_power,
    const ScaOptions& opts = {},
    const UplinkScaState* init = nullptr);

std::pair<DownlinkScaState, SolveReport> solve_downlink_sca(
    const CombinedChannels& h_bar, const NetworkTopology& topo,
    const ProfilingVector& kappa, double max_power, double noise_power,
    const ScaOptions& opts = {},
    const DownlinkScaState* init = nullptr);

/// Honest per-direction objective at fixed beamformers: the bottleneck
/// max_m (cell error measure)_m / kappa_m, with the uplink normalizers
/// recomputed from their definition. Scale-invariant in each q_m.
double uplink_bottleneck(const ChannelSet& ch, const NetworkTopology& topo,
                         const std::vector<CVec>& q,
                         const ProfilingVector& kappa, double max_power,
                         double noise_power, const StarRisConfig& ris);

double downlink_bottleneck(const ChannelSet& ch, const NetworkTopology& topo,
                           const std::vector<CVec>& t,
                           const ProfilingVector& kappa, double noise_power,
                           const StarRisConfig& ris);

/// Per-element block-coordinate descent on the active-side phases:
/// 64-point grid then golden-section refinement, never increasing the
/// bottleneck objective. Elements in the Off state are left untouched.
StarRisConfig optimize_ris_phases(const ChannelSet& ch,
                                  const NetworkTopology& topo,
                                  LinkDirection direction,
                                  const std::vector<CVec>& beamformers,
                                  const ProfilingVector& kappa,
                                  double max_power, double noise_power,
                                  const StarRisConfig& init,
                                  const PhaseOptions& opts = {});

/// Alternating beamformer / RIS-phase optimization, run independently for
/// the two directions. Tracks the best iterate seen, so the returned
/// objective never exceeds the warm start's.
TransceiverSolution alternating_optimize(
    const ChannelSet& ch, const NetworkTopology& topo,
    const ProfilingVector& kappa, double p_ul, double p_dl, double noise_ul,
    double noise_dl, const AlternatingOptions& opts = {},
    SolveReport* report = nullptr,
    const TransceiverSolution* warm = nullptr);

/// One alternating_optimize run per profiling vector; failures are
/// recorded per point and the sweep continues.
struct GapPoint {
  std::vector<double> kappa;
  std::vector<double> gaps;
  double zeta_ul = 0.0;
  double zeta_dl = 0.0;
  bool converged = false;
  bool ok = false;
  std::string error;
};

std::vector<GapPoint> gap_tradeoff_sweep(
    const ChannelSet& ch, const NetworkTopology& topo,
    const std::vector<ProfilingVector>& kappa_list, double p_ul, double p_dl,
    double noise_ul, double noise_dl, const AlternatingOptions& opts = {});

}  // namespace airfl

#pragma once

#include <vector>

#include "airfl/common.hpp"
#include "airfl/rng.hpp"
#include "airfl/topology.hpp"

namespace airfl {

/// Per-cell combined channels for every device, h_bar[m][k], as produced by
/// combined_all(). Cross-cell entries feed the interference terms.
using CombinedChannels = std::vector<std::vector<CVec>>;

/// Uplink aggregation transceiver: receive beamformers r_m and the
/// power-control normalizers eta_m they induce.
struct UplinkDesign {
  std::vector<CVec> r;
  std::vector<double> eta;
  double max_power = 1.0;    // P^ul, watts
  double noise_power = 0.0;  // receiver noise variance, watts
};

/// Downlink dissemination transceiver: per-cell transmit beamformers.
struct DownlinkDesign {
  std::vector<CVec> t;
  double max_power = 1.0;    // P^dl, watts
  double noise_power = 0.0;
};

/// Per-device weights of the error-induced optimality gap.
struct GapWeights {
  std::vector<double> phi1;
  std::vector<double> phi2;
};

struct UplinkRoundResult {
  std::vector<double> target;    // g_m: exact sum over served devices
  std::vector<double> estimate;  // g_m + Re(error)
  std::vector<cxd> error;        // complex interference-plus-noise term
};

struct DownlinkRoundResult {
  std::vector<double> estimate;  // per device: G_m + Re(error)
  std::vector<cxd> error;
};

/// Effective uplink gain r_m^H h_bar; throws if its magnitude is below the
/// degeneracy floor.
cxd effective_gain(const CVec& r_m, const CVec& h_bar);

/// eta_m = P^ul * min_k |r_m^H h_bar_{m,k}|^2 over the served devices.
double uplink_normalizer(const CVec& r_m,
                         const std::vector<const CVec*>& served,
                         double max_power);

/// Populate design.eta from design.r and the serving-cell channels.
void set_normalizers(UplinkDesign& design, const CombinedChannels& h_bar,
                     const NetworkTopology& topo);

/// Device transmit scalar: sqrt(eta_m) * (r_m^H h_bar)^H / |r_m^H h_bar|^2.
/// Inverts the effective channel so the beamformed contribution is exactly 1.
cxd transmit_scalar(const CVec& r_m, const CVec& h_bar, double eta_m);

/// Device receive scalar: (h_bar^H t_m)^H / |h_bar^H t_m|^2.
cxd receive_scalar(const CVec& h_bar, const CVec& t_m);

/// One uplink aggregation round. signals[k] is device k's (standardized)
/// value; returns per-cell sums, estimates, and realized complex errors.
UplinkRoundResult uplink_transmit_round(const std::vector<double>& signals,
                                        const UplinkDesign& design,
                                        const CombinedChannels& h_bar,
                                        const NetworkTopology& topo, Rng& rng);

/// One downlink broadcast round. values[m] is cell m's (standardized)
/// scalar; returns per-device estimates and realized complex errors.
DownlinkRoundResult downlink_transmit_round(const std::vector<double>& values,
                                            const DownlinkDesign& design,
                                            const CombinedChannels& h_bar,
                                            const NetworkTopology& topo,
                                            Rng& rng);

/// Closed-form per-cell uplink aggregation error power under unit-variance
/// signaling:
///   sum_{l != m, j in K_l} eta_l |r_m^H h_{m,j}|^2 / (eta_m |r_l^H h_{l,j}|^2)
///   + ||r_m||^2 sigma^2 / eta_m
std::vector<double> uplink_mse(const UplinkDesign& design,
                               const CombinedChannels& h_bar,
                               const NetworkTopology& topo);

/// Closed-form per-device downlink error power:
///   (sum_{l != m} |h_{l,k}^H t_l|^2 + sigma^2) / |h_{m,k}^H t_m|^2
std::vector<double> downlink_mse(const DownlinkDesign& design,
                                 const CombinedChannels& h_bar,
                                 const NetworkTopology& topo);

/// Gap_m = sum_{k in K_m} (phi1_k * mse_ul_m + phi2_k * mse_dl_k).
std::vector<double> cell_gap(const GapWeights& weights,
                             const std::vector<double>& mse_ul,
                             const std::vector<double>& mse_dl,
                             const NetworkTopology& topo);

}  // namespace airfl

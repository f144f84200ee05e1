#pragma once

#include <cstdint>
#include <vector>

#include "airfl/common.hpp"
#include "airfl/rng.hpp"
#include "airfl/star_ris.hpp"
#include "airfl/topology.hpp"

namespace airfl {

enum class LosPolicy {
  /// Steering vectors from the array geometry (default).
  Geometric,
  /// Unit-modulus entries with random phases, frozen by los_seed.
  RandomFixed,
};

/// Rician fading inputs, linear scale. dB-valued config fields are converted
/// before this struct is built.
struct FadingParams {
  double pathloss_exponent = 2.5;
  double rician_factor = db_to_linear(5.0);  // linear, not dB
  LosPolicy los_policy = LosPolicy::Geometric;
  std::uint64_t los_seed = 0;
  double wavelength_m = 0.1;      // sets the LoS distance phase
  double min_distance_m = 1.0;    // pathloss floor for degenerate placements

  void validate() const {
    if (pathloss_exponent <= 0.0)
      throw ConfigError("pathloss exponent must be > 0");
    if (rician_factor < 0.0) throw ConfigError("Rician factor must be >= 0");
    if (min_distance_m <= 0.0)
      throw ConfigError("minimum link distance must be > 0");
  }
};

/// One round's channel realizations for every link in the network.
///   direct[m][k]   : device k -> BS m, length N   (all pairs, cross-cell too)
///   device_to_ris[k]: device k -> RIS, length Q
///   ris_to_bs[m]   : RIS -> BS m, Q x N
struct ChannelSet {
  std::vector<std::vector<CVec>> direct;
  std::vector<CVec> device_to_ris;
  std::vector<CMat> ris_to_bs;

  std::size_t cells() const { return direct.size(); }
  std::size_t devices() const { return device_to_ris.size(); }
  Eigen::Index antennas() const {
    return direct.empty() || direct[0].empty() ? 0 : direct[0][0].size();
  }
  Eigen::Index elements() const {
    return device_to_ris.empty() ? 0 : device_to_ris[0].size();
  }
};

/// Draw one Rician realization of every link. The NLoS part is fresh per
/// call; the LoS part is a pure function of (topology, fading).
ChannelSet sample_channels(const NetworkTopology& topology,
                           const FadingParams& fading, Rng& rng);

/// Combined channel from `device` to BS `cell` through the STAR-RIS:
/// h + G^H Theta h^r, with Theta chosen by the side of `cell`.
CVec combined_channel(const ChannelSet& channels, const NetworkTopology& topo,
                      const StarRisConfig& ris, std::size_t cell,
                      std::size_t device);

/// Combined channels for every (cell, device) pair under one RIS config.
std::vector<std::vector<CVec>> combined_all(const ChannelSet& channels,
                                            const NetworkTopology& topo,
                                            const StarRisConfig& ris);

/// Keep only the leading `q` RIS elements of each cascaded link. Used by
/// element-count sweeps so channel draws nest across Q.
ChannelSet restrict_elements(const ChannelSet& channels, Eigen::Index q);

}  // namespace airfl

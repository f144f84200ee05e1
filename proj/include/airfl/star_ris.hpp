#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "airfl/common.hpp"

namespace airfl {

/// Operating state of one STAR-RIS element under the mode-switching
/// protocol. T and R carry unit amplitude on exactly one side; Off is the
/// zero-amplitude state used for RIS-absent baselines and warm starts.
enum class ElementMode { T, R, Off };

enum class RisSide { T, R };

/// Per-element mode bits and phase shifts of a STAR-RIS. One instance per
/// link direction: uplink and downlink coefficient matrices are designed
/// independently.
struct StarRisConfig {
  std::vector<ElementMode> mode;
  std::vector<double> phase_t;  // radians in [0, 2pi)
  std::vector<double> phase_r;

  std::size_t elements() const { return mode.size(); }

  static StarRisConfig all_off(std::size_t q) {
    StarRisConfig c;
    c.mode.assign(q, ElementMode::Off);
    c.phase_t.assign(q, 0.0);
    c.phase_r.assign(q, 0.0);
    return c;
  }
};

enum class ModePolicy { EqualSplit, AllT, AllR, Custom };

/// Assign T/R modes to Q elements. EqualSplit alternates T/R by element
/// index so the assignment of the first q elements does not depend on Q.
std::vector<ElementMode> assign_modes(ModePolicy policy, std::size_t q,
                                      const std::vector<ElementMode>& custom =
                                          {});

StarRisConfig make_config(ModePolicy policy, std::size_t q,
                          const std::vector<ElementMode>& custom = {});

/// Diagonal of the transmission- or reflection-coefficient matrix:
/// entry q is sqrt(beta_q^side) * exp(j theta_q^side), exactly 0 for
/// elements assigned to the other mode.
CVec theta_diagonal(const StarRisConfig& config, RisSide side);

ModePolicy mode_policy_from_string(const std::string& name);
std::string to_string(ElementMode m);
ElementMode element_mode_from_string(const std::string& s);

}  // namespace airfl

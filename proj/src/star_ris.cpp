#include "airfl/star_ris.hpp"

namespace airfl {

std::vector<ElementMode> assign_modes(ModePolicy policy, std::size_t q,
                                      const std::vector<ElementMode>& custom) {
  std::vector<ElementMode> modes(q, ElementMode::T);
  switch (policy) {
    case ModePolicy::EqualSplit:
      for (std::size_t i = 0; i < q; ++i)
        modes[i] = (i % 2 == 0) ? ElementMode::T : ElementMode::R;
      break;
    case ModePolicy::AllT:
      break;
    case ModePolicy::AllR:
      modes.assign(q, ElementMode::R);
      break;
    case ModePolicy::Custom:
      if (custom.size() != q) {
        throw ConfigError("custom mode list has " +
                          std::to_string(custom.size()) + " entries, expected " +
                          std::to_string(q));
      }
      modes = custom;
      break;
  }
  return modes;
}

StarRisConfig make_config(ModePolicy policy, std::size_t q,
                          const std::vector<ElementMode>& custom) {
  StarRisConfig c;
  c.mode = assign_modes(policy, q, custom);
  c.phase_t.assign(q, 0.0);
  c.phase_r.assign(q, 0.0);
  return c;
}

CVec theta_diagonal(const StarRisConfig& config, RisSide side) {
  const auto q = static_cast<Eigen::Index>(config.elements());
  CVec diag = CVec::Zero(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const auto m = config.mode[static_cast<std::size_t>(i)];
    if (side == RisSide::T && m == ElementMode::T) {
      diag(i) = std::polar(1.0, config.phase_t[static_cast<std::size_t>(i)]);
    } else if (side == RisSide::R && m == ElementMode::R) {
      diag(i) = std::polar(1.0, config.phase_r[static_cast<std::size_t>(i)]);
    }
  }
  return diag;
}

ModePolicy mode_policy_from_string(const std::string& name) {
  if (name == "equal-split") return ModePolicy::EqualSplit;
  if (name == "all-T" || name == "all-t") return ModePolicy::AllT;
  if (name == "all-R" || name == "all-r") return ModePolicy::AllR;
  if (name == "custom") return ModePolicy::Custom;
  throw ConfigError("unknown RIS mode policy: " + name);
}

std::string to_string(ElementMode m) {
  switch (m) {
    case ElementMode::T: return "T";
    case ElementMode::R: return "R";
    case ElementMode::Off: return "off";
  }
  return "?";
}

ElementMode element_mode_from_string(const std::string& s) {
  if (s == "T" || s == "t") return ElementMode::T;
  if (s == "R" || s == "r") return ElementMode::R;
  if (s == "off" || s == "Off") return ElementMode::Off;
  throw ConfigError("unknown element mode: " + s);
}

}  // namespace airfl

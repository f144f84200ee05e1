#include "airfl/channel.hpp"

namespace airfl {

namespace {

// ULA response along the x-axis, half-wavelength spacing; cos_axis is the
// direction cosine of the link relative to the array axis.
CVec steering(Eigen::Index n, double cos_axis) {
  CVec a(n);
  for (Eigen::Index i = 0; i < n; ++i)
    a(i) = std::polar(1.0, kPi * static_cast<double>(i) * cos_axis);
  return a;
}

double direction_cosine(const Point2& from, const Point2& to) {
  const double d = distance(from, to);
  if (d < 1e-9) return 0.0;
  return (to[0] - from[0]) / d;
}

struct LosDraw {
  Rng rng;
  LosPolicy policy;
  explicit LosDraw(const FadingParams& f)
      : rng(derive_seed(f.los_seed, {0x6c6f73 /* "los" */})), policy(f.los_policy) {}

  cxd phase() { return std::polar(1.0, rng.uniform(0.0, 2.0 * kPi)); }
};

}  // namespace

ChannelSet sample_channels(const NetworkTopology& topo,
                           const FadingParams& fading, Rng& rng) {
  fading.validate();
  const auto n = static_cast<Eigen::Index>(topo.antennas);
  const auto q = static_cast<Eigen::Index>(topo.elements);
  const std::size_t m_cells = topo.cells();
  const std::size_t k_dev = topo.devices();

  const double beta = fading.rician_factor;
  // beta = inf is the LoS-only limit; avoid inf/inf
  const double w_los = std::isinf(beta) ? 1.0 : std::sqrt(beta / (1.0 + beta));
  const double w_nlos = std::isinf(beta) ? 0.0 : std::sqrt(1.0 / (1.0 + beta));
  const double alpha = fading.pathloss_exponent;

  const auto pathloss_amp = [&](double rho) {
    return std::pow(std::max(rho, fading.min_distance_m), -alpha / 2.0);
  };
  const auto dist_phase = [&](double rho) {
    return std::polar(1.0, -2.0 * kPi * rho / fading.wavelength_m);
  };

  LosDraw los(fading);

  ChannelSet ch;
  ch.direct.assign(m_cells, std::vector<CVec>(k_dev));
  ch.device_to_ris.assign(k_dev, CVec());
  ch.ris_to_bs.assign(m_cells, CMat());

  // device -> BS, all pairs (interference needs cross-cell links)
  for (std::size_t m = 0; m < m_cells; ++m) {
    for (std::size_t k = 0; k < k_dev; ++k) {
      const double rho = distance(topo.device_positions[k], topo.bs_positions[m]);
      CVec h_los;
      if (fading.los_policy == LosPolicy::Geometric) {
        h_los = steering(n, direction_cosine(topo.bs_positions[m],
                                             topo.device_positions[k])) *
                dist_phase(rho);
      } else {
        h_los = CVec(n);
        for (Eigen::Index i = 0; i < n; ++i) h_los(i) = los.phase();
      }
      ch.direct[m][k] = pathloss_amp(rho) *
                        (w_los * h_los +
                         w_nlos * rng.complex_gaussian_vector(n));
    }
  }

  // device -> RIS
  for (std::size_t k = 0; k < k_dev; ++k) {
    const double rho = distance(topo.device_positions[k], topo.ris_position);
    CVec h_los;
    if (fading.los_policy == LosPolicy::Geometric) {
      h_los = steering(q, direction_cosine(topo.ris_position,
                                           topo.device_positions[k])) *
              dist_phase(rho);
    } else {
      h_los = CVec(q);
      for (Eigen::Index i = 0; i < q; ++i) h_los(i) = los.phase();
    }
    ch.device_to_ris[k] =
        pathloss_amp(rho) * (w_los * h_los + w_nlos * rng.complex_gaussian_vector(q));
  }

  // RIS -> BS, rank-1 LoS from the two array responses
  for (std::size_t m = 0; m < m_cells; ++m) {
    const double rho = distance(topo.ris_position, topo.bs_positions[m]);
    CMat g_los(q, n);
    if (fading.los_policy == LosPolicy::Geometric) {
      const CVec a_ris = steering(q, direction_cosine(topo.ris_position,
                                                      topo.bs_positions[m]));
      const CVec a_bs = steering(n, direction_cosine(topo.bs_positions[m],
                                                     topo.ris_position));
      g_los = dist_phase(rho) * (a_ris * a_bs.adjoint());
    } else {
      for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g_los(i, j) = los.phase();
    }
    CMat g_nlos(q, n);
    for (Eigen::Index i = 0; i < q; ++i)
      for (Eigen::Index j = 0; j < n; ++j) g_nlos(i, j) = rng.complex_gaussian();
    ch.ris_to_bs[m] = pathloss_amp(rho) * (w_los * g_los + w_nlos * g_nlos);
  }

  return ch;
}

CVec combined_channel(const ChannelSet& channels, const NetworkTopology& topo,
                      const StarRisConfig& ris, std::size_t cell,
                      std::size_t device) {
  if (cell >= channels.cells() || device >= channels.devices())
    throw std::logic_error("combined_channel: index out of range");
  const CVec& h = channels.direct[cell][device];
  const auto q = channels.elements();
  if (q == 0) return h;
  if (static_cast<Eigen::Index>(ris.elements()) != q)
    throw std::logic_error("combined_channel: RIS config has wrong size");
  const RisSide side =
      topo.side_of_cell[cell] == CellSide::T ? RisSide::T : RisSide::R;
  const CVec theta = theta_diagonal(ris, side);
  // h + G^H diag(theta) h^r
  return h + channels.ris_to_bs[cell].adjoint() *
                 theta.cwiseProduct(channels.device_to_ris[device]);
}

std::vector<std::vector<CVec>> combined_all(const ChannelSet& channels,
                                            const NetworkTopology& topo,
                                            const StarRisConfig& ris) {
  std::vector<std::vector<CVec>> out(channels.cells(),
                                     std::vector<CVec>(channels.devices()));
  for (std::size_t m = 0; m < channels.cells(); ++m)
    for (std::size_t k = 0; k < channels.devices(); ++k)
      out[m][k] = combined_channel(channels, topo, ris, m, k);
  return out;
}

ChannelSet restrict_elements(const ChannelSet& channels, Eigen::Index q) {
  if (q > channels.elements())
    throw std::logic_error("restrict_elements: q exceeds sampled elements");
  ChannelSet out;
  out.direct = channels.direct;
  out.device_to_ris.reserve(channels.devices());
  for (const auto& h : channels.device_to_ris)
    out.device_to_ris.push_back(h.head(q));
  out.ris_to_bs.reserve(channels.cells());
  for (const auto& g : channels.ris_to_bs)
    out.ris_to_bs.push_back(g.topRows(q));
  return out;
}

}  // namespace airfl

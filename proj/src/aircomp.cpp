#include "airfl/aircomp.hpp"

#include <algorithm>
#include <limits>

namespace airfl {

cxd effective_gain(const CVec& r_m, const CVec& h_bar) {
  if (r_m.size() != h_bar.size())
    throw std::logic_error("effective_gain: dimension mismatch");
  const cxd g = r_m.dot(h_bar);  // r^H h
  if (std::abs(g) < kDegenerateGain)
    throw DegenerateChannelError("effective uplink channel is ~0");
  return g;
}

double uplink_normalizer(const CVec& r_m,
                         const std::vector<const CVec*>& served,
                         double max_power) {
  if (served.empty()) throw std::logic_error("normalizer: no served devices");
  double min_gain2 = std::numeric_limits<double>::infinity();
  for (const CVec* h : served)
    min_gain2 = std::min(min_gain2, std::norm(effective_gain(r_m, *h)));
  return max_power * min_gain2;
}

void set_normalizers(UplinkDesign& design, const CombinedChannels& h_bar,
                     const NetworkTopology& topo) {
  design.eta.resize(topo.cells());
  for (std::size_t m = 0; m < topo.cells(); ++m) {
    std::vector<const CVec*> served;
    for (std::size_t k : topo.devices_in_cell(m))
      served.push_back(&h_bar[m][k]);
    design.eta[m] = uplink_normalizer(design.r[m], served, design.max_power);
  }
}

cxd transmit_scalar(const CVec& r_m, const CVec& h_bar, double eta_m) {
  const cxd g = effective_gain(r_m, h_bar);
  return std::sqrt(eta_m) * std::conj(g) / std::norm(g);
}

cxd receive_scalar(const CVec& h_bar, const CVec& t_m) {
  const cxd g = h_bar.dot(t_m);  // h^H t
  if (std::abs(g) < kDegenerateGain)
    throw DegenerateChannelError("effective downlink channel is ~0");
  return std::conj(g) / std::norm(g);
}

UplinkRoundResult uplink_transmit_round(const std::vector<double>& signals,
                                        const UplinkDesign& design,
                                        const CombinedChannels& h_bar,
                                        const NetworkTopology& topo,
                                        Rng& rng) {
  const std::size_t m_cells = topo.cells();
  if (signals.size() != topo.devices())
    throw std::logic_error("uplink round: one signal per device expected");

  // each device precodes against its own serving cell
  std::vector<cxd> b(topo.devices());
  for (std::size_t j = 0; j < topo.devices(); ++j) {
    const std::size_t l = topo.cell_of_device[j];
    b[j] = transmit_scalar(design.r[l], h_bar[l][j], design.eta[l]);
  }

  UplinkRoundResult out;
  out.target.assign(m_cells, 0.0);
  out.estimate.resize(m_cells);
  out.error.resize(m_cells);
  for (std::size_t m = 0; m < m_cells; ++m) {
    const CVec noise = rng.complex_gaussian_vector(
        design.r[m].size(), design.noise_power);
    cxd err = design.r[m].dot(noise);
    for (std::size_t j = 0; j < topo.devices(); ++j) {
      const std::size_t l = topo.cell_of_device[j];
      if (l == m) {
        out.target[m] += signals[j];
      } else {
        err += design.r[m].dot(h_bar[m][j]) * b[j] * signals[j];
      }
    }
    err /= std::sqrt(design.eta[m]);
    out.error[m] = err;
    out.estimate[m] = out.target[m] + err.real();
  }
  return out;
}

DownlinkRoundResult downlink_transmit_round(const std::vector<double>& values,
                                            const DownlinkDesign& design,
                                            const CombinedChannels& h_bar,
                                            const NetworkTopology& topo,
                                            Rng& rng) {
  if (values.size() != topo.cells())
    throw std::logic_error("downlink round: one value per cell expected");
  DownlinkRoundResult out;
  out.estimate.resize(topo.devices());
  out.error.resize(topo.devices());
  for (std::size_t k = 0; k < topo.devices(); ++k) {
    const std::size_t m = topo.cell_of_device[k];
    const cxd rk = receive_scalar(h_bar[m][k], design.t[m]);
    cxd err = rk * rng.complex_gaussian(design.noise_power);
    for (std::size_t l = 0; l < topo.cells(); ++l) {
      if (l == m) continue;
      err += rk * h_bar[l][k].dot(design.t[l]) * values[l];
    }
    out.error[k] = err;
    out.estimate[k] = values[m] + err.real();
  }
  return out;
}

std::vector<double> uplink_mse(const UplinkDesign& design,
                               const CombinedChannels& h_bar,
                               const NetworkTopology& topo) {
  const std::size_t m_cells = topo.cells();
  std::vector<double> mse(m_cells, 0.0);
  for (std::size_t m = 0; m < m_cells; ++m) {
    double v = 0.0;
    for (std::size_t j = 0; j < topo.devices(); ++j) {
      const std::size_t l = topo.cell_of_device[j];
      if (l == m) continue;
      const double cross = std::norm(design.r[m].dot(h_bar[m][j]));
      const double own = std::norm(effective_gain(design.r[l], h_bar[l][j]));
      v += design.eta[l] * cross / (design.eta[m] * own);
    }
    v += design.r[m].squaredNorm() * design.noise_power / design.eta[m];
    mse[m] = v;
  }
  return mse;
}

std::vector<double> downlink_mse(const DownlinkDesign& design,
                                 const CombinedChannels& h_bar,
                                 const NetworkTopology& topo) {
  std::vector<double> mse(topo.devices(), 0.0);
  for (std::size_t k = 0; k < topo.devices(); ++k) {
    const std::size_t m = topo.cell_of_device[k];
    const double own = std::norm(h_bar[m][k].dot(design.t[m]));
    if (std::sqrt(own) < kDegenerateGain)
      throw DegenerateChannelError("effective downlink channel is ~0");
    double inter = 0.0;
    for (std::size_t l = 0; l < topo.cells(); ++l) {
      if (l == m) continue;
      inter += std::norm(h_bar[l][k].dot(design.t[l]));
    }
    mse[k] = (inter + design.noise_power) / own;
  }
  return mse;
}

std::vector<double> cell_gap(const GapWeights& weights,
                             const std::vector<double>& mse_ul,
                             const std::vector<double>& mse_dl,
                             const NetworkTopology& topo) {
  std::vector<double> gap(topo.cells(), 0.0);
  for (std::size_t k = 0; k < topo.devices(); ++k) {
    const std::size_t m = topo.cell_of_device[k];
    gap[m] += weights.phi1[k] * mse_ul[m] + weights.phi2[k] * mse_dl[k];
  }
  return gap;
}

}  // namespace airfl

#include "airfl/beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <utility>

namespace airfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGain2Floor = kDegenerateGain * kDegenerateGain;
constexpr double kFeasSlack = 1e-6;    // accepted original-constraint excess
constexpr double kDescentSlack = 1e-8;
constexpr double kInitMargin = 2.0;    // min-power headroom of fresh starts

double rel_excess(double lhs, double rhs) {
  return (lhs - rhs) / std::max(1.0, std::abs(rhs));
}

std::string inner_detail(const ConeSolution& sol, double violation) {
  return " (inner status " + std::to_string(static_cast<int>(sol.status)) +
         ", " + std::to_string(sol.iterations) + " iters, pres " +
         std::to_string(sol.primal_residual) + ", dres " +
         std::to_string(sol.dual_residual) + ", violation " +
         std::to_string(violation) + ")";
}

// Coefficient rows of Re(w^H h) and Im(w^H h) where w is the variable block
// starting at `off`, stored as [Re(w); Im(w)].
void gain_rows(RVec& re_row, RVec& im_row, Eigen::Index off, const CVec& h) {
  const Eigen::Index n = h.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    re_row(off + i) = h(i).real();
    re_row(off + n + i) = h(i).imag();
    im_row(off + i) = h(i).imag();
    im_row(off + n + i) = -h(i).real();
  }
}

struct UplinkLayout {
  std::size_t cells;
  std::size_t devices;
  Eigen::Index n_ant;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (victim, device)
  std::vector<std::vector<int>> pair_index;
  Eigen::Index nvars;

  UplinkLayout(const NetworkTopology& topo, Eigen::Index n)
      : cells(topo.cells()), devices(topo.devices()), n_ant(n) {
    pair_index.assign(cells, std::vector<int>(devices, -1));
    for (std::size_t m = 0; m < cells; ++m)
      for (std::size_t j = 0; j < devices; ++j)
        if (topo.cell_of_device[j] != m) {
          pair_index[m][j] = static_cast<int>(pairs.size());
          pairs.emplace_back(m, j);
        }
    nvars = 2 * n_ant * static_cast<Eigen::Index>(cells) +
            static_cast<Eigen::Index>(pairs.size()) + 1;
  }

  Eigen::Index qoff(std::size_t m) const {
    return 2 * n_ant * static_cast<Eigen::Index>(m);
  }
  Eigen::Index boff(int p) const {
    return 2 * n_ant * static_cast<Eigen::Index>(cells) + p;
  }
  Eigen::Index zoff() const { return nvars - 1; }
};

struct DownlinkLayout {
  std::size_t cells;
  std::size_t devices;
  Eigen::Index n_ant;
  Eigen::Index nvars;

  DownlinkLayout(const NetworkTopology& topo, Eigen::Index n)
      : cells(topo.cells()), devices(topo.devices()), n_ant(n) {
    nvars = 2 * n_ant * static_cast<Eigen::Index>(cells) +
            static_cast<Eigen::Index>(devices) + 1;
  }

  Eigen::Index toff(std::size_t m) const {
    return 2 * n_ant * static_cast<Eigen::Index>(m);
  }
  Eigen::Index doff(std::size_t k) const {
    return 2 * n_ant * static_cast<Eigen::Index>(cells) +
           static_cast<Eigen::Index>(k);
  }
  Eigen::Index zoff() const { return nvars - 1; }
};

RVec pack_uplink(const UplinkScaState& st, const UplinkLayout& L) {
  RVec x = RVec::Zero(L.nvars);
  for (std::size_t m = 0; m < L.cells; ++m)
    for (Eigen::Index i = 0; i < L.n_ant; ++i) {
      x(L.qoff(m) + i) = st.q[m](i).real();
      x(L.qoff(m) + L.n_ant + i) = st.q[m](i).imag();
    }
  for (std::size_t p = 0; p < L.pairs.size(); ++p)
    x(L.boff(static_cast<int>(p))) =
        st.b(static_cast<Eigen::Index>(L.pairs[p].first),
             static_cast<Eigen::Index>(L.pairs[p].second));
  x(L.zoff()) = st.zeta;
  return x;
}

UplinkScaState unpack_uplink(const RVec& x, const UplinkLayout& L) {
  UplinkScaState st;
  st.q.resize(L.cells);
  for (std::size_t m = 0; m < L.cells; ++m) {
    st.q[m] = CVec(L.n_ant);
    for (Eigen::Index i = 0; i < L.n_ant; ++i)
      st.q[m](i) = cxd(x(L.qoff(m) + i), x(L.qoff(m) + L.n_ant + i));
  }
  st.b = RMat::Zero(static_cast<Eigen::Index>(L.cells),
                    static_cast<Eigen::Index>(L.devices));
  for (std::size_t p = 0; p < L.pairs.size(); ++p)
    st.b(static_cast<Eigen::Index>(L.pairs[p].first),
         static_cast<Eigen::Index>(L.pairs[p].second)) =
        std::max(0.0, x(L.boff(static_cast<int>(p))));
  st.zeta = std::max(0.0, x(L.zoff()));
  return st;
}

RVec pack_downlink(const DownlinkScaState& st, const DownlinkLayout& L) {
  RVec x = RVec::Zero(L.nvars);
  for (std::size_t m = 0; m < L.cells; ++m)
    for (Eigen::Index i = 0; i < L.n_ant; ++i) {
      x(L.toff(m) + i) = st.t[m](i).real();
      x(L.toff(m) + L.n_ant + i) = st.t[m](i).imag();
    }
  for (std::size_t k = 0; k < L.devices; ++k)
    x(L.doff(k)) = st.d(static_cast<Eigen::Index>(k));
  x(L.zoff()) = st.zeta;
  return x;
}

DownlinkScaState unpack_downlink(const RVec& x, const DownlinkLayout& L) {
  DownlinkScaState st;
  st.t.resize(L.cells);
  for (std::size_t m = 0; m < L.cells; ++m) {
    st.t[m] = CVec(L.n_ant);
    for (Eigen::Index i = 0; i < L.n_ant; ++i)
      st.t[m](i) = cxd(x(L.toff(m) + i), x(L.toff(m) + L.n_ant + i));
  }
  st.d = RVec(static_cast<Eigen::Index>(L.devices));
  for (std::size_t k = 0; k < L.devices; ++k)
    st.d(static_cast<Eigen::Index>(k)) = std::max(0.0, x(L.doff(k)));
  st.zeta = std::max(0.0, x(L.zoff()));
  return st;
}

// Scale each q_m so the weakest served device sits at `margin` times the
// min-power level, then set slacks tight and zeta to the implied objective.
UplinkScaState finish_uplink_state(std::vector<CVec> q,
                                   const CombinedChannels& h_bar,
                                   const NetworkTopology& topo,
                                   const ProfilingVector& kappa,
                                   double max_power, double noise_power,
                                   double margin) {
  const std::size_t cells = topo.cells();
  const std::size_t devices = topo.devices();
  for (std::size_t m = 0; m < cells; ++m) {
    double gm = kInf;
    for (std::size_t k : topo.devices_in_cell(m))
      gm = std::min(gm, std::norm(q[m].dot(h_bar[m][k])));
    if (!(gm > kGain2Floor))
      throw SolverError(
          "uplink start degenerate: a served device has (near-)zero "
          "beamformed gain");
    q[m] *= std::sqrt(margin / (max_power * gm));
  }
  UplinkScaState st;
  st.q = std::move(q);
  st.b = RMat::Zero(static_cast<Eigen::Index>(cells),
                    static_cast<Eigen::Index>(devices));
  for (std::size_t m = 0; m < cells; ++m)
    for (std::size_t j = 0; j < devices; ++j) {
      const std::size_t l = topo.cell_of_device[j];
      if (l == m) continue;
      st.b(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
          std::norm(st.q[m].dot(h_bar[m][j])) /
          std::norm(st.q[l].dot(h_bar[l][j]));
    }
  st.zeta = 0.0;
  for (std::size_t m = 0; m < cells; ++m) {
    const double measure =
        st.b.row(static_cast<Eigen::Index>(m)).sum() +
        noise_power * st.q[m].squaredNorm();
    if (kappa.kappa[m] > 0.0)
      st.zeta = std::max(st.zeta, measure / kappa.kappa[m]);
    else if (measure > 1e-15)
      throw SolverError(
          "uplink start infeasible: profiling weight is zero for a cell "
          "whose error measure cannot vanish; re-initialize or use a "
          "positive weight");
  }
  return st;
}

DownlinkScaState finish_downlink_state(std::vector<CVec> t,
                                       const CombinedChannels& h_bar,
                                       const NetworkTopology& topo,
                                       const ProfilingVector& kappa,
                                       double max_power, double noise_power) {
  const std::size_t cells = topo.cells();
  const std::size_t devices = topo.devices();
  for (std::size_t m = 0; m < cells; ++m) {
    const double nt = t[m].norm();
    if (!(nt > kDegenerateGain))
      throw SolverError("downlink start degenerate: zero transmit beamformer");
    if (nt > std::sqrt(max_power)) t[m] *= std::sqrt(max_power) / nt;
  }
  DownlinkScaState st;
  st.t = std::move(t);
  st.d = RVec::Zero(static_cast<Eigen::Index>(devices));
  for (std::size_t k = 0; k < devices; ++k) {
    const std::size_t m = topo.cell_of_device[k];
    const double own = std::norm(st.t[m].dot(h_bar[m][k]));
    if (!(own > kGain2Floor))
      throw SolverError(
          "downlink start degenerate: a served device has (near-)zero "
          "beamformed gain");
    double interf = 0.0;
    for (std::size_t l = 0; l < cells; ++l)
      if (l != m) interf += std::norm(st.t[l].dot(h_bar[l][k]));
    st.d(static_cast<Eigen::Index>(k)) = (interf + noise_power) / own;
  }
  st.zeta = 0.0;
  for (std::size_t m = 0; m < cells; ++m) {
    double measure = 0.0;
    for (std::size_t k : topo.devices_in_cell(m))
      measure += st.d(static_cast<Eigen::Index>(k));
    if (kappa.kappa[m] > 0.0)
      st.zeta = std::max(st.zeta, measure / kappa.kappa[m]);
    else if (measure > 1e-15)
      throw SolverError(
          "downlink start infeasible: profiling weight is zero for a cell "
          "whose error measure cannot vanish; re-initialize or use a "
          "positive weight");
  }
  return st;
}

// Matched directions with the cross-channel components projected out, used
// as a second deterministic start for the nonconvex stages. Nullopt when no
// cell could be nulled (then the start would repeat the matched one). Cells
// whose cross channels span the whole space keep the matched direction.
std::optional<std::vector<CVec>> nulled_directions(
    const CombinedChannels& h_bar, const NetworkTopology& topo) {
  const Eigen::Index n = h_bar.at(0).at(0).size();
  std::vector<CVec> v(topo.cells());
  bool any = false;
  for (std::size_t m = 0; m < topo.cells(); ++m) {
    CVec matched = CVec::Zero(n);
    for (std::size_t k : topo.devices_in_cell(m)) matched += h_bar[m][k];
    v[m] = matched;
    std::vector<std::size_t> cross;
    for (std::size_t j = 0; j < topo.devices(); ++j)
      if (topo.cell_of_device[j] != m) cross.push_back(j);
    if (cross.empty()) continue;
    CMat c(n, static_cast<Eigen::Index>(cross.size()));
    for (std::size_t i = 0; i < cross.size(); ++i)
      c.col(static_cast<Eigen::Index>(i)) = h_bar[m][cross[i]];
    Eigen::JacobiSVD<CMat> svd(c, Eigen::ComputeThinU);
    const Eigen::Index r = svd.rank();
    if (r >= n) continue;
    const CMat q1 = svd.matrixU().leftCols(r);
    const CVec proj = matched - q1 * (q1.adjoint() * matched);
    if (proj.norm() > 1e-9 * std::max(1.0, matched.norm())) {
      v[m] = proj;
      any = true;
    }
  }
  if (!any) return std::nullopt;
  return v;
}

double zeta_ul_from_gains(const CMat& gains, const std::vector<double>& qnorm2,
                          const NetworkTopology& topo,
                          const ProfilingVector& kappa, double max_power,
                          double noise_power) {
  const std::size_t cells = topo.cells();
  const std::size_t devices = topo.devices();
  std::vector<double> gmin(cells, kInf);
  for (std::size_t j = 0; j < devices; ++j) {
    const std::size_t m = topo.cell_of_device[j];
    gmin[m] = std::min(gmin[m], std::norm(gains(static_cast<Eigen::Index>(m),
                                                static_cast<Eigen::Index>(j))));
  }
  for (std::size_t m = 0; m < cells; ++m)
    if (!(gmin[m] > kGain2Floor)) return kInf;
  double z = 0.0;
  for (std::size_t m = 0; m < cells; ++m) {
    double mse = qnorm2[m] * noise_power / (max_power * gmin[m]);
    for (std::size_t j = 0; j < devices; ++j) {
      const std::size_t l = topo.cell_of_device[j];
      if (l == m) continue;
      mse += (gmin[l] / gmin[m]) *
             std::norm(gains(static_cast<Eigen::Index>(m),
                             static_cast<Eigen::Index>(j))) /
             std::norm(gains(static_cast<Eigen::Index>(l),
                             static_cast<Eigen::Index>(j)));
    }
    if (kappa.kappa[m] > 0.0)
      z = std::max(z, mse / kappa.kappa[m]);
    else if (mse > 1e-12)
      return kInf;
  }
  return z;
}

double zeta_dl_from_gains(const CMat& gains, const NetworkTopology& topo,
                          const ProfilingVector& kappa, double noise_power) {
  const std::size_t cells = topo.cells();
  const std::size_t devices = topo.devices();
  std::vector<double> measure(cells, 0.0);
  for (std::size_t k = 0; k < devices; ++k) {
    const std::size_t m = topo.cell_of_device[k];
    const double own = std::norm(gains(static_cast<Eigen::Index>(m),
                                       static_cast<Eigen::Index>(k)));
    if (!(own > kGain2Floor)) return kInf;
    double interf = 0.0;
    for (std::size_t l = 0; l < cells; ++l)
      if (l != m)
        interf += std::norm(gains(static_cast<Eigen::Index>(l),
                                  static_cast<Eigen::Index>(k)));
    measure[m] += (interf + noise_power) / own;
  }
  double z = 0.0;
  for (std::size_t m = 0; m < cells; ++m) {
    if (kappa.kappa[m] > 0.0)
      z = std::max(z, measure[m] / kappa.kappa[m]);
    else if (measure[m] > 1e-12)
      return kInf;
  }
  return z;
}

CMat beamformed_gains(const CombinedChannels& h_bar,
                      const std::vector<CVec>& w) {
  const std::size_t cells = h_bar.size();
  const std::size_t devices = h_bar.empty() ? 0 : h_bar[0].size();
  CMat gains(static_cast<Eigen::Index>(cells),
             static_cast<Eigen::Index>(devices));
  for (std::size_t m = 0; m < cells; ++m)
    for (std::size_t j = 0; j < devices; ++j)
      gains(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
          w[m].dot(h_bar[m][j]);
  return gains;
}

StarRisConfig pad_config(StarRisConfig cfg, std::size_t q) {
  if (cfg.elements() > q)
    throw ConfigError(
        "RIS configuration has more elements than the channel set");
  while (cfg.elements() < q) {
    cfg.mode.push_back(ElementMode::Off);
    cfg.phase_t.push_back(0.0);
    cfg.phase_r.push_back(0.0);
  }
  return cfg;
}

double wrap_phase(double th) {
  th = std::fmod(th, 2.0 * kPi);
  if (th < 0.0) th += 2.0 * kPi;
  return th;
}

}  // namespace

void ProfilingVector::validate(std::size_t cells) const {
  if (kappa.size() != cells)
    throw ConfigError("profiling vector length does not match cell count");
  double sum = 0.0;
  for (double k : kappa) {
    if (k < 0.0) throw ConfigError("profiling weights must be >= 0");
    sum += k;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("profiling weights must sum to 1");
}

UplinkScaState init_uplink_state(const CombinedChannels& h_bar,
                                 const NetworkTopology& topo,
                                 const ProfilingVector& kappa,
                                 double max_power, double noise_power) {
  kappa.validate(topo.cells());
  std::vector<CVec> q(topo.cells());
  for (std::size_t m = 0; m < topo.cells(); ++m) {
    CVec v = CVec::Zero(h_bar[m][0].size());
    for (std::size_t k : topo.devices_in_cell(m)) v += h_bar[m][k];
    q[m] = v;
  }
  return finish_uplink_state(std::move(q), h_bar, topo, kappa, max_power,
                             noise_power, kInitMargin);
}

DownlinkScaState init_downlink_state(const CombinedChannels& h_bar,
                                     const NetworkTopology& topo,
                                     const ProfilingVector& kappa,
                                     double max_power, double noise_power) {
  kappa.validate(topo.cells());
  std::vector<CVec> t(topo.cells());
  for (std::size_t m = 0; m < topo.cells(); ++m) {
    CVec v = CVec::Zero(h_bar[m][0].size());
    for (std::size_t k : topo.devices_in_cell(m)) v += h_bar[m][k];
    const double nv = v.norm();
    if (!(nv > kDegenerateGain))
      throw SolverError("downlink start degenerate: matched filter vanished");
    t[m] = std::sqrt(max_power) * v / nv;
  }
  return finish_downlink_state(std::move(t), h_bar, topo, kappa, max_power,
                               noise_power);
}

double uplink_violation(const UplinkScaState& state,
                        const CombinedChannels& h_bar,
                        const NetworkTopology& topo,
                        const ProfilingVector& kappa, double max_power,
                        double noise_power) {
  const std::size_t cells = topo.cells();
  const std::size_t devices = topo.devices();
  double v = -kInf;
  for (std::size_t m = 0; m < cells; ++m) {
    for (std::size_t j = 0; j < devices; ++j) {
      const std::size_t l = topo.cell_of_device[j];
      if (l == m) continue;
      const double den = std::norm(state.q[l].dot(h_bar[l][j]));
      if (!(den > kGain2Floor)) return kInf;
      const double b_req = std::norm(state.q[m].dot(h_bar[m][j])) / den;
      v = std::max(v, rel_excess(b_req,
                                 state.b(static_cast<Eigen::Index>(m),
                                         static_cast<Eigen::Index>(j))));
    }
    const double lhs = state.b.row(static_cast<Eigen::Index>(m)).sum() +
                       noise_power * state.q[m].squaredNorm();
    v = std::max(v, rel_excess(lhs, kappa.kappa[m] * state.zeta));
  }
  for (std::size_t l = 0; l < cells; ++l)
    for (std::size_t k : topo.devices_in_cell(l))
      v = std::max(v, rel_excess(1.0 / max_power,
                                 std::norm(state.q[l].dot(h_bar[l][k]))));
  return v;
}

double downlink_violation(const DownlinkScaState& state,
                          const CombinedChannels& h_bar,
                          const NetworkTopology& topo,
                          const ProfilingVector& kappa, double max_power,
                          double noise_power) {
  const std::size_t cells = topo.cells();
  const std::size_t devices = topo.devices();
  double v = -kInf;
  for (std::size_t k = 0; k < devices; ++k) {
    const std::size_t m = topo.cell_of_device[k];
    const double own = std::norm(state.t[m].dot(h_bar[m][k]));
    if (!(own > kGain2Floor)) return kInf;
    double interf = 0.0;
    for (std::size_t l = 0; l < cells; ++l)
      if (l != m) interf += std::norm(state.t[l].dot(h_bar[l][k]));
    v = std::max(v, rel_excess((interf + noise_power) / own,
                               state.d(static_cast<Eigen::Index>(k))));
  }
  for (std::size_t m = 0; m < cells; ++m) {
    double sum = 0.0;
    for (std::size_t k : topo.devices_in_cell(m))
      sum += state.d(static_cast<Eigen::Index>(k));
    v = std::max(v, rel_excess(sum, kappa.kappa[m] * state.zeta));
    v = std::max(v, rel_excess(state.t[m].squaredNorm(), max_power));
  }
  return v;
}

namespace {

std::pair<UplinkScaState, SolveReport> run_uplink_sca(
    const CombinedChannels& h_bar, const NetworkTopology& topo,
    const ProfilingVector& kappa, double max_power, double noise_power,
    const ScaOptions& opts, UplinkScaState cur) {
  const Eigen::Index N = h_bar.at(0).at(0).size();
  const UplinkLayout L(topo, N);

  SolveReport rep;
  rep.zeta_trajectory.push_back(cur.zeta);
  int iters = 0;
  std::string note;

  for (int it = 1; it <= opts.max_iters; ++it) {
    ConeProblem prob(L.nvars);
    {
      RVec c = RVec::Zero(L.nvars);
      c(L.zoff()) = 1.0;
      prob.set_objective(c);
    }
    // per-victim error budget
    for (std::size_t m = 0; m < L.cells; ++m) {
      if (noise_power > 0.0) {
        RMat U = RMat::Zero(2 * N, L.nvars);
        const double sig = std::sqrt(noise_power);
        for (Eigen::Index i = 0; i < 2 * N; ++i) U(i, L.qoff(m) + i) = sig;
        RVec y = RVec::Zero(L.nvars);
        y(L.zoff()) = kappa.kappa[m];
        for (std::size_t j = 0; j < L.devices; ++j)
          if (L.pair_index[m][j] >= 0) y(L.boff(L.pair_index[m][j])) = -1.0;
        prob.add_quad_over_lin(U, RVec::Zero(2 * N), y, 0.0,
                               RVec::Zero(L.nvars), 1.0);
      } else {
        RVec row = RVec::Zero(L.nvars);
        row(L.zoff()) = -kappa.kappa[m];
        for (std::size_t j = 0; j < L.devices; ++j)
          if (L.pair_index[m][j] >= 0) row(L.boff(L.pair_index[m][j])) = 1.0;
        prob.add_linear(row, 0.0);
      }
    }
    // interference terms, denominator linearized at the current iterate
    for (std::size_t p = 0; p < L.pairs.size(); ++p) {
      const auto [m, j] = L.pairs[p];
      const std::size_t l = topo.cell_of_device[j];
      RVec r1 = RVec::Zero(L.nvars), r2 = RVec::Zero(L.nvars);
      gain_rows(r1, r2, L.qoff(m), h_bar[m][j]);
      RMat U(2, L.nvars);
      U.row(0) = r1;
      U.row(1) = r2;
      RVec y = RVec::Zero(L.nvars);
      y(L.boff(static_cast<int>(p))) = 1.0;
      const cxd a0 = cur.q[l].dot(h_bar[l][j]);
      RVec sr = RVec::Zero(L.nvars), si = RVec::Zero(L.nvars);
      gain_rows(sr, si, L.qoff(l), h_bar[l][j]);
      const RVec s = 2.0 * (a0.real() * sr + a0.imag() * si);
      prob.add_quad_over_lin(U, RVec::Zero(2), y, 0.0, s, -std::norm(a0));
    }
    // linearized min-power constraint per served device
    for (std::size_t l = 0; l < L.cells; ++l)
      for (std::size_t k : topo.devices_in_cell(l)) {
        const cxd a0 = cur.q[l].dot(h_bar[l][k]);
        RVec sr = RVec::Zero(L.nvars), si = RVec::Zero(L.nvars);
        gain_rows(sr, si, L.qoff(l), h_bar[l][k]);
        const RVec row = -2.0 * (a0.real() * sr + a0.imag() * si);
        prob.add_linear(row, -1.0 / max_power - std::norm(a0));
      }

    SolverOptions sopt = opts.inner;
    sopt.use_hint = true;
    sopt.x_hint = pack_uplink(cur, L);
    ConeSolution sol = prob.solve(sopt);
    UplinkScaState cand = unpack_uplink(sol.x, L);
    double viol =
        uplink_violation(cand, h_bar, topo, kappa, max_power, noise_power);
    if (!sol.ok() || viol > kFeasSlack) {
      // a sour warm start is not worth ending the stage over
      sopt.use_hint = false;
      sol = prob.solve(sopt);
      cand = unpack_uplink(sol.x, L);
      viol = uplink_violation(cand, h_bar, topo, kappa, max_power, noise_power);
    }
    if (sol.status == SolveStatus::Infeasible ||
        sol.status == SolveStatus::Unbounded) {
      note = "inner solve failed: " + sol.message;
      break;
    }
    if (viol > kFeasSlack) {
      note = "inner iterate rejected: original constraints violated" +
             inner_detail(sol, viol);
      break;
    }
    if (cand.zeta > cur.zeta + kDescentSlack * std::max(1.0, cur.zeta)) {
      note = "inner iterate rejected: objective increased";
      break;
    }
    const double delta = cur.zeta - cand.zeta;
    // keep the better point: a within-slack step must not nudge a finished
    // iterate off an exact optimum
    if (cand.zeta <= cur.zeta) cur = std::move(cand);
    rep.zeta_trajectory.push_back(cur.zeta);
    iters = it;
    if (std::abs(delta) <= opts.rel_tol * std::max(1.0, cur.zeta)) {
      rep.converged = true;
      break;
    }
  }

  rep.stage_iterations = {iters};
  if (!rep.converged && note.empty()) note = "iteration limit reached";
  rep.message = note;
  rep.achieved_gaps.resize(L.cells);
  for (std::size_t m = 0; m < L.cells; ++m)
    rep.achieved_gaps[m] = kappa.kappa[m] * cur.zeta;
  return {std::move(cur), std::move(rep)};
}

}  // namespace

std::pair<UplinkScaState, SolveReport> solve_uplink_sca(
    const CombinedChannels& h_bar, const NetworkTopology& topo,
    const ProfilingVector& kappa, double max_power, double noise_power,
    const ScaOptions& opts, const UplinkScaState* init) {
  kappa.validate(topo.cells());
  if (max_power <= 0.0) throw ConfigError("uplink power budget must be > 0");
  if (noise_power < 0.0) throw ConfigError("noise power must be >= 0");
  if (init) {
    UplinkScaState cur = *init;
    if (uplink_violation(cur, h_bar, topo, kappa, max_power, noise_power) >
        kFeasSlack)
      throw SolverError(
          "uplink SCA start violates the original constraints; "
          "re-initialize near a feasible design");
    return run_uplink_sca(h_bar, topo, kappa, max_power, noise_power, opts,
                          std::move(cur));
  }
  auto best = run_uplink_sca(
      h_bar, topo, kappa, max_power, noise_power, opts,
      init_uplink_state(h_bar, topo, kappa, max_power, noise_power));
  // the matched start can sit in an interference-limited basin; a nulled
  // start probes the complementary one
  if (const auto dirs = nulled_directions(h_bar, topo)) {
    try {
      auto alt = run_uplink_sca(
          h_bar, topo, kappa, max_power, noise_power, opts,
          finish_uplink_state(*dirs, h_bar, topo, kappa, max_power,
                              noise_power, kInitMargin));
      if (alt.first.zeta < best.first.zeta) best = std::move(alt);
    } catch (const SolverError&) {
      // nulled start degenerate on this instance; matched result stands
    }
  }
  return best;
}

namespace {

std::pair<DownlinkScaState, SolveReport> run_downlink_sca(
    const CombinedChannels& h_bar, const NetworkTopology& topo,
    const ProfilingVector& kappa, double max_power, double noise_power,
    const ScaOptions& opts, DownlinkScaState cur) {
  const Eigen::Index N = h_bar.at(0).at(0).size();
  const DownlinkLayout L(topo, N);

  SolveReport rep;
  rep.zeta_trajectory.push_back(cur.zeta);
  int iters = 0;
  std::string note;

  for (int it = 1; it <= opts.max_iters; ++it) {
    ConeProblem prob(L.nvars);
    {
      RVec c = RVec::Zero(L.nvars);
      c(L.zoff()) = 1.0;
      prob.set_objective(c);
    }
    // per-cell error budget
    for (std::size_t m = 0; m < L.cells; ++m) {
      RVec row = RVec::Zero(L.nvars);
      row(L.zoff()) = -kappa.kappa[m];
      for (std::size_t k : topo.devices_in_cell(m)) row(L.doff(k)) = 1.0;
      prob.add_linear(row, 0.0);
    }
    // per-device error, serving gain linearized at the current iterate
    for (std::size_t k = 0; k < L.devices; ++k) {
      const std::size_t m = topo.cell_of_device[k];
      const Eigen::Index rows =
          2 * (static_cast<Eigen::Index>(L.cells) - 1) + 1;
      RMat U = RMat::Zero(rows, L.nvars);
      RVec u0 = RVec::Zero(rows);
      Eigen::Index rr = 0;
      for (std::size_t l = 0; l < L.cells; ++l) {
        if (l == m) continue;
        RVec r1 = RVec::Zero(L.nvars), r2 = RVec::Zero(L.nvars);
        gain_rows(r1, r2, L.toff(l), h_bar[l][k]);
        U.row(rr++) = r1;
        U.row(rr++) = r2;
      }
      u0(rr) = std::sqrt(noise_power);
      RVec y = RVec::Zero(L.nvars);
      y(L.doff(k)) = 1.0;
      const cxd c0 = cur.t[m].dot(h_bar[m][k]);
      RVec sr = RVec::Zero(L.nvars), si = RVec::Zero(L.nvars);
      gain_rows(sr, si, L.toff(m), h_bar[m][k]);
      const RVec s = 2.0 * (c0.real() * sr + c0.imag() * si);
      prob.add_quad_over_lin(U, u0, y, 0.0, s, -std::norm(c0));
    }
    // transmit power cap
    for (std::size_t m = 0; m < L.cells; ++m) {
      RMat A1 = RMat::Zero(2 * N, L.nvars);
      for (Eigen::Index i = 0; i < 2 * N; ++i) A1(i, L.toff(m) + i) = 1.0;
      prob.add_soc(RVec::Zero(L.nvars), std::sqrt(max_power), A1,
                   RVec::Zero(2 * N));
    }

    SolverOptions sopt = opts.inner;
    sopt.use_hint = true;
    sopt.x_hint = pack_downlink(cur, L);
    ConeSolution sol = prob.solve(sopt);
    DownlinkScaState cand = unpack_downlink(sol.x, L);
    double viol =
        downlink_violation(cand, h_bar, topo, kappa, max_power, noise_power);
    if (!sol.ok() || viol > kFeasSlack) {
      sopt.use_hint = false;
      sol = prob.solve(sopt);
      cand = unpack_downlink(sol.x, L);
      viol =
          downlink_violation(cand, h_bar, topo, kappa, max_power, noise_power);
    }
    if (sol.status == SolveStatus::Infeasible ||
        sol.status == SolveStatus::Unbounded) {
      note = "inner solve failed: " + sol.message;
      break;
    }
    if (viol > kFeasSlack) {
      note = "inner iterate rejected: original constraints violated" +
             inner_detail(sol, viol);
      break;
    }
    if (cand.zeta > cur.zeta + kDescentSlack * std::max(1.0, cur.zeta)) {
      note = "inner iterate rejected: objective increased";
      break;
    }
    const double delta = cur.zeta - cand.zeta;
    // keep the better point: a within-slack step must not nudge a finished
    // iterate off an exact optimum
    if (cand.zeta <= cur.zeta) cur = std::move(cand);
    rep.zeta_trajectory.push_back(cur.zeta);
    iters = it;
    if (std::abs(delta) <= opts.rel_tol * std::max(1.0, cur.zeta)) {
      rep.converged = true;
      break;
    }
  }

  rep.stage_iterations = {iters};
  if (!rep.converged && note.empty()) note = "iteration limit reached";
  rep.message = note;
  rep.achieved_gaps.resize(L.cells);
  for (std::size_t m = 0; m < L.cells; ++m)
    rep.achieved_gaps[m] = kappa.kappa[m] * cur.zeta;
  return {std::move(cur), std::move(rep)};
}

}  // namespace

std::pair<DownlinkScaState, SolveReport> solve_downlink_sca(
    const CombinedChannels& h_bar, const NetworkTopology& topo,
    const ProfilingVector& kappa, double max_power, double noise_power,
    const ScaOptions& opts, const DownlinkScaState* init) {
  kappa.validate(topo.cells());
  if (max_power <= 0.0) throw ConfigError("downlink power budget must be > 0");
  if (noise_power < 0.0) throw ConfigError("noise power must be >= 0");
  if (init) {
    DownlinkScaState cur = *init;
    if (downlink_violation(cur, h_bar, topo, kappa, max_power, noise_power) >
        kFeasSlack)
      throw SolverError(
          "downlink SCA start violates the original constraints; "
          "re-initialize near a feasible design");
    return run_downlink_sca(h_bar, topo, kappa, max_power, noise_power, opts,
                            std::move(cur));
  }
  auto best = run_downlink_sca(
      h_bar, topo, kappa, max_power, noise_power, opts,
      init_downlink_state(h_bar, topo, kappa, max_power, noise_power));
  if (auto dirs = nulled_directions(h_bar, topo)) {
    try {
      for (auto& d : *dirs) {
        const double nd = d.norm();
        if (nd > kDegenerateGain) d *= std::sqrt(max_power) / nd;
      }
      auto alt = run_downlink_sca(
          h_bar, topo, kappa, max_power, noise_power, opts,
          finish_downlink_state(std::move(*dirs), h_bar, topo, kappa,
                                max_power, noise_power));
      if (alt.first.zeta < best.first.zeta) best = std::move(alt);
    } catch (const SolverError&) {
      // nulled start degenerate on this instance; matched result stands
    }
  }
  return best;
}

double uplink_bottleneck(const ChannelSet& ch, const NetworkTopology& topo,
                         const std::vector<CVec>& q,
                         const ProfilingVector& kappa, double max_power,
                         double noise_power, const StarRisConfig& ris) {
  kappa.validate(topo.cells());
  const auto h_bar = combined_all(ch, topo, ris);
  std::vector<double> qnorm2(topo.cells());
  for (std::size_t m = 0; m < topo.cells(); ++m) qnorm2[m] = q[m].squaredNorm();
  return zeta_ul_from_gains(beamformed_gains(h_bar, q), qnorm2, topo, kappa,
                            max_power, noise_power);
}

double downlink_bottleneck(const ChannelSet& ch, const NetworkTopology& topo,
                           const std::vector<CVec>& t,
                           const ProfilingVector& kappa, double noise_power,
                           const StarRisConfig& ris) {
  kappa.validate(topo.cells());
  const auto h_bar = combined_all(ch, topo, ris);
  return zeta_dl_from_gains(beamformed_gains(h_bar, t), topo, kappa,
                            noise_power);
}

StarRisConfig optimize_ris_phases(const ChannelSet& ch,
                                  const NetworkTopology& topo,
                                  LinkDirection direction,
                                  const std::vector<CVec>& beamformers,
                                  const ProfilingVector& kappa,
                                  double max_power, double noise_power,
                                  const StarRisConfig& init,
                                  const PhaseOptions& opts) {
  kappa.validate(topo.cells());
  StarRisConfig cfg = init;
  const std::size_t q_count = cfg.elements();
  if (q_count == 0) return cfg;
  if (static_cast<Eigen::Index>(q_count) != ch.elements())
    throw ConfigError("RIS configuration size does not match the channel set");

  const std::size_t cells = topo.cells();
  const std::size_t devices = topo.devices();
  std::vector<double> qnorm2(cells);
  for (std::size_t m = 0; m < cells; ++m)
    qnorm2[m] = beamformers[m].squaredNorm();

  const auto h_bar = combined_all(ch, topo, cfg);
  CMat gains = beamformed_gains(h_bar, beamformers);

  auto eval = [&](const CMat& g) {
    return direction == LinkDirection::Uplink
               ? zeta_ul_from_gains(g, qnorm2, topo, kappa, max_power,
                                    noise_power)
               : zeta_dl_from_gains(g, topo, kappa, noise_power);
  };

  double cur = eval(gains);
  if (!std::isfinite(cur)) return cfg;

  CMat riscol(static_cast<Eigen::Index>(cells),
              static_cast<Eigen::Index>(devices));  // per-element gain slopes
  CMat base = gains;
  CMat scratch = gains;

  for (int pass = 0; pass < opts.max_passes; ++pass) {
    const double pass_start = cur;
    for (std::size_t e = 0; e < q_count; ++e) {
      if (cfg.mode[e] == ElementMode::Off) continue;
      const CellSide side =
          cfg.mode[e] == ElementMode::T ? CellSide::T : CellSide::R;
      std::vector<std::size_t> side_cells;
      for (std::size_t m = 0; m < cells; ++m)
        if (topo.side_of_cell[m] == side) side_cells.push_back(m);
      if (side_cells.empty()) continue;

      double& phase = cfg.mode[e] == ElementMode::T ? cfg.phase_t[e]
                                                    : cfg.phase_r[e];
      const cxd coef_cur = std::polar(1.0, phase);
      for (std::size_t m : side_cells)
        for (std::size_t j = 0; j < devices; ++j) {
          const CVec path = ch.ris_to_bs[m]
                                .row(static_cast<Eigen::Index>(e))
                                .adjoint() *
                            ch.device_to_ris[j](static_cast<Eigen::Index>(e));
          const cxd slope = beamformers[m].dot(path);
          riscol(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
              slope;
          base(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
              gains(static_cast<Eigen::Index>(m),
                    static_cast<Eigen::Index>(j)) -
              coef_cur * slope;
        }

      scratch = gains;
      auto value_at = [&](double th) {
        const cxd c = std::polar(1.0, th);
        for (std::size_t m : side_cells)
          for (std::size_t j = 0; j < devices; ++j)
            scratch(static_cast<Eigen::Index>(m),
                    static_cast<Eigen::Index>(j)) =
                base(static_cast<Eigen::Index>(m),
                     static_cast<Eigen::Index>(j)) +
                c * riscol(static_cast<Eigen::Index>(m),
                           static_cast<Eigen::Index>(j));
        return eval(scratch);
      };

      double th_best = phase;
      double f_best = cur;
      for (int i = 0; i < opts.grid_points; ++i) {
        const double th = 2.0 * kPi * i / opts.grid_points;
        const double f = value_at(th);
        if (f < f_best) {
          f_best = f;
          th_best = th;
        }
      }
      // golden-section refinement around the best grid point
      {
        const double delta = 2.0 * kPi / opts.grid_points;
        double lo = th_best - delta, hi = th_best + delta;
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = value_at(x1), f2 = value_at(x2);
        while (hi - lo > opts.refine_tol) {
          if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = value_at(x1);
          } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = value_at(x2);
          }
        }
        const double mid = 0.5 * (lo + hi);
        const double fm = value_at(mid);
        if (fm < f_best) {
          f_best = fm;
          th_best = mid;
        }
      }

      if (f_best < cur) {
        cur = f_best;
        phase = wrap_phase(th_best);
        const cxd c = std::polar(1.0, phase);
        for (std::size_t m : side_cells)
          for (std::size_t j = 0; j < devices; ++j)
            gains(static_cast<Eigen::Index>(m),
                  static_cast<Eigen::Index>(j)) =
                base(static_cast<Eigen::Index>(m),
                     static_cast<Eigen::Index>(j)) +
                c * riscol(static_cast<Eigen::Index>(m),
                           static_cast<Eigen::Index>(j));
      }
    }
    if (pass_start - cur <= opts.rel_tol * std::max(1.0, pass_start)) break;
  }
  return cfg;
}

TransceiverSolution alternating_optimize(
    const ChannelSet& ch, const NetworkTopology& topo,
    const ProfilingVector& kappa, double p_ul, double p_dl, double noise_ul,
    double noise_dl, const AlternatingOptions& opts, SolveReport* report,
    const TransceiverSolution* warm) {
  kappa.validate(topo.cells());
  const std::size_t q_count = static_cast<std::size_t>(ch.elements());
  const StarRisConfig cold = q_count > 0
                                 ? make_config(opts.mode_policy, q_count)
                                 : StarRisConfig::all_off(0);

  SolveReport rep;
  TransceiverSolution out;
  out.uplink.max_power = p_ul;
  out.uplink.noise_power = noise_ul;
  out.downlink.max_power = p_dl;
  out.downlink.noise_power = noise_dl;

  // ---------- uplink ----------
  {
    StarRisConfig ris = cold;
    std::vector<CVec> best_q;
    double best = kInf;
    bool converged = false;
    if (warm && !warm->uplink.r.empty()) {
      StarRisConfig wr = pad_config(warm->ris_ul, q_count);
      const double v =
          uplink_bottleneck(ch, topo, warm->uplink.r, kappa, p_ul, noise_ul,
                            wr);
      if (std::isfinite(v)) {
        ris = wr;
        best_q = warm->uplink.r;
        best = v;
      }
    }
    if (q_count == 0) {
      const auto h_bar = combined_all(ch, topo, ris);
      UplinkScaState seed;
      const UplinkScaState* seedp = nullptr;
      if (!best_q.empty()) {
        try {
          seed = finish_uplink_state(best_q, h_bar, topo, kappa, p_ul,
                                     noise_ul, kInitMargin);
          seedp = &seed;
        } catch (const SolverError&) {
          seedp = nullptr;
        }
      }
      auto [st, r1] = solve_uplink_sca(h_bar, topo, kappa, p_ul, noise_ul,
                                       opts.sca, seedp);
      const double v =
          uplink_bottleneck(ch, topo, st.q, kappa, p_ul, noise_ul, ris);
      if (v < best) {
        best = v;
        best_q = std::move(st.q);
      }
      converged = r1.converged;
      rep.stage_iterations.insert(rep.stage_iterations.end(),
                                  r1.stage_iterations.begin(),
                                  r1.stage_iterations.end());
      rep.zeta_trajectory.push_back(best);
    } else {
      for (int round = 0; round < opts.max_outer; ++round) {
        const double before = best;
        const auto h_bar = combined_all(ch, topo, ris);
        UplinkScaState seed;
        const UplinkScaState* seedp = nullptr;
        if (!best_q.empty()) {
          try {
            seed = finish_uplink_state(best_q, h_bar, topo, kappa, p_ul,
                                       noise_ul, kInitMargin);
            seedp = &seed;
          } catch (const SolverError&) {
            seedp = nullptr;
          }
        }
        auto [st, r1] = solve_uplink_sca(h_bar, topo, kappa, p_ul, noise_ul,
                                         opts.sca, seedp);
        rep.stage_iterations.insert(rep.stage_iterations.end(),
                                    r1.stage_iterations.begin(),
                                    r1.stage_iterations.end());
        const double v =
            uplink_bottleneck(ch, topo, st.q, kappa, p_ul, noise_ul, ris);
        if (v < best) {
          best = v;
          best_q = std::move(st.q);
        }
        if (best_q.empty())
          throw SolverError("uplink optimization found no feasible design");
        ris = optimize_ris_phases(ch, topo, LinkDirection::Uplink, best_q,
                                  kappa, p_ul, noise_ul, ris, opts.phase);
        const double v2 =
            uplink_bottleneck(ch, topo, best_q, kappa, p_ul, noise_ul, ris);
        if (v2 < best) best = v2;
        rep.zeta_trajectory.push_back(best);
        if (std::isfinite(before) &&
            before - best <= opts.outer_rel_tol * std::max(1.0, before)) {
          converged = true;
          break;
        }
      }
    }
    if (best_q.empty())
      throw SolverError("uplink optimization found no feasible design");
    out.uplink.r = std::move(best_q);
    const auto h_bar = combined_all(ch, topo, ris);
    set_normalizers(out.uplink, h_bar, topo);
    out.ris_ul = std::move(ris);
    out.zeta_ul = best;
    rep.converged = converged;
  }

  // ---------- downlink ----------
  {
    StarRisConfig ris = cold;
    std::vector<CVec> best_t;
    double best = kInf;
    bool converged = false;
    if (warm && !warm->downlink.t.empty()) {
      StarRisConfig wr = pad_config(warm->ris_dl, q_count);
      const double v =
          downlink_bottleneck(ch, topo, warm->downlink.t, kappa, noise_dl, wr);
      if (std::isfinite(v)) {
        ris = wr;
        best_t = warm->downlink.t;
        best = v;
      }
    }
    if (q_count == 0) {
      const auto h_bar = combined_all(ch, topo, ris);
      DownlinkScaState seed;
      const DownlinkScaState* seedp = nullptr;
      if (!best_t.empty()) {
        try {
          seed = finish_downlink_state(best_t, h_bar, topo, kappa, p_dl,
                                       noise_dl);
          seedp = &seed;
        } catch (const SolverError&) {
          seedp = nullptr;
        }
      }
      auto [st, r1] = solve_downlink_sca(h_bar, topo, kappa, p_dl, noise_dl,
                                         opts.sca, seedp);
      const double v =
          downlink_bottleneck(ch, topo, st.t, kappa, noise_dl, ris);
      if (v < best) {
        best = v;
        best_t = std::move(st.t);
      }
      converged = r1.converged;
      rep.stage_iterations.insert(rep.stage_iterations.end(),
                                  r1.stage_iterations.begin(),
                                  r1.stage_iterations.end());
      rep.zeta_trajectory.push_back(best);
    } else {
      for (int round = 0; round < opts.max_outer; ++round) {
        const double before = best;
        const auto h_bar = combined_all(ch, topo, ris);
        DownlinkScaState seed;
        const DownlinkScaState* seedp = nullptr;
        if (!best_t.empty()) {
          try {
            seed = finish_downlink_state(best_t, h_bar, topo, kappa, p_dl,
                                         noise_dl);
            seedp = &seed;
          } catch (const SolverError&) {
            seedp = nullptr;
          }
        }
        auto [st, r1] = solve_downlink_sca(h_bar, topo, kappa, p_dl, noise_dl,
                                           opts.sca, seedp);
        rep.stage_iterations.insert(rep.stage_iterations.end(),
                                    r1.stage_iterations.begin(),
                                    r1.stage_iterations.end());
        const double v =
            downlink_bottleneck(ch, topo, st.t, kappa, noise_dl, ris);
        if (v < best) {
          best = v;
          best_t = std::move(st.t);
        }
        if (best_t.empty())
          throw SolverError("downlink optimization found no feasible design");
        ris = optimize_ris_phases(ch, topo, LinkDirection::Downlink, best_t,
                                  kappa, p_dl, noise_dl, ris, opts.phase);
        const double v2 =
            downlink_bottleneck(ch, topo, best_t, kappa, noise_dl, ris);
        if (v2 < best) best = v2;
        rep.zeta_trajectory.push_back(best);
        if (std::isfinite(before) &&
            before - best <= opts.outer_rel_tol * std::max(1.0, before)) {
          converged = true;
          break;
        }
      }
    }
    if (best_t.empty())
      throw SolverError("downlink optimization found no feasible design");
    out.downlink.t = std::move(best_t);
    out.ris_dl = std::move(ris);
    out.zeta_dl = best;
    rep.converged = rep.converged && converged;
  }

  out.gaps.resize(topo.cells());
  for (std::size_t m = 0; m < topo.cells(); ++m)
    out.gaps[m] = kappa.kappa[m] * (out.zeta_ul + out.zeta_dl);
  rep.achieved_gaps = out.gaps;
  if (report) *report = std::move(rep);
  return out;
}

std::vector<GapPoint> gap_tradeoff_sweep(
    const ChannelSet& ch, const NetworkTopology& topo,
    const std::vector<ProfilingVector>& kappa_list, double p_ul, double p_dl,
    double noise_ul, double noise_dl, const AlternatingOptions& opts) {
  std::vector<GapPoint> points;
  points.reserve(kappa_list.size());
  // chaining each point off the previous design keeps the traced boundary
  // coherent: the old design stays feasible under the new weights, so a
  // sweep along decreasing kappa_m can only shrink that cell's gap
  TransceiverSolution warm;
  bool have_warm = false;
  for (const auto& kappa : kappa_list) {
    GapPoint pt;
    pt.kappa = kappa.kappa;
    try {
      SolveReport rep;
      const TransceiverSolution sol =
          alternating_optimize(ch, topo, kappa, p_ul, p_dl, noise_ul, noise_dl,
                               opts, &rep, have_warm ? &warm : nullptr);
      pt.gaps = sol.gaps;
      pt.zeta_ul = sol.zeta_ul;
      pt.zeta_dl = sol.zeta_dl;
      pt.converged = rep.converged;
      pt.ok = true;
      warm = sol;
      have_warm = true;
    } catch (const SolverError& e) {
      pt.error = e.what();
    } catch (const ConfigError& e) {
      pt.error = e.what();
    } catch (const DegenerateChannelError& e) {
      pt.error = e.what();
    }
    points.push_back(std::move(pt));
  }
  return points;
}

}  // namespace airfl

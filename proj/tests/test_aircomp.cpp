#include <doctest.h>

#include "airfl/aircomp.hpp"
#include "airfl/channel.hpp"

using namespace airfl;

namespace {

// small randomized instance: M cells on a line, RIS midway, random devices
struct Instance {
  NetworkTopology topo;
  ChannelSet ch;
  CombinedChannels h_bar;
  StarRisConfig ris;
};

Instance make_instance(std::size_t cells, std::size_t antennas,
                       std::size_t devices_per_cell, std::size_t elements,
                       std::uint64_t seed) {
  TopologySpec spec;
  for (std::size_t m = 0; m < cells; ++m)
    spec.bs_positions.push_back({40.0 * static_cast<double>(m), 0.0});
  spec.ris_position = {20.0, 0.0};
  spec.devices_per_cell.assign(cells, devices_per_cell);
  spec.antennas = antennas;
  spec.elements = elements;
  Instance inst;
  inst.topo = build_topology(spec, seed);
  Rng rng(derive_seed(seed, {1}));
  inst.ch = sample_channels(inst.topo, FadingParams{}, rng);
  inst.ris = make_config(ModePolicy::EqualSplit, elements);
  Rng prng(derive_seed(seed, {2}));
  for (std::size_t q = 0; q < elements; ++q) {
    inst.ris.phase_t[q] = prng.uniform(0.0, 2.0 * kPi);
    inst.ris.phase_r[q] = prng.uniform(0.0, 2.0 * kPi);
  }
  inst.h_bar = combined_all(inst.ch, inst.topo, inst.ris);
  return inst;
}

UplinkDesign random_uplink(const Instance& inst, double power, double noise,
                           std::uint64_t seed) {
  UplinkDesign d;
  d.max_power = power;
  d.noise_power = noise;
  Rng rng(derive_seed(seed, {3}));
  for (std::size_t m = 0; m < inst.topo.cells(); ++m)
    d.r.push_back(rng.complex_gaussian_vector(
        static_cast<Eigen::Index>(inst.topo.antennas)));
  set_normalizers(d, inst.h_bar, inst.topo);
  return d;
}

DownlinkDesign random_downlink(const Instance& inst, double power,
                               double noise, std::uint64_t seed) {
  DownlinkDesign d;
  d.max_power = power;
  d.noise_power = noise;
  Rng rng(derive_seed(seed, {4}));
  for (std::size_t m = 0; m < inst.topo.cells(); ++m) {
    CVec t = rng.complex_gaussian_vector(
        static_cast<Eigen::Index>(inst.topo.antennas));
    d.t.push_back(std::sqrt(power) * t / t.norm());
  }
  return d;
}

}  // namespace

TEST_CASE("transmit scalar inverts the effective channel") {
  // r^H h = 1, eta = 4 -> b = 2
  CVec r = CVec::Constant(1, cxd(1, 0));
  CVec h = CVec::Constant(1, cxd(1, 0));
  CHECK(std::abs(transmit_scalar(r, h, 4.0) - cxd(2, 0)) < 1e-15);
}

TEST_CASE("worst served device transmits at exactly max power") {
  auto inst = make_instance(2, 4, 3, 6, 11);
  auto d = random_uplink(inst, 2.0, 0.0, 11);
  for (std::size_t m = 0; m < 2; ++m) {
    double worst = 0.0;
    for (std::size_t k : inst.topo.devices_in_cell(m)) {
      const cxd b = transmit_scalar(d.r[m], inst.h_bar[m][k], d.eta[m]);
      const double p = std::norm(b);
      CHECK(p <= d.max_power * (1.0 + 1e-12));
      worst = std::max(worst, p);
    }
    CHECK(worst == doctest::Approx(d.max_power));
  }
}

TEST_CASE("transmit scalar cancels the channel phase") {
  Rng rng(5);
  const CVec r = rng.complex_gaussian_vector(4);
  const CVec h = rng.complex_gaussian_vector(4);
  const cxd prod = r.dot(h) * transmit_scalar(r, h, 3.0);
  CHECK(prod.imag() == doctest::Approx(0.0));
  CHECK(prod.real() > 0.0);
  // served contribution is exactly 1 after normalization
  CHECK(prod.real() / std::sqrt(3.0) == doctest::Approx(1.0));
}

TEST_CASE("degenerate effective channel raises") {
  CVec r = CVec::Constant(2, cxd(1, 0));
  CVec h(2);
  h << cxd(1, 0), cxd(-1, 0);  // r^H h = 0
  CHECK_THROWS_AS(transmit_scalar(r, h, 1.0), DegenerateChannelError);
  CHECK_THROWS_AS(receive_scalar(h, r), DegenerateChannelError);
}

TEST_CASE("receive scalar hand values") {
  CVec h = CVec::Constant(1, cxd(1, 0));
  CVec t = CVec::Constant(1, cxd(2, 0));
  CHECK(std::abs(receive_scalar(h, t) - cxd(0.5, 0)) < 1e-15);
  // h^H t = j -> r = -j, product 1
  CVec tj = CVec::Constant(1, cxd(0, 1));
  const cxd rk = receive_scalar(h, tj);
  CHECK(std::abs(rk - cxd(0, -1)) < 1e-15);
  CHECK(std::abs(rk * h.dot(tj) - cxd(1, 0)) < 1e-15);
  // unit effective channel -> unit receive scalar
  Rng rng(9);
  CVec hr = rng.complex_gaussian_vector(3);
  CVec tr = rng.complex_gaussian_vector(3);
  tr /= std::abs(hr.dot(tr));
  CHECK(std::abs(receive_scalar(hr, tr)) == doctest::Approx(1.0));
}

TEST_CASE("single cell with zero noise aggregates exactly") {
  auto inst = make_instance(1, 4, 3, 4, 21);
  auto d = random_uplink(inst, 1.0, 0.0, 21);
  Rng rng(1);
  std::vector<double> s = {0.3, -1.2, 0.9};
  auto res = uplink_transmit_round(s, d, inst.h_bar, inst.topo, rng);
  CHECK(res.target[0] == 0.3 - 1.2 + 0.9);
  CHECK(std::abs(res.estimate[0] - (0.3 - 1.2 + 0.9)) < 1e-12);
  CHECK(std::abs(res.error[0]) < 1e-12);
}

TEST_CASE("two-cell interference term matches hand computation") {
  // scalar channels set by hand, zero noise
  NetworkTopology topo;
  topo.bs_positions = {{0.0, 0.0}, {40.0, 0.0}};
  topo.device_positions = {{1.0, 0.0}, {39.0, 0.0}};
  topo.ris_position = {20.0, 0.0};
  topo.cell_of_device = {0, 1};
  topo.side_of_cell = {CellSide::T, CellSide::R};
  topo.antennas = 1;
  topo.elements = 0;

  CombinedChannels h(2, std::vector<CVec>(2));
  h[0][0] = CVec::Constant(1, cxd(1.0, 0.0));   // device 0 -> BS 0
  h[0][1] = CVec::Constant(1, cxd(0.5, 0.0));   // device 1 -> BS 0 (cross)
  h[1][0] = CVec::Constant(1, cxd(0.25, 0.0));  // device 0 -> BS 1 (cross)
  h[1][1] = CVec::Constant(1, cxd(2.0, 0.0));   // device 1 -> BS 1

  UplinkDesign d;
  d.max_power = 1.0;
  d.noise_power = 0.0;
  d.r = {CVec::Constant(1, cxd(1, 0)), CVec::Constant(1, cxd(1, 0))};
  set_normalizers(d, h, topo);
  CHECK(d.eta[0] == doctest::Approx(1.0));
  CHECK(d.eta[1] == doctest::Approx(4.0));

  Rng rng(1);
  std::vector<double> s = {1.0, 1.0};
  auto res = uplink_transmit_round(s, d, h, topo, rng);
  // b_1 = sqrt(4)*2/4 = 1; error at BS0 = (1/sqrt(1)) * 0.5 * 1 * 1 = 0.5
  CHECK(res.error[0].real() == doctest::Approx(0.5));
  // b_0 = 1; error at BS1 = (1/2) * 0.25 = 0.125
  CHECK(res.error[1].real() == doctest::Approx(0.125));
  CHECK(res.estimate[0] == doctest::Approx(1.5));
}

TEST_CASE("uplink closed form reduces to the noise term for one cell") {
  auto inst = make_instance(1, 3, 2, 4, 31);
  auto d = random_uplink(inst, 1.0, 0.1, 31);
  auto mse = uplink_mse(d, inst.h_bar, inst.topo);
  CHECK(mse[0] ==
        doctest::Approx(d.r[0].squaredNorm() * 0.1 / d.eta[0]));
}

TEST_CASE("uplink mse is invariant to rescaling a beamformer") {
  auto inst = make_instance(2, 4, 2, 4, 41);
  auto d = random_uplink(inst, 1.0, 0.05, 41);
  auto base = uplink_mse(d, inst.h_bar, inst.topo);
  auto scaled = d;
  scaled.r[0] *= cxd(0.0, -3.7);  // complex rescale
  set_normalizers(scaled, inst.h_bar, inst.topo);
  auto got = uplink_mse(scaled, inst.h_bar, inst.topo);
  for (std::size_t m = 0; m < 2; ++m)
    CHECK(got[m] == doctest::Approx(base[m]).epsilon(1e-12));
}

TEST_CASE("uplink Monte-Carlo error power matches the closed form") {
  for (std::uint64_t seed : {101, 102}) {
    auto inst = make_instance(2, 3, 2, 4, seed);
    auto d = random_uplink(inst, 1.0, 0.02, seed);
    auto want = uplink_mse(d, inst.h_bar, inst.topo);
    Rng sig_rng(derive_seed(seed, {7}));
    Rng ch_rng(derive_seed(seed, {8}));
    std::vector<double> acc(2, 0.0);
    const int trials = 100000;
    for (int i = 0; i < trials; ++i) {
      std::vector<double> s(inst.topo.devices());
      for (auto& v : s) v = sig_rng.gaussian();
      auto res = uplink_transmit_round(s, d, inst.h_bar, inst.topo, ch_rng);
      for (std::size_t m = 0; m < 2; ++m) acc[m] += std::norm(res.error[m]);
    }
    for (std::size_t m = 0; m < 2; ++m)
      CHECK(acc[m] / trials == doctest::Approx(want[m]).epsilon(0.05));
  }
}

TEST_CASE("downlink closed form: interference-free cell") {
  auto inst = make_instance(1, 3, 2, 4, 51);
  auto d = random_downlink(inst, 1.0, 0.2, 51);
  auto mse = downlink_mse(d, inst.h_bar, inst.topo);
  for (std::size_t k = 0; k < 2; ++k) {
    const double own = std::norm(inst.h_bar[0][k].dot(d.t[0]));
    CHECK(mse[k] == doctest::Approx(0.2 / own));
  }
}

TEST_CASE("doubling the serving beamformer quarters the downlink mse") {
  auto inst = make_instance(1, 3, 1, 0, 61);
  auto d = random_downlink(inst, 1.0, 0.3, 61);
  auto base = downlink_mse(d, inst.h_bar, inst.topo);
  d.t[0] *= 2.0;
  auto got = downlink_mse(d, inst.h_bar, inst.topo);
  CHECK(got[0] == doctest::Approx(base[0] / 4.0));
}

TEST_CASE("downlink Monte-Carlo error power matches the closed form") {
  auto inst = make_instance(2, 3, 2, 4, 71);
  auto d = random_downlink(inst, 1.0, 0.05, 71);
  auto want = downlink_mse(d, inst.h_bar, inst.topo);
  Rng sig_rng(derive_seed(71, {7}));
  Rng ch_rng(derive_seed(71, {8}));
  std::vector<double> acc(inst.topo.devices(), 0.0);
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) {
    std::vector<double> g(2);
    for (auto& v : g) v = sig_rng.gaussian();
    auto res = downlink_transmit_round(g, d, inst.h_bar, inst.topo, ch_rng);
    for (std::size_t k = 0; k < acc.size(); ++k)
      acc[k] += std::norm(res.error[k]);
  }
  for (std::size_t k = 0; k < acc.size(); ++k)
    CHECK(acc[k] / trials == doctest::Approx(want[k]).epsilon(0.05));
}

TEST_CASE("downlink broadcast with one cell and no noise is exact") {
  auto inst = make_instance(1, 3, 2, 4, 81);
  auto d = random_downlink(inst, 1.0, 0.0, 81);
  Rng rng(1);
  auto res = downlink_transmit_round({2.5}, d, inst.h_bar, inst.topo, rng);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(std::abs(res.estimate[k] - 2.5) < 1e-12);
  }
}

TEST_CASE("downlink cross-term matches hand computation") {
  NetworkTopology topo;
  topo.bs_positions = {{0.0, 0.0}, {40.0, 0.0}};
  topo.device_positions = {{1.0, 0.0}, {39.0, 0.0}};
  topo.ris_position = {20.0, 0.0};
  topo.cell_of_device = {0, 1};
  topo.side_of_cell = {CellSide::T, CellSide::R};
  topo.antennas = 1;
  topo.elements = 0;
  CombinedChannels h(2, std::vector<CVec>(2));
  h[0][0] = CVec::Constant(1, cxd(2.0, 0.0));  // BS0 <-> device 0
  h[0][1] = CVec::Constant(1, cxd(0.5, 0.0));
  h[1][0] = CVec::Constant(1, cxd(0.4, 0.0));  // BS1 <-> device 0 (cross)
  h[1][1] = CVec::Constant(1, cxd(1.0, 0.0));
  DownlinkDesign d;
  d.max_power = 9.0;
  d.noise_power = 0.0;
  d.t = {CVec::Constant(1, cxd(3.0, 0.0)), CVec::Constant(1, cxd(1.0, 0.0))};
  Rng rng(1);
  auto res = downlink_transmit_round({1.0, 2.0}, d, h, topo, rng);
  // device 0: r = 1/(2*3) = 1/6; cross = h[1][0]^H t_1 * G_1 = 0.4*1*2
  CHECK(res.estimate[0] == doctest::Approx(1.0 + 0.4 * 2.0 / 6.0));
  // device 1: r = 1/(1*1) = 1; cross = h[0][1]^H t_0 * G_0 = 0.5*3*1
  CHECK(res.estimate[1] == doctest::Approx(2.0 + 1.5));
}

TEST_CASE("adding an interfering cell never lowers either mse") {
  auto inst2 = make_instance(2, 3, 2, 4, 91);
  // single-cell view: same first cell, interferer removed
  auto d2u = random_uplink(inst2, 1.0, 0.05, 91);
  auto d2d = random_downlink(inst2, 1.0, 0.05, 91);
  auto ul2 = uplink_mse(d2u, inst2.h_bar, inst2.topo);
  auto dl2 = downlink_mse(d2d, inst2.h_bar, inst2.topo);

  NetworkTopology t1 = inst2.topo;
  t1.bs_positions.resize(1);
  t1.side_of_cell.resize(1);
  t1.device_positions.resize(2);
  t1.cell_of_device.resize(2);
  CombinedChannels h1(1);
  h1[0] = {inst2.h_bar[0][0], inst2.h_bar[0][1]};
  UplinkDesign d1u;
  d1u.max_power = d2u.max_power;
  d1u.noise_power = d2u.noise_power;
  d1u.r = {d2u.r[0]};
  set_normalizers(d1u, h1, t1);
  DownlinkDesign d1d;
  d1d.max_power = d2d.max_power;
  d1d.noise_power = d2d.noise_power;
  d1d.t = {d2d.t[0]};
  auto ul1 = uplink_mse(d1u, h1, t1);
  auto dl1 = downlink_mse(d1d, h1, t1);
  CHECK(ul2[0] >= ul1[0] - 1e-15);
  CHECK(dl2[0] >= dl1[0] - 1e-15);
  CHECK(dl2[1] >= dl1[1] - 1e-15);
}

TEST_CASE("cell gap arithmetic") {
  NetworkTopology topo;
  topo.bs_positions = {{0.0, 0.0}};
  topo.device_positions = {{1.0, 0.0}};
  topo.ris_position = {5.0, 0.0};
  topo.cell_of_device = {0};
  topo.side_of_cell = {CellSide::T};
  topo.antennas = 1;

  GapWeights w;
  w.phi1 = {2.0};
  w.phi2 = {3.0};
  auto gap = cell_gap(w, {0.1}, {0.2}, topo);
  CHECK(gap[0] == doctest::Approx(0.8));

  w.phi1 = {0.0};
  w.phi2 = {0.0};
  CHECK(cell_gap(w, {0.1}, {0.2}, topo)[0] == 0.0);

  w.phi1 = {5.0};
  w.phi2 = {7.0};
  CHECK(cell_gap(w, {0.0}, {0.0}, topo)[0] == 0.0);
}

#include "airfl/topology.hpp"

namespace airfl {

NetworkTopology build_topology(const TopologySpec& spec, std::uint64_t seed) {
  const std::size_t m_cells = spec.bs_positions.size();
  if (m_cells == 0) throw ConfigError("topology needs at least one cell");
  if (spec.devices_per_cell.size() != m_cells) {
    throw ConfigError("devices_per_cell has " +
                      std::to_string(spec.devices_per_cell.size()) +
                      " entries for " + std::to_string(m_cells) + " cells");
  }
  for (auto k : spec.devices_per_cell)
    if (k == 0) throw ConfigError("every cell needs at least one device");
  if (spec.cell_radius_m <= 0.0) throw ConfigError("cell radius must be > 0");
  if (spec.antennas == 0) throw ConfigError("antennas per BS must be >= 1");
  if (!spec.side_of_cell.empty() && spec.side_of_cell.size() != m_cells)
    throw ConfigError("side_of_cell size does not match cell count");

  NetworkTopology topo;
  topo.bs_positions = spec.bs_positions;
  topo.ris_position = spec.ris_position;
  topo.antennas = spec.antennas;
  topo.elements = spec.elements;
  topo.side_of_cell.resize(m_cells);
  for (std::size_t m = 0; m < m_cells; ++m) {
    topo.side_of_cell[m] = spec.side_of_cell.empty()
                               ? (m % 2 == 0 ? CellSide::T : CellSide::R)
                               : spec.side_of_cell[m];
  }

  Rng rng(derive_seed(seed, {0x70706f /* "top" */}));
  for (std::size_t m = 0; m < m_cells; ++m) {
    for (std::size_t k = 0; k < spec.devices_per_cell[m]; ++k) {
      Point2 p;
      if (spec.symmetric_devices && m > 0) {
        if (spec.devices_per_cell[m] != spec.devices_per_cell[0])
          throw ConfigError("symmetric_devices needs equal per-cell counts");
        // reflect cell 0's k-th device about the RIS x-coordinate
        const Point2 ref = topo.device_positions[k];
        p = {2.0 * spec.ris_position[0] - ref[0], ref[1]};
        p[0] += spec.bs_positions[m][0] - (2.0 * spec.ris_position[0] -
                                           spec.bs_positions[0][0]);
      } else {
        // uniform in the disc: radius via sqrt of uniform
        const double r = spec.cell_radius_m * std::sqrt(rng.uniform());
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        p = {spec.bs_positions[m][0] + r * std::cos(phi),
             spec.bs_positions[m][1] + r * std::sin(phi)};
      }
      topo.device_positions.push_back(p);
      topo.cell_of_device.push_back(m);
    }
  }
  return topo;
}

}  // namespace airfl

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "airfl/common.hpp"
#include "airfl/rng.hpp"

namespace airfl {

using Point2 = std::array<double, 2>;

inline double distance(const Point2& a, const Point2& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

enum class CellSide { T, R };

/// Geometry and membership of the multi-cell network: BS/device/RIS
/// positions, device-to-cell assignment, and the T/R-side split of cells.
struct NetworkTopology {
  std::vector<Point2> bs_positions;
  std::vector<Point2> device_positions;  // indexed by global device id
  Point2 ris_position{0.0, 0.0};
  std::vector<std::size_t> cell_of_device;
  std::vector<CellSide> side_of_cell;
  std::size_t antennas = 0;  // N
  std::size_t elements = 0;  // Q

  std::size_t cells() const { return bs_positions.size(); }
  std::size_t devices() const { return device_positions.size(); }

  std::vector<std::size_t> devices_in_cell(std::size_t m) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < cell_of_device.size(); ++k)
      if (cell_of_device[k] == m) out.push_back(k);
    return out;
  }
};

/// Scenario inputs for topology construction. Positions in meters.
struct TopologySpec {
  std::vector<Point2> bs_positions;
  Point2 ris_position{0.0, 0.0};
  std::vector<std::size_t> devices_per_cell;
  double cell_radius_m = 20.0;
  std::size_t antennas = 1;
  std::size_t elements = 0;
  /// T/R side per cell; empty means alternate T,R,T,... by cell index.
  std::vector<CellSide> side_of_cell;
  /// Mirror cell 0's device placement into every other cell (x reflected
  /// about the RIS); used for symmetric test scenarios.
  bool symmetric_devices = false;
};

/// Place devices uniformly at random in a disc around their BS.
/// Deterministic for a fixed seed.
NetworkTopology build_topology(const TopologySpec& spec, std::uint64_t seed);

}  // namespace airfl

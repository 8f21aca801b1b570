#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace mmtopo {

enum class Region : int { Design = 0, Airgap = 1 };

struct SectorGeometry {
  double r_shaft = 0.030;
  double r_rotor = 0.080;
  double r_outer = 0.085;
  double pole_angle = 3.14159265358979323846 / 6.0;
  /// Angle of the pole axis; the sector spans center +/- pole_angle/2.
  double center_angle = 0.0;
};

/**
 * Structured triangulation of one pole: rings x sectors, each quad split in
 * two. The master edge sits at center - pole/2, the slave edge at
 * center + pole/2, and slave node k is the master node k rotated by one pole.
 */
struct SectorMesh {
  SectorGeometry geometry;
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Region> regions;

  std::vector<int> inner_arc;
  std::vector<int> outer_arc;
  /// Paired radial-edge nodes, including the arc corners; master_edge[k] <-> slave_edge[k].
  std::vector<int> master_edge;
  std::vector<int> slave_edge;
  /// Radial-edge nodes on the rotor surface radius; their potential difference is the pole flux.
  int probe_master = -1;
  int probe_slave = -1;

  std::size_t element_count() const noexcept { return triangles.size(); }
  /// Element ids of the design region, in ascending order.
  std::vector<int> design_elements() const;
  double area(std::size_t element) const;
  Eigen::Vector2d centroid(std::size_t element) const;
  double mean_edge_length() const;
};

/// Throws InvalidGeometry on bad radii, angle or element target.
SectorMesh generate_sector_mesh(const SectorGeometry& geometry, int target_element_count);

/// Every invariant of SectorMesh; returns an empty string when valid, else the first violation.
std::string check_mesh(const SectorMesh& mesh, double pairing_tolerance = 1e-12);

/// Plain-text format: "id x y" per node, "id n1 n2 n3 region" per element.
void write_mesh(std::ostream& os, const SectorMesh& mesh);
SectorMesh read_mesh(std::istream& is);

}  // namespace mmtopo

#include "mmtopo/mesh.hpp"

#include "mmtopo/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace mmtopo {

namespace {

double signed_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

struct Layout {
  int n_theta = 1;
  int n_design = 1;
  int n_airgap = 1;
  int count() const { return 2 * n_theta * (n_design + n_airgap); }
};

Layout layout_for(const SectorGeometry& g, double h) {
  Layout l;
  const double r_mid = 0.5 * (g.r_shaft + g.r_rotor);
  l.n_theta = std::max(1, static_cast<int>(std::lround(g.pole_angle * r_mid / h)));
  l.n_design = std::max(1, static_cast<int>(std::lround((g.r_rotor - g.r_shaft) / h)));
  l.n_airgap = std::max(1, static_cast<int>(std::lround((g.r_outer - g.r_rotor) / h)));
  return l;
}

void assign_boundaries(SectorMesh& mesh) {
  const auto& g = mesh.geometry;
  const double tol = 1e-9 * g.r_outer;
  const double master_angle = g.center_angle - 0.5 * g.pole_angle;
  const Eigen::Rotation2Dd to_master(-master_angle);
  mesh.inner_arc.clear();
  mesh.outer_arc.clear();
  mesh.master_edge.clear();
  mesh.slave_edge.clear();
  std::vector<std::pair<double, int>> master, slave;
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const Eigen::Vector2d& p = mesh.nodes[i];
    const double r = p.norm();
    if (std::abs(r - g.r_shaft) <= tol) mesh.inner_arc.push_back(static_cast<int>(i));
    if (std::abs(r - g.r_outer) <= tol) mesh.outer_arc.push_back(static_cast<int>(i));
    const Eigen::Vector2d local = to_master * p;
    const double angle = std::atan2(local.y(), local.x());
    if (std::abs(angle) * r <= tol) master.emplace_back(r, static_cast<int>(i));
    if (std::abs(angle - g.pole_angle) * r <= tol) slave.emplace_back(r, static_cast<int>(i));
  }
  std::sort(master.begin(), master.end());
  std::sort(slave.begin(), slave.end());
  if (master.size() != slave.size()) throw Error(Errc::InvalidGeometry, "radial edges have different node counts");
  for (std::size_t k = 0; k < master.size(); ++k) {
    mesh.master_edge.push_back(master[k].second);
    mesh.slave_edge.push_back(slave[k].second);
    if (std::abs(master[k].first - g.r_rotor) <= tol) {
      mesh.probe_master = master[k].second;
      mesh.probe_slave = slave[k].second;
    }
  }
  if (mesh.probe_master < 0) throw Error(Errc::InvalidGeometry, "no radial-edge node on the rotor surface");
}

}  // namespace

std::vector<int> SectorMesh::design_elements() const {
  std::vector<int> out;
  for (std::size_t e = 0; e < regions.size(); ++e)
    if (regions[e] == Region::Design) out.push_back(static_cast<int>(e));
  return out;
}

double SectorMesh::area(std::size_t element) const {
  const auto& t = triangles[element];
  return signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
}

Eigen::Vector2d SectorMesh::centroid(std::size_t element) const {
  const auto& t = triangles[element];
  return (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]) / 3.0;
}

double SectorMesh::mean_edge_length() const {
  double sum = 0.0;
  for (const auto& t : triangles)
    for (int k = 0; k < 3; ++k) sum += (nodes[t[k]] - nodes[t[(k + 1) % 3]]).norm();
  return triangles.empty() ? 0.0 : sum / (3.0 * static_cast<double>(triangles.size()));
}

SectorMesh generate_sector_mesh(const SectorGeometry& g, int target_element_count) {
  if (!(g.r_shaft > 0.0) || !(g.r_shaft < g.r_rotor) || !(g.r_rotor < g.r_outer)) {
    throw Error(Errc::InvalidGeometry, "radii must satisfy 0 < r_shaft < r_rotor < r_outer");
  }
  if (!(g.pole_angle > 0.0) || g.pole_angle > std::numbers::pi) {
    throw Error(Errc::InvalidGeometry, "pole angle must lie in (0, pi]");
  }
  if (target_element_count < 4) throw Error(Errc::InvalidGeometry, "target element count must be at least 4");

  const double area = 0.5 * g.pole_angle * (g.r_outer * g.r_outer - g.r_shaft * g.r_shaft);
  double h = std::sqrt(2.0 * area / target_element_count);
  Layout best = layout_for(g, h);
  for (int attempt = 0; attempt < 30; ++attempt) {
    const Layout l = layout_for(g, h);
    if (std::abs(l.count() - target_element_count) < std::abs(best.count() - target_element_count)) best = l;
    if (std::abs(l.count() - target_element_count) <= 0.1 * target_element_count) break;
    h *= std::sqrt(static_cast<double>(l.count()) / target_element_count);
  }
  if (std::abs(best.count() - target_element_count) > 0.2 * target_element_count) {
    throw Error(Errc::InvalidGeometry, "cannot reach " + std::to_string(target_element_count) +
                                           " elements within 20% (closest " + std::to_string(best.count()) + ")");
  }

  SectorMesh mesh;
  mesh.geometry = g;
  const int nt = best.n_theta;
  const int nr = best.n_design + best.n_airgap;
  std::vector<double> radii(static_cast<std::size_t>(nr + 1));
  for (int i = 0; i <= best.n_design; ++i)
    radii[static_cast<std::size_t>(i)] = g.r_shaft + (g.r_rotor - g.r_shaft) * i / best.n_design;
  for (int i = 1; i <= best.n_airgap; ++i)
    radii[static_cast<std::size_t>(best.n_design + i)] = g.r_rotor + (g.r_outer - g.r_rotor) * i / best.n_airgap;
  radii[static_cast<std::size_t>(best.n_design)] = g.r_rotor;
  radii.back() = g.r_outer;

  const double theta0 = g.center_angle - 0.5 * g.pole_angle;
  const Eigen::Rotation2Dd one_pole(g.pole_angle);
  auto id = [nt](int i, int j) { return i * (nt + 1) + j; };
  mesh.nodes.resize(static_cast<std::size_t>((nr + 1) * (nt + 1)));
  for (int i = 0; i <= nr; ++i) {
    const double r = radii[static_cast<std::size_t>(i)];
    for (int j = 0; j < nt; ++j) {
      const double t = theta0 + g.pole_angle * j / nt;
      mesh.nodes[static_cast<std::size_t>(id(i, j))] = Eigen::Vector2d(r * std::cos(t), r * std::sin(t));
    }
    mesh.nodes[static_cast<std::size_t>(id(i, nt))] = one_pole * mesh.nodes[static_cast<std::size_t>(id(i, 0))];
  }

  for (int i = 0; i < nr; ++i) {
    const Region region = i < best.n_design ? Region::Design : Region::Airgap;
    for (int j = 0; j < nt; ++j) {
      const int a = id(i, j), b = id(i, j + 1), c = id(i + 1, j + 1), d = id(i + 1, j);
      for (std::array<int, 3> tri : {std::array<int, 3>{a, d, c}, std::array<int, 3>{a, c, b}}) {
        if (signed_area(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]) < 0.0) std::swap(tri[1], tri[2]);
        mesh.triangles.push_back(tri);
        mesh.regions.push_back(region);
      }
    }
  }
  assign_boundaries(mesh);
  return mesh;
}

std::string check_mesh(const SectorMesh& mesh, double pairing_tolerance) {
  const auto& g = mesh.geometry;
  const double rtol = 1e-9 * g.r_outer;
  if (mesh.triangles.size() != mesh.regions.size()) return "region tags do not match the element count";
  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    for (int n : mesh.triangles[e])
      if (n < 0 || static_cast<std::size_t>(n) >= mesh.nodes.size()) return "element " + std::to_string(e) + " has a bad node id";
    if (!(mesh.area(e) > 0.0)) return "element " + std::to_string(e) + " is not positively oriented";
    for (int n : mesh.triangles[e]) {
      const double r = mesh.nodes[static_cast<std::size_t>(n)].norm();
      const bool ok = mesh.regions[e] == Region::Design ? (r >= g.r_shaft - rtol && r <= g.r_rotor + rtol)
                                                        : (r >= g.r_rotor - rtol && r <= g.r_outer + rtol);
      if (!ok) return "element " + std::to_string(e) + " lies outside its region";
    }
  }
  if (mesh.master_edge.size() != mesh.slave_edge.size() || mesh.master_edge.empty()) return "radial edges are not paired";
  const Eigen::Rotation2Dd one_pole(g.pole_angle);
  for (std::size_t k = 0; k < mesh.master_edge.size(); ++k) {
    const Eigen::Vector2d rotated = one_pole * mesh.nodes[static_cast<std::size_t>(mesh.master_edge[k])];
    if ((rotated - mesh.nodes[static_cast<std::size_t>(mesh.slave_edge[k])]).norm() > pairing_tolerance)
      return "slave node " + std::to_string(mesh.slave_edge[k]) + " is not a rotated master node";
  }
  if (mesh.probe_master < 0 || mesh.probe_slave < 0) return "flux probe nodes are missing";
  if (std::abs(mesh.nodes[static_cast<std::size_t>(mesh.probe_master)].norm() - g.r_rotor) > rtol)
    return "flux probe is not on the rotor surface";
  if (mesh.inner_arc.empty() || mesh.outer_arc.empty()) return "arc boundaries are empty";
  return {};
}

void write_mesh(std::ostream& os, const SectorMesh& mesh) {
  const auto& g = mesh.geometry;
  os << std::setprecision(17);
  os << "# mmtopo sector mesh\n";
  os << "geometry " << g.r_shaft << ' ' << g.r_rotor << ' ' << g.r_outer << ' ' << g.pole_angle << ' '
     << g.center_angle << '\n';
  os << "nodes " << mesh.nodes.size() << '\n';
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) os << i << ' ' << mesh.nodes[i].x() << ' ' << mesh.nodes[i].y() << '\n';
  os << "elements " << mesh.triangles.size() << '\n';
  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    const auto& t = mesh.triangles[e];
    os << e << ' ' << t[0] << ' ' << t[1] << ' ' << t[2] << ' '
       << (mesh.regions[e] == Region::Design ? "design" : "airgap") << '\n';
  }
  if (!os) throw Error(Errc::IoFailure, "failed to write mesh");
}

SectorMesh read_mesh(std::istream& is) {
  SectorMesh mesh;
  std::string line, word;
  auto fail = [](const std::string& why) { return Error(Errc::IoFailure, "mesh file: " + why); };
  auto next_line = [&]() {
    while (std::getline(is, line)) {
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  };
  if (!next_line()) throw fail("missing geometry line");
  {
    std::istringstream ls(line);
    auto& g = mesh.geometry;
    if (!(ls >> word >> g.r_shaft >> g.r_rotor >> g.r_outer >> g.pole_angle >> g.center_angle) || word != "geometry")
      throw fail("bad geometry line");
  }
  std::size_t count = 0;
  if (!next_line() || !(std::istringstream(line) >> word >> count) || word != "nodes") throw fail("bad nodes header");
  mesh.nodes.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t id = 0;
    double x = 0, y = 0;
    if (!next_line() || !(std::istringstream(line) >> id >> x >> y) || id >= count) throw fail("bad node line");
    mesh.nodes[id] = {x, y};
  }
  if (!next_line() || !(std::istringstream(line) >> word >> count) || word != "elements") throw fail("bad elements header");
  mesh.triangles.resize(count);
  mesh.regions.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t id = 0;
    std::array<int, 3> t{};
    std::string region;
    if (!next_line() || !(std::istringstream(line) >> id >> t[0] >> t[1] >> t[2] >> region) || id >= count)
      throw fail("bad element line");
    if (region != "design" && region != "airgap") throw fail("unknown region '" + region + "'");
    mesh.triangles[id] = t;
    mesh.regions[id] = region == "design" ? Region::Design : Region::Airgap;
  }
  assign_boundaries(mesh);
  return mesh;
}

}  // namespace mmtopo

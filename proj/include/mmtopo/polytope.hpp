#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmtopo {

/// Wachspress coordinates and their spatial gradients at one point.
struct BarycentricResult {
  Eigen::VectorXd weights;    // n
  Eigen::MatrixXd gradients;  // dim x n, column i = d(omega_i)/d(rho)
};

/**
 * Convex interpolation domain in dimension 1, 2 or 3.
 *
 * Vertices are kept in the order given at construction; vertex i is the
 * material (or sub-domain) slot i. Polygons must be counter-clockwise.
 * Polyhedron faces are derived from the convex hull of the vertices and,
 * when supplied by the caller, checked against it.
 *
 * Coordinates are evaluated in the common-denominator form
 *   w_i(x) = sum_t c_t * prod_{f not in S_t} h_f(x),
 * where h_f is the distance to facet f and S_t ranges over the fan
 * triangulation of the polar-dual cell at vertex i. This form is a
 * polynomial, so it stays finite on faces and edges. At a vertex shared by
 * more than dim facets every term vanishes; there the weights are the
 * Kronecker delta and the gradients are taken just inside, toward the centroid.
 */
class Polytope {
 public:
  static Polytope make(int dim, const std::vector<Eigen::VectorXd>& vertices,
                       const std::optional<std::vector<std::vector<int>>>& faces = std::nullopt);

  static Polytope segment(double v0 = 0.0, double v1 = 1.0);
  /// Regular n-gon of the given circumradius, first vertex on the +x axis.
  static Polytope regular_polygon(int n, double radius = 1.0);
  /// Regular m-gon equator at z = 0 plus apexes (0,0,+h) and (0,0,-h), in that order.
  static Polytope diamond(int equator_vertices, double apex_height = 1.0);

  int dim() const noexcept { return dim_; }
  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  Eigen::VectorXd vertex(std::size_t i) const;
  /// Facets as vertex-index loops (counter-clockwise seen from outside for dim 3).
  const std::vector<std::vector<int>>& faces() const noexcept { return face_loops_; }

  /// Throws PointOutsidePolytope when p is further than `inside_tolerance` outside.
  BarycentricResult barycentric(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  /// Euclidean projection; returns p unchanged when it is (within tolerance) inside.
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  /// Smallest facet distance; negative outside.
  double min_facet_distance(const Eigen::Ref<const Eigen::VectorXd>& p) const;

  Eigen::VectorXd centroid() const;
  /// Vertex centroid without a seed, otherwise a random strictly interior point.
  Eigen::VectorXd sample_interior(std::optional<std::uint64_t> seed = std::nullopt) const;

  double inside_tolerance() const noexcept { return inside_tol_; }
  std::string describe() const;

 private:
  struct Facet {
    Eigen::Vector3d normal;  // unit, outward
    double offset = 0.0;     // h(x) = offset - normal.x
    std::vector<int> loop;
  };
  struct Term {
    std::vector<int> facets;  // the dim facets whose h divides this term
    double coefficient = 0.0;
  };

  Polytope() = default;
  void build_terms();
  BarycentricResult evaluate(const Eigen::Vector3d& x) const;
  Eigen::Vector3d pad(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  Eigen::VectorXd unpad(const Eigen::Vector3d& p) const;

  int dim_ = 0;
  std::vector<Eigen::Vector3d> vertices_;
  std::vector<Facet> facets_;
  std::vector<std::vector<int>> face_loops_;
  std::vector<std::vector<Term>> terms_;  // per vertex
  std::vector<std::size_t> vertex_degree_;  // incident facets
  Eigen::Vector3d centroid3_ = Eigen::Vector3d::Zero();
  double inside_tol_ = 1e-12;
  std::string name_;
};

}  // namespace mmtopo

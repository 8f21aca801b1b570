#pragma once

#include "mmtopo/materials.hpp"
#include "mmtopo/polytope.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmtopo {

/// Neveu label of a tree node: the root is the empty list, child n of l is [l, n].
class NeveuLabel {
 public:
  NeveuLabel() = default;
  NeveuLabel(std::initializer_list<int> indices) : indices_(indices) {}
  explicit NeveuLabel(std::vector<int> indices) : indices_(std::move(indices)) {}

  const std::vector<int>& indices() const noexcept { return indices_; }
  bool is_root() const noexcept { return indices_.empty(); }
  std::size_t depth() const noexcept { return indices_.size(); }
  NeveuLabel parent() const;
  NeveuLabel child(int n) const;
  NeveuLabel concat(const NeveuLabel& other) const;

  /// "∅" for the root, otherwise "[1,3]".
  std::string str() const;
  /// Identifier-safe variant: "root", "3_1".
  std::string key() const;

  auto operator<=>(const NeveuLabel&) const = default;

 private:
  std::vector<int> indices_;
};

/// Interpolated properties at one evaluation point.
struct PropertyValue {
  Eigen::Vector2d polarization = Eigen::Vector2d::Zero();  // tesla
  double current_density = 0.0;                            // A/m^2
  Eigen::Matrix2d d_polarization_dB = Eigen::Matrix2d::Zero();
};

/// Derivatives of the interpolated properties with respect to every design coordinate.
/// Column j corresponds to flat design coordinate j (see InterpTree::offset).
struct PropertyJacobian {
  Eigen::Matrix<double, 2, Eigen::Dynamic> d_polarization;
  Eigen::RowVectorXd d_current;
};

/**
 * Rooted interpolation tree. Internal nodes carry a polytope, leaves a
 * material. A design point is a flat vector concatenating the coordinates
 * of every internal node, in label order.
 *
 * Immutable after build; every query is const and thread-safe.
 */
class InterpTree {
 public:
  struct NodeSpec {
    NeveuLabel label;
    std::optional<Polytope> domain;
    std::optional<MaterialModel> material;
  };

  /// Barycentric data of every internal node for one design point.
  struct Coefficients {
    std::vector<BarycentricResult> nodes;  // indexed like internal_labels()
  };

  static InterpTree build(std::vector<NodeSpec> spec);

  std::vector<NeveuLabel> children(const NeveuLabel& label) const;
  bool contains(const NeveuLabel& label) const { return index_.contains(label); }
  bool is_leaf(const NeveuLabel& label) const;

  const std::vector<NeveuLabel>& internal_labels() const noexcept { return internal_labels_; }
  std::size_t internal_count() const noexcept { return internal_nodes_.size(); }
  const Polytope& domain(const NeveuLabel& label) const;
  std::size_t offset(const NeveuLabel& label) const;
  std::size_t design_dim() const noexcept { return design_dim_; }

  const std::vector<NeveuLabel>& leaf_labels() const noexcept { return leaf_labels_; }
  const MaterialModel& leaf_material(std::size_t leaf) const;
  std::size_t leaf_count() const noexcept { return leaf_labels_.size(); }
  /// Leaf index holding the named material, or -1.
  int leaf_of(const std::string& material_name) const;

  /// Every internal node at its polytope centroid.
  Eigen::VectorXd centroid_point() const;
  /// Design point that selects the given leaf exactly; other branches at their centroids.
  Eigen::VectorXd vertex_point(std::size_t leaf) const;
  Eigen::VectorXd random_point(std::uint64_t seed) const;
  std::span<const double> node_coords(std::span<const double> rho, const NeveuLabel& label) const;

  Coefficients coefficients(std::span<const double> rho) const;

  PropertyValue eval(std::span<const double> rho, const Eigen::Vector2d& b) const;
  PropertyValue eval(const Coefficients& c, const Eigen::Vector2d& b) const;
  /// Like eval, with d_polarization_dB populated.
  PropertyValue eval_dB(std::span<const double> rho, const Eigen::Vector2d& b) const;
  PropertyValue eval_dB(const Coefficients& c, const Eigen::Vector2d& b) const;
  /// Density derivatives by top-down accumulation of ancestor weights.
  PropertyJacobian eval_drho(std::span<const double> rho, const Eigen::Vector2d& b) const;
  PropertyJacobian eval_drho(const Coefficients& c, const Eigen::Vector2d& b) const;

  /// Batched forms; row e of `rho` pairs with b[e].
  std::vector<PropertyValue> eval_batch(const Eigen::MatrixXd& rho, std::span<const Eigen::Vector2d> b,
                                        bool with_dB) const;
  std::vector<PropertyJacobian> eval_drho_batch(const Eigen::MatrixXd& rho, std::span<const Eigen::Vector2d> b) const;

  /// Product of weights along every root-to-leaf path, indexed like leaf_labels().
  Eigen::VectorXd leaf_weights(const Coefficients& c) const;

  /// Projects every node coordinate onto its polytope, in place.
  void project_design(std::span<double> rho) const;
  /// Map-keyed projection; throws UnknownLabel for labels that are not internal nodes.
  std::map<NeveuLabel, Eigen::VectorXd> project_design(const std::map<NeveuLabel, Eigen::VectorXd>& rho) const;
  Eigen::VectorXd pack(const std::map<NeveuLabel, Eigen::VectorXd>& rho) const;

  /// One line per node: label, polytope or material, children.
  std::string dump() const;

 private:
  struct Node {
    NeveuLabel label;
    std::optional<Polytope> domain;
    std::optional<MaterialModel> material;
    std::vector<std::size_t> children;
    std::size_t internal = 0;  // index into internal_nodes_ when internal
    std::size_t leaf = 0;      // index into leaf_nodes_ when leaf
    std::size_t offset = 0;
  };

  std::size_t node_index(const NeveuLabel& label) const;
  void accumulate(const Coefficients& c, const Eigen::Vector2d& b, bool with_dB, std::vector<PropertyValue>& sub) const;

  std::vector<Node> nodes_;  // sorted by label, so parents precede children
  std::map<NeveuLabel, std::size_t> index_;
  std::vector<std::size_t> internal_nodes_;
  std::vector<std::size_t> leaf_nodes_;
  std::vector<NeveuLabel> internal_labels_;
  std::vector<NeveuLabel> leaf_labels_;
  std::size_t design_dim_ = 0;
};

/// Test oracle: sum over leaves of (product of weights on the root path) * leaf property.
/// Recomputes barycentric weights per path and shares no code with eval.
PropertyValue flatten_oracle(const InterpTree& tree, std::span<const double> rho, const Eigen::Vector2d& b);

}  // namespace mmtopo

#include "mmtopo/interp_tree.hpp"

#include "mmtopo/error.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mmtopo {

NeveuLabel NeveuLabel::parent() const {
  if (is_root()) throw Error(Errc::UnknownLabel, "the root has no parent");
  return NeveuLabel(std::vector<int>(indices_.begin(), indices_.end() - 1));
}

NeveuLabel NeveuLabel::child(int n) const {
  auto idx = indices_;
  idx.push_back(n);
  return NeveuLabel(std::move(idx));
}

NeveuLabel NeveuLabel::concat(const NeveuLabel& other) const {
  auto idx = indices_;
  idx.insert(idx.end(), other.indices_.begin(), other.indices_.end());
  return NeveuLabel(std::move(idx));
}

std::string NeveuLabel::str() const {
  if (is_root()) return "∅";
  std::string s = "[";
  for (std::size_t i = 0; i < indices_.size(); ++i) s += (i ? "," : "") + std::to_string(indices_[i]);
  return s + "]";
}

std::string NeveuLabel::key() const {
  if (is_root()) return "root";
  std::string s;
  for (std::size_t i = 0; i < indices_.size(); ++i) s += (i ? "_" : "") + std::to_string(indices_[i]);
  return s;
}

InterpTree InterpTree::build(std::vector<NodeSpec> spec) {
  std::sort(spec.begin(), spec.end(), [](const NodeSpec& a, const NodeSpec& b) { return a.label < b.label; });
  InterpTree tree;
  for (auto& s : spec) {
    if (tree.index_.contains(s.label)) throw Error(Errc::DuplicateLabel, "label " + s.label.str() + " declared twice");
    if (s.domain.has_value() == s.material.has_value()) {
      throw Error(Errc::InvalidParameters, "node " + s.label.str() + " must carry either a polytope or a material");
    }
    for (int i : s.label.indices())
      if (i < 1) throw Error(Errc::InvalidParameters, "Neveu indices are positive, got " + s.label.str());
    tree.index_.emplace(s.label, tree.nodes_.size());
    Node node;
    node.label = s.label;
    node.domain = std::move(s.domain);
    node.material = std::move(s.material);
    tree.nodes_.push_back(std::move(node));
  }
  if (tree.nodes_.empty() || !tree.nodes_.front().label.is_root()) throw Error(Errc::OrphanNode, "tree has no root");

  for (std::size_t i = 1; i < tree.nodes_.size(); ++i) {
    const NeveuLabel parent = tree.nodes_[i].label.parent();
    auto it = tree.index_.find(parent);
    if (it == tree.index_.end()) throw Error(Errc::OrphanNode, "node " + tree.nodes_[i].label.str() + " has no parent");
    tree.nodes_[it->second].children.push_back(i);
  }

  std::set<std::string> materials;
  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    Node& node = tree.nodes_[i];
    if (node.material) {
      if (!node.children.empty()) throw Error(Errc::ChildCountMismatch, "leaf " + node.label.str() + " has children");
      if (!materials.insert(node.material->name()).second) {
        throw Error(Errc::DuplicateMaterialLeaf, "material '" + node.material->name() + "' appears on two leaves");
      }
      node.leaf = tree.leaf_nodes_.size();
      tree.leaf_nodes_.push_back(i);
      tree.leaf_labels_.push_back(node.label);
      continue;
    }
    const std::size_t k = node.domain->vertex_count();
    bool contiguous = node.children.size() == k;
    for (std::size_t c = 0; contiguous && c < node.children.size(); ++c)
      contiguous = tree.nodes_[node.children[c]].label.indices().back() == static_cast<int>(c + 1);
    if (!contiguous) {
      throw Error(Errc::ChildCountMismatch, "node " + node.label.str() + " has " + std::to_string(node.children.size()) +
                                                " children for a polytope with " + std::to_string(k) + " vertices");
    }
    node.internal = tree.internal_nodes_.size();
    node.offset = tree.design_dim_;
    tree.design_dim_ += static_cast<std::size_t>(node.domain->dim());
    tree.internal_nodes_.push_back(i);
    tree.internal_labels_.push_back(node.label);
  }
  return tree;
}

std::size_t InterpTree::node_index(const NeveuLabel& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw Error(Errc::UnknownLabel, "no node " + label.str());
  return it->second;
}

std::vector<NeveuLabel> InterpTree::children(const NeveuLabel& label) const {
  std::vector<NeveuLabel> out;
  for (std::size_t c : nodes_[node_index(label)].children) out.push_back(nodes_[c].label);
  return out;
}

bool InterpTree::is_leaf(const NeveuLabel& label) const { return nodes_[node_index(label)].material.has_value(); }

const Polytope& InterpTree::domain(const NeveuLabel& label) const {
  const Node& node = nodes_[node_index(label)];
  if (!node.domain) throw Error(Errc::UnknownLabel, label.str() + " is a leaf");
  return *node.domain;
}

std::size_t InterpTree::offset(const NeveuLabel& label) const {
  const Node& node = nodes_[node_index(label)];
  if (!node.domain) throw Error(Errc::UnknownLabel, label.str() + " is a leaf");
  return node.offset;
}

const MaterialModel& InterpTree::leaf_material(std::size_t leaf) const { return *nodes_[leaf_nodes_.at(leaf)].material; }

int InterpTree::leaf_of(const std::string& material_name) const {
  for (std::size_t l = 0; l < leaf_nodes_.size(); ++l)
    if (nodes_[leaf_nodes_[l]].material->name() == material_name) return static_cast<int>(l);
  return -1;
}

std::span<const double> InterpTree::node_coords(std::span<const double> rho, const NeveuLabel& label) const {
  const Node& node = nodes_[node_index(label)];
  if (!node.domain) throw Error(Errc::UnknownLabel, label.str() + " is a leaf");
  return rho.subspan(node.offset, static_cast<std::size_t>(node.domain->dim()));
}

Eigen::VectorXd InterpTree::centroid_point() const {
  Eigen::VectorXd rho(static_cast<Eigen::Index>(design_dim_));
  for (std::size_t i : internal_nodes_) {
    const Node& node = nodes_[i];
    rho.segment(static_cast<Eigen::Index>(node.offset), node.domain->dim()) = node.domain->centroid();
  }
  return rho;
}

Eigen::VectorXd InterpTree::vertex_point(std::size_t leaf) const {
  Eigen::VectorXd rho = centroid_point();
  NeveuLabel label = leaf_labels_.at(leaf);
  while (!label.is_root()) {
    const int slot = label.indices().back() - 1;
    label = label.parent();
    const Node& node = nodes_[node_index(label)];
    rho.segment(static_cast<Eigen::Index>(node.offset), node.domain->dim()) =
        node.domain->vertex(static_cast<std::size_t>(slot));
  }
  return rho;
}

Eigen::VectorXd InterpTree::random_point(std::uint64_t seed) const {
  Eigen::VectorXd rho(static_cast<Eigen::Index>(design_dim_));
  for (std::size_t k = 0; k < internal_nodes_.size(); ++k) {
    const Node& node = nodes_[internal_nodes_[k]];
    rho.segment(static_cast<Eigen::Index>(node.offset), node.domain->dim()) =
        node.domain->sample_interior(seed * 7919u + k + 1);
  }
  return rho;
}

InterpTree::Coefficients InterpTree::coefficients(std::span<const double> rho) const {
  if (rho.size() != design_dim_) {
    throw Error(Errc::InvalidParameters, "design point has " + std::to_string(rho.size()) + " coordinates, expected " +
                                             std::to_string(design_dim_));
  }
  Coefficients c;
  c.nodes.reserve(internal_nodes_.size());
  for (std::size_t i : internal_nodes_) {
    const Node& node = nodes_[i];
    const auto dim = static_cast<Eigen::Index>(node.domain->dim());
    Eigen::Map<const Eigen::VectorXd> p(rho.data() + node.offset, dim);
    c.nodes.push_back(node.domain->barycentric(p));
  }
  return c;
}

void InterpTree::accumulate(const Coefficients& c, const Eigen::Vector2d& b, bool with_dB,
                            std::vector<PropertyValue>& sub) const {
  sub.assign(nodes_.size(), PropertyValue{});
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const Node& node = nodes_[i];
    PropertyValue& v = sub[i];
    if (node.material) {
      v.polarization = node.material->polarization(b);
      v.current_density = node.material->current_density();
      if (with_dB) v.d_polarization_dB = node.material->d_polarization_dB(b);
      continue;
    }
    const Eigen::VectorXd& w = c.nodes[node.internal].weights;
    for (std::size_t k = 0; k < node.children.size(); ++k) {
      const PropertyValue& child = sub[node.children[k]];
      const double wk = w[static_cast<Eigen::Index>(k)];
      v.polarization += wk * child.polarization;
      v.current_density += wk * child.current_density;
      if (with_dB) v.d_polarization_dB += wk * child.d_polarization_dB;
    }
  }
}

PropertyValue InterpTree::eval(const Coefficients& c, const Eigen::Vector2d& b) const {
  std::vector<PropertyValue> sub;
  accumulate(c, b, false, sub);
  return sub.front();
}

PropertyValue InterpTree::eval(std::span<const double> rho, const Eigen::Vector2d& b) const {
  return eval(coefficients(rho), b);
}

PropertyValue InterpTree::eval_dB(const Coefficients& c, const Eigen::Vector2d& b) const {
  std::vector<PropertyValue> sub;
  accumulate(c, b, true, sub);
  return sub.front();
}

PropertyValue InterpTree::eval_dB(std::span<const double> rho, const Eigen::Vector2d& b) const {
  return eval_dB(coefficients(rho), b);
}

PropertyJacobian InterpTree::eval_drho(const Coefficients& c, const Eigen::Vector2d& b) const {
  std::vector<PropertyValue> sub;
  accumulate(c, b, false, sub);

  const auto n = static_cast<Eigen::Index>(design_dim_);
  PropertyJacobian out;
  out.d_polarization = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, n);
  out.d_current = Eigen::RowVectorXd::Zero(n);

  // factor[i]: product of weights on the path from the root to node i.
  std::vector<double> factor(nodes_.size(), 0.0);
  factor[0] = 1.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (node.material) continue;
    const BarycentricResult& bc = c.nodes[node.internal];
    const auto off = static_cast<Eigen::Index>(node.offset);
    const auto dim = static_cast<Eigen::Index>(node.domain->dim());
    for (std::size_t k = 0; k < node.children.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const PropertyValue& child = sub[node.children[k]];
      const Eigen::RowVectorXd grad = factor[i] * bc.gradients.col(kk).transpose();
      out.d_polarization.middleCols(off, dim) += child.polarization * grad;
      out.d_current.segment(off, dim) += child.current_density * grad;
      factor[node.children[k]] = factor[i] * bc.weights[kk];
    }
  }
  return out;
}

PropertyJacobian InterpTree::eval_drho(std::span<const double> rho, const Eigen::Vector2d& b) const {
  return eval_drho(coefficients(rho), b);
}

std::vector<PropertyValue> InterpTree::eval_batch(const Eigen::MatrixXd& rho, std::span<const Eigen::Vector2d> b,
                                                  bool with_dB) const {
  if (static_cast<std::size_t>(rho.rows()) != b.size()) throw Error(Errc::InvalidParameters, "batch size mismatch");
  std::vector<PropertyValue> out;
  out.reserve(b.size());
  Eigen::VectorXd row;
  for (Eigen::Index e = 0; e < rho.rows(); ++e) {
    row = rho.row(e).transpose();
    const auto c = coefficients({row.data(), static_cast<std::size_t>(row.size())});
    out.push_back(with_dB ? eval_dB(c, b[static_cast<std::size_t>(e)]) : eval(c, b[static_cast<std::size_t>(e)]));
  }
  return out;
}

std::vector<PropertyJacobian> InterpTree::eval_drho_batch(const Eigen::MatrixXd& rho,
                                                          std::span<const Eigen::Vector2d> b) const {
  if (static_cast<std::size_t>(rho.rows()) != b.size()) throw Error(Errc::InvalidParameters, "batch size mismatch");
  std::vector<PropertyJacobian> out;
  out.reserve(b.size());
  Eigen::VectorXd row;
  for (Eigen::Index e = 0; e < rho.rows(); ++e) {
    row = rho.row(e).transpose();
    out.push_back(eval_drho({row.data(), static_cast<std::size_t>(row.size())}, b[static_cast<std::size_t>(e)]));
  }
  return out;
}

Eigen::VectorXd InterpTree::leaf_weights(const Coefficients& c) const {
  std::vector<double> factor(nodes_.size(), 0.0);
  factor[0] = 1.0;
  Eigen::VectorXd out(static_cast<Eigen::Index>(leaf_nodes_.size()));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (node.material) {
      out[static_cast<Eigen::Index>(node.leaf)] = factor[i];
      continue;
    }
    const auto& w = c.nodes[node.internal].weights;
    for (std::size_t k = 0; k < node.children.size(); ++k)
      factor[node.children[k]] = factor[i] * w[static_cast<Eigen::Index>(k)];
  }
  return out;
}

void InterpTree::project_design(std::span<double> rho) const {
  if (rho.size() != design_dim_) throw Error(Errc::InvalidParameters, "design point size mismatch");
  for (std::size_t i : internal_nodes_) {
    const Node& node = nodes_[i];
    Eigen::Map<Eigen::VectorXd> p(rho.data() + node.offset, node.domain->dim());
    const Eigen::VectorXd q = node.domain->project(p);
    p = q;
  }
}

std::map<NeveuLabel, Eigen::VectorXd> InterpTree::project_design(const std::map<NeveuLabel, Eigen::VectorXd>& rho) const {
  std::map<NeveuLabel, Eigen::VectorXd> out;
  for (const auto& [label, point] : rho) out.emplace(label, domain(label).project(point));
  return out;
}

Eigen::VectorXd InterpTree::pack(const std::map<NeveuLabel, Eigen::VectorXd>& rho) const {
  Eigen::VectorXd flat = centroid_point();
  for (const auto& [label, point] : rho) {
    const Polytope& poly = domain(label);
    if (point.size() != poly.dim()) throw Error(Errc::InvalidParameters, "coordinate size mismatch at " + label.str());
    flat.segment(static_cast<Eigen::Index>(offset(label)), poly.dim()) = point;
  }
  return flat;
}

std::string InterpTree::dump() const {
  std::ostringstream os;
  for (const Node& node : nodes_) {
    os << std::string(2 * node.label.depth(), ' ') << node.label.str() << "  ";
    if (node.material) {
      os << "material " << node.material->name();
    } else {
      os << node.domain->describe() << "  children:";
      for (std::size_t c : node.children) os << ' ' << nodes_[c].label.str();
    }
    os << '\n';
  }
  return os.str();
}

PropertyValue flatten_oracle(const InterpTree& tree, std::span<const double> rho, const Eigen::Vector2d& b) {
  PropertyValue out;
  for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    double product = 1.0;
    NeveuLabel label = tree.leaf_labels()[leaf];
    while (!label.is_root()) {
      const int slot = label.indices().back() - 1;
      label = label.parent();
      const auto coords = tree.node_coords(rho, label);
      const Eigen::Map<const Eigen::VectorXd> p(coords.data(), static_cast<Eigen::Index>(coords.size()));
      product *= tree.domain(label).barycentric(p).weights[slot];
    }
    const MaterialModel& m = tree.leaf_material(leaf);
    out.polarization += product * m.polarization(b);
    out.current_density += product * m.current_density();
    out.d_polarization_dB += product * m.d_polarization_dB(b);
  }
  return out;
}

}  // namespace mmtopo

#include "mmtopo/fem.hpp"

#include "mmtopo/error.hpp"

#include <Eigen/SparseCholesky>

#include <future>
#include <set>
#include <sstream>

namespace mmtopo {

FemModel::FemModel(const SectorMesh& mesh, const InterpTree& tree, Periodicity periodicity)
    : mesh_(&mesh), tree_(&tree), periodicity_(periodicity), air_(air_model()) {
  const std::size_t n_nodes = mesh.nodes.size();
  dof_.assign(n_nodes, DofRef{});
  std::set<int> dirichlet(mesh.inner_arc.begin(), mesh.inner_arc.end());
  dirichlet.insert(mesh.outer_arc.begin(), mesh.outer_arc.end());
  std::vector<int> slave_of(n_nodes, -1);
  for (std::size_t k = 0; k < mesh.slave_edge.size(); ++k) slave_of[static_cast<std::size_t>(mesh.slave_edge[k])] = mesh.master_edge[k];

  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (dirichlet.contains(static_cast<int>(i)) || slave_of[i] >= 0) continue;
    dof_[i].dof = free_count_++;
  }
  const double slave_sign = periodicity == Periodicity::AntiPeriodic ? -1.0 : 1.0;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (slave_of[i] < 0 || dirichlet.contains(static_cast<int>(i))) continue;
    const DofRef& master = dof_[static_cast<std::size_t>(slave_of[i])];
    dof_[i] = DofRef{master.dof, slave_sign * master.sign};
  }

  const std::size_t n_el = mesh.element_count();
  curl_.resize(n_el);
  area_.resize(n_el);
  for (std::size_t e = 0; e < n_el; ++e) {
    const auto& t = mesh.triangles[e];
    const double area = mesh.area(e);
    if (!(area > 0.0)) throw Error(Errc::InvalidGeometry, "element " + std::to_string(e) + " has non-positive area");
    area_[e] = area;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector2d& pj = mesh.nodes[static_cast<std::size_t>(t[(i + 1) % 3])];
      const Eigen::Vector2d& pk = mesh.nodes[static_cast<std::size_t>(t[(i + 2) % 3])];
      const double b = pj.y() - pk.y();
      const double c = pk.x() - pj.x();
      curl_[e](0, i) = c / (2.0 * area);
      curl_[e](1, i) = -b / (2.0 * area);
    }
  }

  design_elements_ = mesh.design_elements();
  design_row_.assign(n_el, -1);
  for (std::size_t r = 0; r < design_elements_.size(); ++r) design_row_[static_cast<std::size_t>(design_elements_[r])] = static_cast<int>(r);
  Eigen::MatrixXd initial(static_cast<Eigen::Index>(design_elements_.size()), static_cast<Eigen::Index>(tree.design_dim()));
  initial.rowwise() = tree.centroid_point().transpose();
  set_design(initial);
}

void FemModel::set_design(const Eigen::MatrixXd& rho) {
  if (static_cast<std::size_t>(rho.rows()) != design_elements_.size() ||
      static_cast<std::size_t>(rho.cols()) != tree_->design_dim()) {
    throw Error(Errc::InvalidParameters, "design matrix must be (design elements) x (tree design dimension)");
  }
  design_ = rho;
  coefficients_.clear();
  coefficients_.reserve(design_elements_.size());
  Eigen::VectorXd row;
  for (Eigen::Index r = 0; r < rho.rows(); ++r) {
    row = rho.row(r).transpose();
    coefficients_.push_back(tree_->coefficients({row.data(), static_cast<std::size_t>(row.size())}));
  }
}

Eigen::VectorXd FemModel::expand(const Eigen::VectorXd& free) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof_.size()));
  for (std::size_t i = 0; i < dof_.size(); ++i)
    if (dof_[i].dof >= 0) full[static_cast<Eigen::Index>(i)] = dof_[i].sign * free[dof_[i].dof];
  return full;
}

Eigen::VectorXd FemModel::reduce(const Eigen::VectorXd& full) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(free_count_);
  for (std::size_t i = 0; i < dof_.size(); ++i)
    if (dof_[i].dof >= 0) out[dof_[i].dof] += dof_[i].sign * full[static_cast<Eigen::Index>(i)];
  return out;
}

Eigen::Vector2d FemModel::element_b(std::size_t element, const Eigen::VectorXd& a_full) const {
  const auto& t = mesh_->triangles[element];
  const Eigen::Vector3d local(a_full[t[0]], a_full[t[1]], a_full[t[2]]);
  return curl_[element] * local;
}

PropertyValue FemModel::element_properties(std::size_t element, const Eigen::Vector2d& b, bool with_dB) const {
  const int row = design_row_[element];
  if (row < 0) {
    PropertyValue v;
    v.polarization = air_.polarization(b);
    v.current_density = air_.current_density();
    return v;
  }
  const auto& c = coefficients_[static_cast<std::size_t>(row)];
  return with_dB ? tree_->eval_dB(c, b) : tree_->eval(c, b);
}

Eigen::VectorXd FemModel::residual(const Eigen::VectorXd& u, int load_sign) const {
  const Eigen::VectorXd a = expand(u);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(free_count_);
  for (std::size_t e = 0; e < mesh_->element_count(); ++e) {
    const Eigen::Vector2d b = element_b(e, a);
    const PropertyValue p = element_properties(e, b, false);
    const Eigen::Vector3d local = area_[e] * kNu0 * curl_[e].transpose() * (b - p.polarization) -
                                  Eigen::Vector3d::Constant(load_sign * p.current_density * area_[e] / 3.0);
    const auto& t = mesh_->triangles[e];
    for (int i = 0; i < 3; ++i) {
      const DofRef& d = dof_[static_cast<std::size_t>(t[i])];
      if (d.dof >= 0) r[d.dof] += d.sign * local[i];
    }
  }
  return r;
}

void FemModel::assemble(const Eigen::VectorXd& u, int load_sign, Eigen::VectorXd& r,
                        Eigen::SparseMatrix<double>& jacobian) const {
  const Eigen::VectorXd a = expand(u);
  r = Eigen::VectorXd::Zero(free_count_);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * mesh_->element_count());
  for (std::size_t e = 0; e < mesh_->element_count(); ++e) {
    const Eigen::Vector2d b = element_b(e, a);
    const PropertyValue p = element_properties(e, b, true);
    const auto& C = curl_[e];
    const Eigen::Vector3d local = area_[e] * kNu0 * C.transpose() * (b - p.polarization) -
                                  Eigen::Vector3d::Constant(load_sign * p.current_density * area_[e] / 3.0);
    const Eigen::Matrix3d ke = area_[e] * kNu0 * C.transpose() * (Eigen::Matrix2d::Identity() - p.d_polarization_dB) * C;
    const auto& t = mesh_->triangles[e];
    for (int i = 0; i < 3; ++i) {
      const DofRef& di = dof_[static_cast<std::size_t>(t[i])];
      if (di.dof < 0) continue;
      r[di.dof] += di.sign * local[i];
      for (int j = 0; j < 3; ++j) {
        const DofRef& dj = dof_[static_cast<std::size_t>(t[j])];
        if (dj.dof < 0) continue;
        triplets.emplace_back(di.dof, dj.dof, di.sign * dj.sign * ke(i, j));
      }
    }
  }
  jacobian.resize(free_count_, free_count_);
  jacobian.setFromTriplets(triplets.begin(), triplets.end());
}

FemState FemModel::make_state(const Eigen::VectorXd& u, int load_sign) const {
  FemState s;
  s.free = u;
  s.a = expand(u);
  s.load_sign = load_sign;
  s.b.resize(mesh_->element_count());
  for (std::size_t e = 0; e < mesh_->element_count(); ++e) s.b[e] = element_b(e, s.a);
  return s;
}

FemState FemModel::solve(int load_sign, const NewtonOptions& options, const std::optional<Eigen::VectorXd>& initial) const {
  if (load_sign != 1 && load_sign != -1) throw Error(Errc::InvalidParameters, "load sign must be +1 or -1");
  Eigen::VectorXd u = initial ? *initial : Eigen::VectorXd::Zero(free_count_);
  if (u.size() != free_count_) throw Error(Errc::InvalidParameters, "initial state has the wrong size");

  const double load_norm = residual(Eigen::VectorXd::Zero(free_count_), load_sign).norm();
  const double target = load_norm > 0.0 ? options.tolerance * load_norm : 1e-12;

  Eigen::VectorXd r;
  Eigen::SparseMatrix<double> k;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool analyzed = false;
  r = residual(u, load_sign);
  double norm = r.norm();
  int iterations = 0;
  while (norm > target) {
    if (iterations >= options.max_iterations) {
      std::ostringstream os;
      os << "no convergence after " << iterations << " iterations (residual " << norm << ", target " << target << ")";
      throw Error(Errc::NewtonDivergence, os.str());
    }
    assemble(u, load_sign, r, k);
    if (!analyzed) {
      solver.analyzePattern(k);
      analyzed = true;
    }
    solver.factorize(k);
    if (solver.info() != Eigen::Success) throw Error(Errc::SingularSystem, "Newton Jacobian factorization failed");
    const Eigen::VectorXd step = solver.solve(-r);

    double alpha = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving, alpha *= 0.5) {
      const Eigen::VectorXd trial = u + alpha * step;
      Eigen::VectorXd r_trial = residual(trial, load_sign);
      const double n_trial = r_trial.norm();
      if (n_trial < norm) {
        u = trial;
        r = std::move(r_trial);
        norm = n_trial;
        accepted = true;
        break;
      }
    }
    ++iterations;
    if (!accepted) {
      std::ostringstream os;
      os << "line search stalled at residual " << norm << " (target " << target << ")";
      throw Error(Errc::NewtonDivergence, os.str());
    }
  }
  FemState state = make_state(u, load_sign);
  state.newton_iterations = iterations;
  state.residual_norm = norm;
  return state;
}

Eigen::VectorXd FemModel::flux_functional() const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof_.size()));
  g[mesh_->probe_slave] += 1.0;
  g[mesh_->probe_master] -= 1.0;
  return reduce(g);
}

void assemble(const FemModel& model, const Eigen::VectorXd& u, int load_sign, Eigen::VectorXd& residual,
              Eigen::SparseMatrix<double>& jacobian) {
  model.assemble(u, load_sign, residual, jacobian);
}

FemState solve_newton(const FemModel& model, int load_sign, const NewtonOptions& options) {
  return model.solve(load_sign, options);
}

double compute_flux(const FemState& state, const SectorMesh& mesh) {
  return state.a[mesh.probe_slave] - state.a[mesh.probe_master];
}

BothCases solve_both_cases(const FemModel& model, const NewtonOptions& options,
                           const std::optional<Eigen::VectorXd>& initial_plus,
                           const std::optional<Eigen::VectorXd>& initial_minus) {
  auto minus = std::async(std::launch::async, [&] { return model.solve(-1, options, initial_minus); });
  BothCases out;
  out.plus = model.solve(+1, options, initial_plus);
  out.minus = minus.get();
  out.phi_plus = compute_flux(out.plus, model.mesh());
  out.phi_minus = compute_flux(out.minus, model.mesh());
  return out;
}

}  // namespace mmtopo

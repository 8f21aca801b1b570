#pragma once

#include "mmtopo/interp_tree.hpp"
#include "mmtopo/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <optional>
#include <vector>

namespace mmtopo {

enum class Periodicity { AntiPeriodic, Periodic };

struct FemState {
  Eigen::VectorXd a;                 // all nodes, Wb/m
  Eigen::VectorXd free;              // reduced unknowns
  std::vector<Eigen::Vector2d> b;    // per element, tesla
  int load_sign = 1;
  int newton_iterations = 0;
  double residual_norm = 0.0;
};

struct NewtonOptions {
  double tolerance = 1e-8;
  int max_iterations = 50;
};

/**
 * First-order triangle discretization of
 *   curl( nu0 (B - Jp(B)) ) = J,   B = curl(a e_z)
 * on a sector mesh with a = 0 on both arcs and (anti-)periodic radial edges.
 *
 * Design elements take their material from the interpolation tree at the
 * current (filtered) design; airgap elements are air. The periodic
 * constraint is removed by master-slave reduction: u_full = P u_free.
 */
class FemModel {
 public:
  FemModel(const SectorMesh& mesh, const InterpTree& tree, Periodicity periodicity = Periodicity::AntiPeriodic);

  const SectorMesh& mesh() const noexcept { return *mesh_; }
  const InterpTree& tree() const noexcept { return *tree_; }
  Periodicity periodicity() const noexcept { return periodicity_; }

  /// Design rows in design_elements() order, one tree design point per row.
  void set_design(const Eigen::MatrixXd& rho);
  const Eigen::MatrixXd& design() const noexcept { return design_; }
  const std::vector<int>& design_elements() const noexcept { return design_elements_; }
  /// Row of `element` in the design matrix, or -1 for airgap elements.
  int design_row(std::size_t element) const { return design_row_[element]; }
  const InterpTree::Coefficients& coefficients(std::size_t row) const { return coefficients_[row]; }

  std::size_t free_count() const noexcept { return static_cast<std::size_t>(free_count_); }
  Eigen::VectorXd expand(const Eigen::VectorXd& free) const;
  /// P^T v for a full nodal vector.
  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;

  /// Element flux density from full nodal values.
  Eigen::Vector2d element_b(std::size_t element, const Eigen::VectorXd& a_full) const;
  /// P1 curl operator: B = curl_op * a_local (2x3).
  const Eigen::Matrix<double, 2, 3>& curl_operator(std::size_t element) const { return curl_[element]; }
  double element_area(std::size_t element) const { return area_[element]; }
  PropertyValue element_properties(std::size_t element, const Eigen::Vector2d& b, bool with_dB) const;

  /// Reduced residual at reduced state u.
  Eigen::VectorXd residual(const Eigen::VectorXd& u, int load_sign) const;
  /// Reduced residual and Jacobian at u.
  void assemble(const Eigen::VectorXd& u, int load_sign, Eigen::VectorXd& residual,
                Eigen::SparseMatrix<double>& jacobian) const;

  /// Damped Newton from `initial` (zero when empty). Throws NewtonDivergence.
  FemState solve(int load_sign, const NewtonOptions& options = {},
                 const std::optional<Eigen::VectorXd>& initial = std::nullopt) const;

  /// d(phi)/d(u) on reduced unknowns.
  Eigen::VectorXd flux_functional() const;

 private:
  struct DofRef {
    int dof = -1;  // -1: Dirichlet
    double sign = 1.0;
  };
  FemState make_state(const Eigen::VectorXd& u, int load_sign) const;

  const SectorMesh* mesh_;
  const InterpTree* tree_;
  Periodicity periodicity_;
  std::vector<DofRef> dof_;
  int free_count_ = 0;
  std::vector<Eigen::Matrix<double, 2, 3>> curl_;
  std::vector<double> area_;
  std::vector<int> design_elements_;
  std::vector<int> design_row_;
  Eigen::MatrixXd design_;
  std::vector<InterpTree::Coefficients> coefficients_;
  MaterialModel air_;
};

/// Free-function forms matching the module contract.
void assemble(const FemModel& model, const Eigen::VectorXd& u, int load_sign, Eigen::VectorXd& residual,
              Eigen::SparseMatrix<double>& jacobian);
FemState solve_newton(const FemModel& model, int load_sign, const NewtonOptions& options = {});
/// phi = a(probe_slave) - a(probe_master), per metre of axial length.
double compute_flux(const FemState& state, const SectorMesh& mesh);

struct BothCases {
  FemState plus;
  FemState minus;
  double phi_plus = 0.0;
  double phi_minus = 0.0;
};

/// Two independent solves with load_sign = +1 and -1; the minus case runs on a second thread.
BothCases solve_both_cases(const FemModel& model, const NewtonOptions& options = {},
                           const std::optional<Eigen::VectorXd>& initial_plus = std::nullopt,
                           const std::optional<Eigen::VectorXd>& initial_minus = std::nullopt);

}  // namespace mmtopo

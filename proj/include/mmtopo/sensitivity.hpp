#pragma once

#include "mmtopo/fem.hpp"

#include <Eigen/Core>

namespace mmtopo {

/// MatchedResults: J = (g+1)/2 phi+ + (g-1)/2 phi-.
/// AsPrinted:      J = (g+1)/2 phi+ - (g-1)/2 phi-.
enum class ObjectiveConvention { MatchedResults, AsPrinted };

struct ObjectiveSpec {
  double gamma = 1.0;
  ObjectiveConvention convention = ObjectiveConvention::MatchedResults;

  double weight_plus() const { return 0.5 * (gamma + 1.0); }
  double weight_minus() const {
    return convention == ObjectiveConvention::MatchedResults ? 0.5 * (gamma - 1.0) : -0.5 * (gamma - 1.0);
  }
};

/// Objective to be maximized. Throws InvalidParameters when |gamma| > 1.
double objective(double phi_plus, double phi_minus, const ObjectiveSpec& spec);
inline double objective(double phi_plus, double phi_minus, double gamma) {
  return objective(phi_plus, phi_minus, ObjectiveSpec{gamma});
}

/// Solves K^T lambda = rhs with K the Jacobian at `state`. Default rhs is d(phi)/du.
Eigen::VectorXd solve_adjoint(const FemModel& model, const FemState& state);
Eigen::VectorXd solve_adjoint(const FemModel& model, const FemState& state, const Eigen::VectorXd& rhs);

/// d(phi_case)/d(rho) for one load case: rows follow the model's design rows, columns the design coordinates.
Eigen::MatrixXd flux_gradient(const FemModel& model, const FemState& state, const Eigen::VectorXd& adjoint);

/// dJ/d(rho) on the (filtered) design the model currently holds.
Eigen::MatrixXd design_gradient(const FemModel& model, const FemState& plus, const FemState& minus,
                                const ObjectiveSpec& spec);

}  // namespace mmtopo

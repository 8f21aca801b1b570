#include "mmtopo/sensitivity.hpp"

#include "mmtopo/error.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace mmtopo {

double objective(double phi_plus, double phi_minus, const ObjectiveSpec& spec) {
  if (!(std::abs(spec.gamma) <= 1.0)) throw Error(Errc::InvalidParameters, "gamma must lie in [-1, 1]");
  return spec.weight_plus() * phi_plus + spec.weight_minus() * phi_minus;
}

Eigen::VectorXd solve_adjoint(const FemModel& model, const FemState& state) {
  return solve_adjoint(model, state, model.flux_functional());
}

Eigen::VectorXd solve_adjoint(const FemModel& model, const FemState& state, const Eigen::VectorXd& rhs) {
  if (rhs.isZero(0.0)) return Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r;
  Eigen::SparseMatrix<double> k;
  model.assemble(state.free, state.load_sign, r, k);
  // Isotropic laws give a symmetric Jacobian, so K^T = K.
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(k);
  if (solver.info() != Eigen::Success) throw Error(Errc::SingularSystem, "adjoint factorization failed");
  Eigen::VectorXd lambda = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !lambda.allFinite()) throw Error(Errc::SingularSystem, "adjoint solve failed");
  return lambda;
}

Eigen::MatrixXd flux_gradient(const FemModel& model, const FemState& state, const Eigen::VectorXd& adjoint) {
  const InterpTree& tree = model.tree();
  const auto& elements = model.design_elements();
  const Eigen::VectorXd lambda = model.expand(adjoint);
  Eigen::MatrixXd grad(static_cast<Eigen::Index>(elements.size()), static_cast<Eigen::Index>(tree.design_dim()));
  for (std::size_t r = 0; r < elements.size(); ++r) {
    const auto e = static_cast<std::size_t>(elements[r]);
    const auto& t = model.mesh().triangles[e];
    const Eigen::Vector3d local(lambda[t[0]], lambda[t[1]], lambda[t[2]]);
    const PropertyJacobian dp = tree.eval_drho(model.coefficients(r), state.b[e]);
    const double area = model.element_area(e);
    // dphi/drho = -lambda^T dR/drho, with dR_i/drho = -A nu0 curl_i . dJp/drho - s A/3 dJ/drho.
    const Eigen::Vector2d curl_lambda = model.curl_operator(e) * local;
    grad.row(static_cast<Eigen::Index>(r)) = area * kNu0 * curl_lambda.transpose() * dp.d_polarization +
                                             state.load_sign * area / 3.0 * local.sum() * dp.d_current;
  }
  return grad;
}

Eigen::MatrixXd design_gradient(const FemModel& model, const FemState& plus, const FemState& minus,
                                const ObjectiveSpec& spec) {
  if (!(std::abs(spec.gamma) <= 1.0)) throw Error(Errc::InvalidParameters, "gamma must lie in [-1, 1]");
  const double wp = spec.weight_plus();
  const double wm = spec.weight_minus();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.design_elements().size()),
                                               static_cast<Eigen::Index>(model.tree().design_dim()));
  if (wp != 0.0) grad += wp * flux_gradient(model, plus, solve_adjoint(model, plus));
  if (wm != 0.0) grad += wm * flux_gradient(model, minus, solve_adjoint(model, minus));
  return grad;
}

}  // namespace mmtopo

#include "mmtopo/optimizer.hpp"

#include "mmtopo/error.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace mmtopo {

DensityFilter::DensityFilter(const SectorMesh& mesh, double radius) : radius_(radius) {
  if (!(radius >= 0.0)) throw Error(Errc::InvalidParameters, "filter radius must be non-negative");
  const std::vector<int> elements = mesh.design_elements();
  const auto n = static_cast<Eigen::Index>(elements.size());
  std::vector<Eigen::Vector2d> centers;
  std::vector<double> areas;
  for (int e : elements) {
    centers.push_back(mesh.centroid(static_cast<std::size_t>(e)));
    areas.push_back(mesh.area(static_cast<std::size_t>(e)));
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (radius == 0.0) {
      triplets.emplace_back(i, i, 1.0);
      continue;
    }
    std::vector<std::pair<Eigen::Index, double>> row;
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = (centers[static_cast<std::size_t>(i)] - centers[static_cast<std::size_t>(j)]).norm();
      const double w = std::max(0.0, 1.0 - d / radius) * areas[static_cast<std::size_t>(j)];
      if (w > 0.0) {
        row.emplace_back(j, w);
        total += w;
      }
    }
    for (const auto& [j, w] : row) triplets.emplace_back(i, j, w / total);
  }
  weights_.resize(n, n);
  weights_.setFromTriplets(triplets.begin(), triplets.end());
}

Eigen::MatrixXd DensityFilter::apply(const Eigen::MatrixXd& raw) const { return weights_ * raw; }

Eigen::MatrixXd DensityFilter::adjoint(const Eigen::MatrixXd& gradient) const { return weights_.transpose() * gradient; }

std::string to_string(Termination t) {
  switch (t) {
    case Termination::MaxIterations: return "max_iter";
    case Termination::Stagnation: return "stagnation";
    case Termination::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

double RunResult::best_objective() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& t : trace) best = std::max(best, t.objective);
  return best;
}

void check_feasible(const InterpTree& tree, const DesignField& field) {
  for (const Eigen::MatrixXd* m : {&field.raw, &field.filtered}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (const auto& label : tree.internal_labels()) {
        const Polytope& poly = tree.domain(label);
        const Eigen::VectorXd p = m->row(r).segment(static_cast<Eigen::Index>(tree.offset(label)), poly.dim()).transpose();
        if (!poly.contains(p)) {
          throw Error(Errc::InvalidParameters, "design row " + std::to_string(r) + " leaves the domain of node " + label.str());
        }
      }
    }
  }
}

double step(DesignField& field, const Eigen::MatrixXd& raw_gradient, const OptimizerConfig& config,
            const InterpTree& tree, const DensityFilter& filter) {
  const double gmax = raw_gradient.cwiseAbs().maxCoeff();
  if (!(gmax > 0.0)) throw Error(Errc::ZeroGradient, "gradient vanishes");
  Eigen::MatrixXd next = field.raw;
  if (config.normalization == StepNormalization::Global) {
    next += (config.move_limit / gmax) * raw_gradient;
  } else {
    for (Eigen::Index r = 0; r < next.rows(); ++r) {
      const double rmax = raw_gradient.row(r).cwiseAbs().maxCoeff();
      if (rmax > 0.0) next.row(r) += (config.move_limit / rmax) * raw_gradient.row(r);
    }
  }
  Eigen::VectorXd row;
  for (Eigen::Index r = 0; r < next.rows(); ++r) {
    row = next.row(r).transpose();
    tree.project_design({row.data(), static_cast<std::size_t>(row.size())});
    next.row(r) = row.transpose();
  }
  const double base = field.raw.norm();
  const double change = (next - field.raw).norm() / (base > 0.0 ? base : 1.0);
  field.raw = std::move(next);
  field.filtered = filter.apply(field.raw);
  return change;
}

void write_trace_header(std::ostream& os) {
  os << "iteration,J,phi_plus,phi_minus,step_norm,newton_iters_plus,newton_iters_minus\n";
}

void write_trace_row(std::ostream& os, const TraceEntry& t) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17e,%.17e,%.17e,%.17e,%d,%d\n", t.iteration, t.objective, t.phi_plus,
                t.phi_minus, t.step_norm, t.newton_plus, t.newton_minus);
  os << buf;
}

RunResult run(const SectorMesh& mesh, const InterpTree& tree, const OptimizerConfig& config, const RunHooks& hooks) {
  if (!(config.move_limit > 0.0) || !(config.stagnation_tol > 0.0) || config.max_iterations < 0) {
    throw Error(Errc::InvalidParameters, "optimizer needs move_limit > 0, stagnation_tol > 0, max_iterations >= 0");
  }
  const double radius = config.filter_radius.value_or(2.0 * mesh.mean_edge_length());
  const DensityFilter filter(mesh, radius);
  FemModel model(mesh, tree);

  RunResult result;
  DesignField& field = result.field;
  field.filter_radius = radius;
  const auto rows = static_cast<Eigen::Index>(model.design_elements().size());
  field.raw.resize(rows, static_cast<Eigen::Index>(tree.design_dim()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    field.raw.row(r) = (config.init_seed ? tree.random_point(*config.init_seed + static_cast<std::uint64_t>(r))
                                         : tree.centroid_point())
                           .transpose();
  }
  field.filtered = filter.apply(field.raw);
  check_feasible(tree, field);

  if (hooks.trace_csv) write_trace_header(*hooks.trace_csv);
  std::optional<Eigen::VectorXd> warm_plus, warm_minus;
  result.termination = Termination::MaxIterations;

  for (int it = 1; it <= config.max_iterations; ++it) {
    model.set_design(field.filtered);
    BothCases states;
    try {
      states = solve_both_cases(model, config.newton, warm_plus, warm_minus);
    } catch (const Error& e) {
      result.termination = Termination::SolverFailure;
      result.message = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    warm_plus = states.plus.free;
    warm_minus = states.minus.free;

    TraceEntry entry;
    entry.iteration = it;
    entry.phi_plus = states.phi_plus;
    entry.phi_minus = states.phi_minus;
    entry.objective = objective(states.phi_plus, states.phi_minus, config.objective);
    entry.newton_plus = states.plus.newton_iterations;
    entry.newton_minus = states.minus.newton_iterations;

    if (hooks.checkpoint && config.checkpoint_every > 0 && it % config.checkpoint_every == 0)
      hooks.checkpoint(it, field, model, states);

    const Eigen::MatrixXd raw_gradient =
        filter.adjoint(design_gradient(model, states.plus, states.minus, config.objective));
    bool stagnated = false;
    try {
      entry.step_norm = step(field, raw_gradient, config, tree, filter);
      stagnated = entry.step_norm < config.stagnation_tol;
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroGradient) throw;
      stagnated = true;
    }
    check_feasible(tree, field);
    result.trace.push_back(entry);
    if (hooks.trace_csv) write_trace_row(*hooks.trace_csv, entry);
    if (stagnated) {
      result.termination = Termination::Stagnation;
      break;
    }
  }

  model.set_design(field.filtered);
  try {
    BothCases final_states = solve_both_cases(model, config.newton, warm_plus, warm_minus);
    result.phi_plus = final_states.phi_plus;
    result.phi_minus = final_states.phi_minus;
    result.objective = objective(result.phi_plus, result.phi_minus, config.objective);
    result.state_plus = std::move(final_states.plus);
    result.state_minus = std::move(final_states.minus);
  } catch (const Error& e) {
    result.termination = Termination::SolverFailure;
    if (result.message.empty()) result.message = std::string("final evaluation: ") + e.what();
  }
  return result;
}

Eigen::VectorXd leaf_area_fractions(const FemModel& model) {
  const InterpTree& tree = model.tree();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tree.leaf_count()));
  double area = 0.0;
  const auto& elements = model.design_elements();
  for (std::size_t r = 0; r < elements.size(); ++r) {
    const double a = model.element_area(static_cast<std::size_t>(elements[r]));
    total += a * tree.leaf_weights(model.coefficients(r));
    area += a;
  }
  return area > 0.0 ? Eigen::VectorXd(total / area) : total;
}

}  // namespace mmtopo

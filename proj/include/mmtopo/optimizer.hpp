#pragma once

#include "mmtopo/fem.hpp"
#include "mmtopo/sensitivity.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mmtopo {

/**
 * Linear hat-kernel density filter over design-element centroids:
 *   filtered_e = sum_f w_ef raw_f,  w_ef ~ max(0, 1 - d(e,f)/r) area_f,  sum_f w_ef = 1.
 * Radius 0 gives the identity.
 */
class DensityFilter {
 public:
  DensityFilter(const SectorMesh& mesh, double radius);

  double radius() const noexcept { return radius_; }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
  /// Exact transpose of apply, for chaining sensitivities back to raw space.
  Eigen::MatrixXd adjoint(const Eigen::MatrixXd& gradient) const;
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& weights() const noexcept { return weights_; }

 private:
  double radius_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights_;
};

struct DesignField {
  Eigen::MatrixXd raw;       // design rows x tree design dimension
  Eigen::MatrixXd filtered;
  double filter_radius = 0.0;
};

/// Global: one scale for the whole field, g / ||g||_inf.
/// PerElement: each element's gradient row scaled by its own max entry (a per-element move limit).
enum class StepNormalization { Global, PerElement };

struct OptimizerConfig {
  int max_iterations = 500;
  double stagnation_tol = 1e-4;
  double move_limit = 0.05;
  StepNormalization normalization = StepNormalization::PerElement;
  /// Absolute radius in metres; unset means 2x the mean element edge.
  std::optional<double> filter_radius;
  ObjectiveSpec objective;
  NewtonOptions newton;
  /// Random interior initialization instead of subdomain centroids.
  std::optional<std::uint64_t> init_seed;
  int checkpoint_every = 0;
};

enum class Termination { MaxIterations, Stagnation, SolverFailure };
std::string to_string(Termination t);

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double phi_plus = 0.0;
  double phi_minus = 0.0;
  double step_norm = 0.0;
  int newton_plus = 0;
  int newton_minus = 0;
};

struct RunResult {
  DesignField field;
  std::vector<TraceEntry> trace;
  Termination termination = Termination::MaxIterations;
  std::string message;
  /// Fluxes and objective of the final filtered design.
  double phi_plus = 0.0;
  double phi_minus = 0.0;
  double objective = 0.0;
  FemState state_plus;
  FemState state_minus;

  int iterations() const noexcept { return static_cast<int>(trace.size()); }
  double best_objective() const;
};

/// Every raw and filtered coordinate must lie in its polytope; throws InvalidParameters otherwise.
void check_feasible(const InterpTree& tree, const DesignField& field);

/// raw <- project(raw + move_limit * g / ||g||_inf), the norm taken per `config.normalization`;
/// filtered recomputed. Throws ZeroGradient.
/// Returns ||raw_new - raw_old||_F / ||raw_old||_F.
double step(DesignField& field, const Eigen::MatrixXd& raw_gradient, const OptimizerConfig& config,
            const InterpTree& tree, const DensityFilter& filter);

struct RunHooks {
  std::ostream* trace_csv = nullptr;
  std::function<void(int iteration, const DesignField&, const FemModel&, const BothCases&)> checkpoint;
};

RunResult run(const SectorMesh& mesh, const InterpTree& tree, const OptimizerConfig& config, const RunHooks& hooks = {});

void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, const TraceEntry& entry);

/// Area-weighted share of every leaf over the design region, at the model's current design.
Eigen::VectorXd leaf_area_fractions(const FemModel& model);

}  // namespace mmtopo

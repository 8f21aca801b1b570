#pragma once

#include "mmtopo/domains.hpp"
#include "mmtopo/mesh.hpp"
#include "mmtopo/optimizer.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mmtopo {

/// A custom tree node in a study config; material names refer to the catalogue.
struct CustomNode {
  NeveuLabel label;
  std::optional<Polytope> domain;
  std::optional<std::string> material;
};

/// A built-in domain (empty `nodes`) or a custom tree.
struct DomainEntry {
  std::string name;
  std::vector<CustomNode> nodes;
};

struct StudyConfig {
  SectorGeometry geometry;
  int mesh_elements = 2000;
  CatalogueParameters materials;
  std::vector<DomainEntry> domains{{"hexadecagon", {}}, {"diamond", {}}, {"recursive", {}}};
  OptimizerConfig optimizer;
  double gamma_min = -1.0;
  double gamma_max = 1.0;
  double gamma_step = 0.1;
  /// sd0 normalization; unset means the largest |phi| observed in the sweep.
  std::optional<double> phi_max;
  std::filesystem::path output_dir = "mmtopo_out";
  bool write_vtk = true;
  bool write_trace = true;
};

/// Throws InvalidConfig on malformed JSON, unknown keys or out-of-range values.
StudyConfig parse_config(const std::string& json_text);
/// Throws IoFailure when the file cannot be read.
StudyConfig load_config(const std::filesystem::path& path);
/// Human-readable description of every config key.
std::string config_schema_help();

/// {"shape":"segment","v0":0,"v1":1}, {"shape":"regular_polygon","n":16,"radius":1},
/// {"shape":"diamond","equator":14,"apex":1}, {"shape":"polygon","vertices":[[x,y],...]},
/// {"shape":"polyhedron","vertices":[[x,y,z],...]}.
Polytope parse_polytope(const std::string& json_text);

InterpTree build_domain_tree(const DomainEntry& entry, const MaterialCatalogue& catalogue);

/// min(|phi+ - phi-|, |phi+ + phi-|) / phi_max. Throws InvalidNormalization when phi_max <= 0.
double sd0(double phi_plus, double phi_minus, double phi_max);

/// min, min+step, ... up to max (inclusive within 1e-9 step). Empty when min > max.
std::vector<double> gamma_values(double gamma_min, double gamma_max, double gamma_step);

struct ParetoRecord {
  double gamma = 0.0;
  std::string domain;
  double phi_plus = 0.0;
  double phi_minus = 0.0;
  double sd0 = 0.0;
  int iterations = 0;
  std::string termination;
  std::string design_path;
  /// Highest sd0 of its domain in the sweep.
  bool best = false;
  std::string message;
};

/// Stem of the per-run output files, e.g. "recursive_g+0.100000".
std::string run_stem(const std::string& domain, double gamma);

/// One optimization with file outputs under config.output_dir/runs. sd0 is left at 0.
ParetoRecord run_study_case(const StudyConfig& config, const SectorMesh& mesh, const InterpTree& tree,
                            const MaterialCatalogue& catalogue, const std::string& domain, double gamma);

/**
 * Every (gamma, domain) pair of the config, run on a worker pool capped by
 * MMTOPO_THREADS. Pairs whose record file already exists are loaded, not rerun.
 * Writes summary.csv and best_sd0.csv; returns records sorted by gamma, then domain order.
 */
std::vector<ParetoRecord> gamma_sweep(const StudyConfig& config, std::ostream* log = nullptr);

/// Header `gamma,domain,phi_plus,phi_minus,sd0,iterations,termination`; floats as %.17e.
void write_records_csv(const std::filesystem::path& path, const std::vector<ParetoRecord>& records);
std::vector<ParetoRecord> read_records_csv(const std::filesystem::path& path);

/// Filtered design rows, one line per design element, %.17e.
void write_design(const std::filesystem::path& path, const Eigen::MatrixXd& design);
Eigen::MatrixXd read_design(const std::filesystem::path& path);

/**
 * Legacy ASCII VTK triangle grid. Cell data: rho_<label> per internal node,
 * dominant_material (catalogue index), polarization_magnitude, current_density,
 * material_color; point data: a. Airgap cells report air and zero coordinates.
 * `state` supplies B and a; without it B = 0 and a = 0.
 */
void export_vtk(const std::filesystem::path& path, const SectorMesh& mesh, const InterpTree& tree,
                const MaterialCatalogue& catalogue, const Eigen::MatrixXd& design, const FemState* state = nullptr);

/// Catalogue index of the leaf with the largest path weight, per design row.
std::vector<int> dominant_materials(const InterpTree& tree, const MaterialCatalogue& catalogue,
                                    const Eigen::MatrixXd& design);

struct GradientCheck {
  int elements = 0;
  int coordinates = 0;
  /// max_i |adjoint_i - fd_i| / max_i |fd_i| over every design coordinate.
  double linear_error = 0.0;
  double nonlinear_error = 0.0;
};

/// Adjoint versus central finite differences of the objective on a small mesh with a seeded random design.
/// The linear case swaps steel for linear iron of the same initial slope.
GradientCheck check_gradients(int target_elements, std::uint64_t seed, double gamma = 0.5,
                              const std::string& domain = "recursive");

}  // namespace mmtopo

#include "cli.hpp"

#include "mmtopo/error.hpp"
#include "mmtopo/study.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace mmtopo {

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kSolver = 2;

bool solver_error(Errc c) {
  return c == Errc::NewtonDivergence || c == Errc::SingularSystem || c == Errc::SolverFailure;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

const DomainEntry& find_domain(const StudyConfig& config, const std::string& name, DomainEntry& scratch) {
  for (const auto& d : config.domains)
    if (d.name == name) return d;
  scratch = DomainEntry{name, {}};
  return scratch;
}

int cmd_optimize(const std::string& config_path, const std::string& output, double gamma, const std::string& domain,
                 std::ostream& out) {
  StudyConfig config = load_config(config_path);
  if (!output.empty()) config.output_dir = output;
  if (!(std::abs(gamma) <= 1.0)) throw Error(Errc::InvalidConfig, "--gamma must lie in [-1, 1]");
  DomainEntry scratch;
  const DomainEntry& entry = find_domain(config, domain, scratch);
  const MaterialCatalogue catalogue = default_catalogue(config.materials);
  const InterpTree tree = build_domain_tree(entry, catalogue);
  const SectorMesh mesh = generate_sector_mesh(config.geometry, config.mesh_elements);
  const ParetoRecord rec = run_study_case(config, mesh, tree, catalogue, domain, gamma);
  out << "domain " << rec.domain << "  gamma " << rec.gamma << "\n"
      << "phi_plus  " << sci(rec.phi_plus) << " Wb/m\n"
      << "phi_minus " << sci(rec.phi_minus) << " Wb/m\n"
      << "objective " << sci(objective(rec.phi_plus, rec.phi_minus, ObjectiveSpec{gamma, config.optimizer.objective.convention}))
      << "\n";
  if (config.phi_max && std::isfinite(rec.phi_plus)) out << "sd0       " << sd0(rec.phi_plus, rec.phi_minus, *config.phi_max) << "\n";
  out << "iterations " << rec.iterations << "  termination " << rec.termination << "\n"
      << "design " << (config.output_dir / rec.design_path).string() << "\n";
  if (rec.termination == "solver_failure") {
    out << rec.message << "\n";
    return kSolver;
  }
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& output, std::ostream& out) {
  StudyConfig config = load_config(config_path);
  if (!output.empty()) config.output_dir = output;
  const auto records = gamma_sweep(config, &out);
  int failures = 0;
  for (const auto& r : records) {
    if (r.termination == "solver_failure" || r.termination == "error") ++failures;
    if (r.best) out << "best sd0 " << r.domain << ": " << r.sd0 << " at gamma " << r.gamma << "\n";
  }
  out << records.size() << " runs, " << failures << " failed; summary in " << (config.output_dir / "summary.csv").string()
      << "\n";
  return failures > 0 ? kSolver : kOk;
}

int cmd_check_gradients(int elements, std::uint64_t seed, double gamma, const std::string& domain, double tolerance,
                        std::ostream& out) {
  const GradientCheck c = check_gradients(elements, seed, gamma, domain);
  const double worst = std::max(c.linear_error, c.nonlinear_error);
  out << "mesh elements " << c.elements << ", design coordinates " << c.coordinates << "\n"
      << "linear    max relative error " << sci(c.linear_error) << "\n"
      << "nonlinear max relative error " << sci(c.nonlinear_error) << "\n"
      << "max relative error " << sci(worst) << (worst <= tolerance ? "  ok" : "  FAILED") << "\n";
  return worst <= tolerance ? kOk : kSolver;
}

int cmd_export(const std::string& config_path, const std::string& domain, const std::string& design_path,
               const std::string& output, std::ostream& out) {
  const StudyConfig config = load_config(config_path);
  DomainEntry scratch;
  const MaterialCatalogue catalogue = default_catalogue(config.materials);
  const InterpTree tree = build_domain_tree(find_domain(config, domain, scratch), catalogue);
  const SectorMesh mesh = generate_sector_mesh(config.geometry, config.mesh_elements);
  FemModel model(mesh, tree);
  model.set_design(read_design(design_path));
  const FemState plus = model.solve(+1, config.optimizer.newton);
  export_vtk(output, mesh, tree, catalogue, model.design(), &plus);
  out << "wrote " << output << " (" << mesh.element_count() << " cells, phi_plus " << sci(compute_flux(plus, mesh))
      << " Wb/m)\n";
  return kOk;
}

int cmd_mesh_info(const std::string& config_path, int elements, const std::string& write_path, std::ostream& out) {
  StudyConfig config = config_path.empty() ? StudyConfig{} : load_config(config_path);
  if (elements > 0) config.mesh_elements = elements;
  const SectorMesh mesh = generate_sector_mesh(config.geometry, config.mesh_elements);
  const std::string problem = check_mesh(mesh);
  out << "nodes " << mesh.nodes.size() << "\n"
      << "elements " << mesh.element_count() << " (design " << mesh.design_elements().size() << ", airgap "
      << mesh.element_count() - mesh.design_elements().size() << ")\n"
      << "radial edge pairs " << mesh.master_edge.size() << "\n"
      << "mean edge " << sci(mesh.mean_edge_length()) << " m\n"
      << "check " << (problem.empty() ? "ok" : problem) << "\n";
  if (!write_path.empty()) {
    std::ofstream os(write_path);
    if (!os) throw Error(Errc::IoFailure, "cannot write " + write_path);
    write_mesh(os, mesh);
    out << "wrote " << write_path << "\n";
  }
  return problem.empty() ? kOk : kUsage;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-material topology optimization of a hybrid-excited rotor pole", "mmtopo"};
  app.require_subcommand(1);
  app.footer(config_schema_help());

  std::string config, output, domain = "recursive", design, write_path;
  double gamma = 1.0, check_gamma = 0.5, tolerance = 1e-3;
  int elements = 50, mesh_elements = 0;
  std::uint64_t seed = 1;

  auto* optimize = app.add_subcommand("optimize", "One optimization run");
  optimize->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
  optimize->add_option("--gamma", gamma, "Objective weight in [-1, 1]")->required();
  optimize->add_option("--domain", domain, "Domain name (built-in or from the config)")->required();
  optimize->add_option("--output", output, "Override output.directory");

  auto* sweep = app.add_subcommand("sweep", "Gamma sweep over every configured domain");
  sweep->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--output", output, "Override output.directory");

  auto* check = app.add_subcommand("check-gradients", "Adjoint versus finite-difference gradients");
  check->add_option("--elements", elements, "Target element count")->capture_default_str();
  check->add_option("--seed", seed, "Random design seed")->capture_default_str();
  check->add_option("--gamma", check_gamma, "Objective weight")->capture_default_str();
  check->add_option("--domain", domain, "Built-in domain")->capture_default_str();
  check->add_option("--tolerance", tolerance, "Pass threshold")->capture_default_str();

  auto* exporter = app.add_subcommand("export", "Write a saved design as VTK");
  exporter->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
  exporter->add_option("--domain", domain, "Domain name")->required();
  exporter->add_option("--design", design, "Design file written by optimize or sweep")->required()->check(CLI::ExistingFile);
  exporter->add_option("--output", output, "VTK file to write")->required();

  auto* info = app.add_subcommand("mesh-info", "Mesh statistics and validity");
  info->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  info->add_option("--elements", mesh_elements, "Override mesh.target_elements");
  info->add_option("--write", write_path, "Write the mesh in plain-text format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  try {
    if (optimize->parsed()) return cmd_optimize(config, output, gamma, domain, out);
    if (sweep->parsed()) return cmd_sweep(config, output, out);
    if (check->parsed()) return cmd_check_gradients(elements, seed, check_gamma, domain, tolerance, out);
    if (exporter->parsed()) return cmd_export(config, domain, design, output, out);
    if (info->parsed()) return cmd_mesh_info(config, mesh_elements, write_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (solver_error(e.code())) return kSolver;
    if (e.code() == Errc::InvalidConfig) err << "\n" << config_schema_help();
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  err << app.help();
  return kUsage;
}

}  // namespace mmtopo

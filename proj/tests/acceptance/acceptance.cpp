// Acceptance checks, one PASS/FAIL line per criterion.
// Criterion 7 is comparative and seed-pinned: it is reported but does not affect the exit code.

#include "oracles.hpp"

#include "mmtopo/domains.hpp"
#include "mmtopo/fem.hpp"
#include "mmtopo/optimizer.hpp"
#include "mmtopo/study.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace mmtopo;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

bool g_failed = false;

void report(int id, const std::string& title, const std::function<Verdict()>& body, bool gating = true) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char time_buf[32];
  std::snprintf(time_buf, sizeof time_buf, "%.1f s", secs);
  std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << (gating ? "" : " (expected, not gating)")
            << "  " << title << "  [" << v.detail << "; " << time_buf << "]" << std::endl;
  if (gating && !v.pass) g_failed = true;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 ---------------------------------------------------------------------------

Verdict interpolation_core() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Polytope> polys{Polytope::segment(), Polytope::segment(-2.0, 3.0)};
  for (int n = 3; n <= 16; ++n) polys.push_back(Polytope::regular_polygon(n));
  polys.push_back(Polytope::diamond(4));
  polys.push_back(Polytope::diamond(14));
  std::mt19937_64 rng(2024);
  double pou = 0.0, lin = 0.0, delta = 0.0, grad = 0.0, min_w = 1.0;
  for (const Polytope& poly : polys) {
    for (int k = 0; k < 1000; ++k) {
      const Eigen::VectorXd p = poly.sample_interior(rng());
      const auto r = poly.barycentric(p);
      pou = std::max(pou, std::abs(r.weights.sum() - 1.0));
      min_w = std::min(min_w, r.weights.minCoeff());
      Eigen::VectorXd q = Eigen::VectorXd::Zero(poly.dim());
      for (std::size_t i = 0; i < poly.vertex_count(); ++i) q += r.weights[static_cast<Eigen::Index>(i)] * poly.vertex(i);
      lin = std::max(lin, (q - p).norm());
    }
    for (std::size_t j = 0; j < poly.vertex_count(); ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(poly.vertex_count()));
      e[static_cast<Eigen::Index>(j)] = 1.0;
      delta = std::max(delta, (poly.barycentric(poly.vertex(j)).weights - e).cwiseAbs().maxCoeff());
    }
    for (int k = 0; k < 50; ++k) {
      const Eigen::VectorXd p = poly.centroid() + 0.9 * (poly.sample_interior(rng()) - poly.centroid());
      const Eigen::MatrixXd analytic = poly.barycentric(p).gradients.transpose();
      const Eigen::MatrixXd fd = oracle::central_jacobian(
          [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(poly.barycentric(x).weights); }, p, 1e-6);
      grad = std::max(grad, (analytic - fd).norm() / std::max(1.0, fd.norm()));
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = pou <= 1e-12 && lin <= 1e-10 && delta <= 1e-12 && min_w >= 0.0 && grad <= 1e-5 && secs < 10.0;
  return {ok, "unity " + fmt("%.1e", pou) + ", linear " + fmt("%.1e", lin) + ", delta " + fmt("%.1e", delta) +
                  ", gradient " + fmt("%.1e", grad) + " (limit 1e-5)"};
}

// 2 ---------------------------------------------------------------------------

Verdict recursion() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double eq = 0.0, fd_err = 0.0;
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const InterpTree tree = InterpTree::build(oracle::random_tree_spec(rng));
    for (int k = 0; k < 10; ++k, ++checked) {
      const Eigen::VectorXd rho = tree.random_point(rng());
      const std::span<const double> rs{rho.data(), static_cast<std::size_t>(rho.size())};
      const Eigen::Vector2d b(u(rng), u(rng));
      const PropertyValue e = tree.eval_dB(rs, b), f = flatten_oracle(tree, rs, b);
      eq = std::max({eq, (e.polarization - f.polarization).norm(), (e.d_polarization_dB - f.d_polarization_dB).norm(),
                     std::abs(e.current_density - f.current_density) / std::max(1.0, std::abs(f.current_density))});
      auto stacked = [&](const Eigen::VectorXd& x) {
        const PropertyValue p = tree.eval({x.data(), static_cast<std::size_t>(x.size())}, b);
        return Eigen::VectorXd(Eigen::Vector3d(p.polarization.x(), p.polarization.y(), p.current_density));
      };
      const PropertyJacobian j = tree.eval_drho(rs, b);
      Eigen::MatrixXd analytic(3, j.d_current.size());
      analytic.topRows(2) = j.d_polarization;
      analytic.row(2) = j.d_current;
      const Eigen::MatrixXd fd = oracle::central_jacobian(stacked, rho, 1e-6);
      const double scale = std::max(analytic.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
      if (scale > 0.0) fd_err = std::max(fd_err, (analytic - fd).cwiseAbs().maxCoeff() / scale);
    }
  }
  const double secs = seconds_since(t0);
  return {eq <= 1e-12 && fd_err <= 1e-6 && secs < 30.0,
          std::to_string(checked) + " tree/point pairs, eval vs flattened " + fmt("%.1e", eq) + " (limit 1e-12), derivative vs FD " +
              fmt("%.1e", fd_err) + " (limit 1e-6)"};
}

// 3 ---------------------------------------------------------------------------

double annulus_error(int target, double& h) {
  const SectorGeometry g;
  const SectorMesh mesh = generate_sector_mesh(g, target);
  h = mesh.mean_edge_length();
  const InterpTree tree = InterpTree::build({{NeveuLabel{}, Polytope::segment(), std::nullopt},
                                             {NeveuLabel{1}, std::nullopt, constant_model("j1", Eigen::Vector2d::Zero(), 1e7)},
                                             {NeveuLabel{2}, std::nullopt, constant_model("j2", Eigen::Vector2d::Zero(), 1e7)}});
  const FemModel model(mesh, tree, Periodicity::Periodic);
  const FemState s = model.solve(+1);
  // -nu0 lap(a) = J inside r_rotor, 0 in the gap, a = 0 on both arcs.
  const double q = 1e7 / (4.0 * kNu0);
  Eigen::Matrix4d m;
  Eigen::Vector4d rhs;
  m << std::log(g.r_shaft), 1, 0, 0, 0, 0, std::log(g.r_outer), 1, std::log(g.r_rotor), 1, -std::log(g.r_rotor), -1,
      1.0 / g.r_rotor, 0, -1.0 / g.r_rotor, 0;
  rhs << q * g.r_shaft * g.r_shaft, 0, q * g.r_rotor * g.r_rotor, 2.0 * q * g.r_rotor;
  const Eigen::Vector4d c = m.partialPivLu().solve(rhs);
  double err = 0.0;
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const double r = mesh.nodes[i].norm();
    const double exact = r <= g.r_rotor ? -q * r * r + c[0] * std::log(r) + c[1] : c[2] * std::log(r) + c[3];
    err = std::max(err, std::abs(s.a[static_cast<Eigen::Index>(i)] - exact));
  }
  return err;
}

Verdict fem_verification() {
  const auto t0 = std::chrono::steady_clock::now();
  double h[3];
  const double e[3] = {annulus_error(500, h[0]), annulus_error(2000, h[1]), annulus_error(8000, h[2])};
  const double o1 = std::log(e[0] / e[1]) / std::log(h[0] / h[1]);
  const double o2 = std::log(e[1] / e[2]) / std::log(h[1] / h[2]);

  const SectorMesh mesh = generate_sector_mesh(SectorGeometry{}, 2000);
  const MaterialCatalogue cat = default_catalogue();
  const InterpTree tree = recursive_tree(cat);
  FemModel model(mesh, tree);
  int newton = 0;
  {
    const BothCases both = solve_both_cases(model);
    newton = std::max({newton, both.plus.newton_iterations, both.minus.newton_iterations});
  }
  {
    // Saturating steel rotor with a surface magnet ring.
    Eigen::MatrixXd rho(static_cast<Eigen::Index>(model.design_elements().size()), static_cast<Eigen::Index>(tree.design_dim()));
    const auto steel = static_cast<std::size_t>(tree.leaf_of("steel"));
    const auto magnet = static_cast<std::size_t>(tree.leaf_of(pm_name(0)));
    for (std::size_t r = 0; r < model.design_elements().size(); ++r) {
      const double radius = mesh.centroid(static_cast<std::size_t>(model.design_elements()[r])).norm();
      rho.row(static_cast<Eigen::Index>(r)) = tree.vertex_point(radius > 0.07 ? magnet : steel).transpose();
    }
    model.set_design(rho);
    const BothCases both = solve_both_cases(model);
    newton = std::max({newton, both.plus.newton_iterations, both.minus.newton_iterations});
  }
  const double secs = seconds_since(t0);
  const bool ok = std::abs(o1 - 2.0) <= 0.2 && std::abs(o2 - 2.0) <= 0.2 && newton <= 15 && secs < 60.0;
  return {ok, "annulus orders " + fmt("%.3f", o1) + ", " + fmt("%.3f", o2) + " (2 +/- 0.2), max Newton iterations " +
                  std::to_string(newton) + " (limit 15)"};
}

// 4 ---------------------------------------------------------------------------

Verdict adjoint_gate() {
  const auto t0 = std::chrono::steady_clock::now();
  const GradientCheck c = check_gradients(50, 1);
  const double secs = seconds_since(t0);
  return {c.linear_error <= 1e-4 && c.nonlinear_error <= 1e-3 && secs < 120.0,
          std::to_string(c.elements) + " elements, " + std::to_string(c.coordinates) + " coordinates, linear " +
              fmt("%.2e", c.linear_error) + " (limit 1e-4), nonlinear " + fmt("%.2e", c.nonlinear_error) + " (limit 1e-3)"};
}

// 5 ---------------------------------------------------------------------------

struct EndpointRun {
  double phi_plus, phi_minus, objective, magnets, seconds;
  int iterations;
};

EndpointRun endpoint(const SectorMesh& mesh, const InterpTree& tree, double gamma) {
  const auto t0 = std::chrono::steady_clock::now();
  StudyConfig study;
  OptimizerConfig cfg = study.optimizer;
  cfg.objective.gamma = gamma;
  const RunResult r = run(mesh, tree, cfg);
  FemModel model(mesh, tree);
  model.set_design(r.field.filtered);
  const Eigen::VectorXd shares = leaf_area_fractions(model);
  double magnets = 0.0;
  for (std::size_t l = 0; l < tree.leaf_count(); ++l)
    if (tree.leaf_material(l).name().rfind("pm", 0) == 0) magnets += shares[static_cast<Eigen::Index>(l)];
  return {r.phi_plus, r.phi_minus, r.objective, magnets, seconds_since(t0), r.iterations()};
}

Verdict single_excitation() {
  const StudyConfig study;
  const SectorMesh mesh = generate_sector_mesh(study.geometry, study.mesh_elements);
  const InterpTree tree = recursive_tree(default_catalogue(study.materials));
  const EndpointRun p = endpoint(mesh, tree, 1.0), z = endpoint(mesh, tree, 0.0), m = endpoint(mesh, tree, -1.0);
  const double same = std::abs(p.phi_plus - p.phi_minus) / std::abs(p.phi_plus);
  const double opposite = std::abs(z.phi_plus + z.phi_minus) / std::abs(z.phi_plus);
  const double mirror = std::abs(p.objective - m.objective) / std::abs(p.objective);
  const double slowest = std::max({p.seconds, z.seconds, m.seconds});
  const bool ok = p.magnets > 0.8 && same < 0.05 && z.magnets < 0.05 && opposite < 0.05 && mirror <= 0.02 &&
                  slowest <= 900.0;
  return {ok, std::to_string(mesh.element_count()) + " elements; gamma=1: magnets " + fmt("%.3f", p.magnets) +
                  ", |phi+ - phi-|/|phi+| " + fmt("%.1e", same) + ", " + std::to_string(p.iterations) +
                  " it; gamma=0: magnets " + fmt("%.1e", z.magnets) + ", |phi+ + phi-|/|phi+| " + fmt("%.1e", opposite) +
                  ", " + std::to_string(z.iterations) + " it; gamma=-1 objective mismatch " + fmt("%.1e", mirror) + ", " +
                  std::to_string(m.iterations) + " it"};
}

// 6 ---------------------------------------------------------------------------

Verdict sd0_values() {
  const double r = 100.0 * sd0(12.1e-3, 0.4e-3, 23.1e-3);
  const double d = 100.0 * sd0(-0.6e-3, -8.1e-3, 23.1e-3);
  const double h = 100.0 * sd0(-0.3e-3, -6.5e-3, 23.1e-3);
  const bool ok = std::abs(std::floor(r) - 50.0) <= 1.0 && std::abs(std::floor(d) - 32.0) <= 1.0 && h >= 26.0 && h < 28.0;
  return {ok, "recursive " + fmt("%.1f%%", r) + " (50), diamond " + fmt("%.1f%%", d) + " (32), hexadecagon " +
                  fmt("%.1f%%", h) + " (26-27)"};
}

// 7 ---------------------------------------------------------------------------

std::map<std::string, double> best_by_domain(const std::vector<ParetoRecord>& recs) {
  std::map<std::string, double> best;
  for (const auto& r : recs) {
    if (!std::isfinite(r.sd0)) continue;
    auto it = best.find(r.domain);
    if (it == best.end() || r.sd0 > it->second) best[r.domain] = r.sd0;
  }
  return best;
}

Verdict comparative_sweep() {
  StudyConfig config;
  config.output_dir = fs::current_path() / "acceptance_sweep";
  if (!std::getenv("MMTOPO_ACCEPTANCE_RESUME")) fs::remove_all(config.output_dir);
  const auto records = gamma_sweep(config);
  const auto best = best_by_domain(records);
  const double rec = best.count("recursive") ? best.at("recursive") : -1.0;
  const double hex = best.count("hexadecagon") ? best.at("hexadecagon") : -1.0;
  const double dia = best.count("diamond") ? best.at("diamond") : -1.0;

  std::string baseline_note = "no baseline";
  const fs::path baseline = MMTOPO_SWEEP_BASELINE;
  if (fs::exists(baseline)) {
    const auto pinned = best_by_domain(read_records_csv(baseline));
    double drift = 0.0;
    for (const auto& [name, value] : pinned) drift = std::max(drift, std::abs(value - (best.count(name) ? best.at(name) : 0.0)));
    baseline_note = "drift from pinned baseline " + fmt("%.1e", drift);
  }
  return {rec > hex && rec > dia, "best sd0 recursive " + fmt("%.4f", rec) + ", hexadecagon " + fmt("%.4f", hex) +
                                      ", diamond " + fmt("%.4f", dia) + "; " + baseline_note};
}

// 8 ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Verdict determinism() {
  StudyConfig config;
  config.optimizer.max_iterations = 40;
  config.write_vtk = false;
  const SectorMesh mesh = generate_sector_mesh(config.geometry, config.mesh_elements);
  const MaterialCatalogue cat = default_catalogue(config.materials);
  const InterpTree tree = recursive_tree(cat);
  std::vector<std::string> traces;
  for (int k = 0; k < 2; ++k) {
    config.output_dir = fs::current_path() / ("acceptance_determinism_" + std::to_string(k));
    fs::remove_all(config.output_dir);
    const ParetoRecord r = run_study_case(config, mesh, tree, cat, "recursive", 0.3);
    traces.push_back(slurp(config.output_dir / "runs" / (run_stem("recursive", 0.3) + "_trace.csv")));
    traces.push_back(slurp(config.output_dir / "runs" / (run_stem("recursive", 0.3) + "_design.csv")));
  }
  const bool ok = !traces[0].empty() && traces[0] == traces[2] && traces[1] == traces[3];
  return {ok, "two runs at gamma 0.3: trace CSV " + std::string(traces[0] == traces[2] ? "identical" : "differs") +
                  " (" + std::to_string(traces[0].size()) + " bytes), design " +
                  (traces[1] == traces[3] ? "identical" : "differs")};
}

}  // namespace

int main() {
  report(1, "interpolation core", interpolation_core);
  report(2, "recursion correctness", recursion);
  report(3, "FEM verification", fem_verification);
  report(4, "adjoint gate", adjoint_gate);
  report(5, "single-excitation behaviour", single_excitation);
  report(6, "sd0 reference values", sd0_values);
  report(7, "recursive domain reaches the highest sd0", comparative_sweep, false);
  report(8, "determinism", determinism);
  return g_failed ? 1 : 0;
}

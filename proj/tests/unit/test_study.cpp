#include "doctest.h"

#include "mmtopo/error.hpp"
#include "mmtopo/study.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace mmtopo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) out[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mmtopo_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mmtopo::Error");
  return Errc::IoFailure;
}

double rounded_percent(double x) { return std::floor(100.0 * x); }

}  // namespace

TEST_SUITE("study") {
  TEST_CASE("sd0 reference values") {
    CHECK(sd0(12.1, 0.4, 23.1) == doctest::Approx(11.7 / 23.1).epsilon(1e-12));
    CHECK(rounded_percent(sd0(12.1, 0.4, 23.1)) == 50.0);
    CHECK(rounded_percent(sd0(-0.6, -8.1, 23.1)) == 32.0);
    const double hexa = 100.0 * sd0(-0.3, -6.5, 23.1);
    CHECK(hexa >= 26.0);
    CHECK(hexa < 27.0);
  }

  TEST_CASE("sd0 properties") {
    const double m = 0.0143;
    for (double x : {-0.01, -0.003, 0.0, 0.002, 0.0143}) {
      CHECK(sd0(x, x, m) == 0.0);
      CHECK(sd0(x, -x, m) == 0.0);
      for (double y : {-0.012, 0.0, 0.005}) {
        CHECK(sd0(x, y, m) == sd0(y, x, m));
        CHECK(sd0(x, y, m) == sd0(-x, -y, m));
        CHECK(sd0(x, y, m) >= 0.0);
      }
    }
    CHECK(sd0(m, 0.0, m) == 1.0);
    CHECK(sd0(-m, 0.0, m) == 1.0);
    CHECK(sd0(0.0, m, m) == 1.0);
    CHECK(sd0(0.0, -m, m) == 1.0);
    CHECK(code_of([] { sd0(1.0, 0.0, 0.0); }) == Errc::InvalidNormalization);
    CHECK(code_of([] { sd0(1.0, 0.0, -2.0); }) == Errc::InvalidNormalization);
  }

  TEST_CASE("built-in domain trees") {
    const MaterialCatalogue cat = default_catalogue();
    const InterpTree h = named_domain_tree("hexadecagon", cat);
    const InterpTree d = named_domain_tree("diamond", cat);
    const InterpTree r = named_domain_tree("recursive", cat);
    CHECK(h.leaf_count() == 16);
    CHECK(h.design_dim() == 2);
    CHECK(d.leaf_count() == 16);
    CHECK(d.design_dim() == 3);
    CHECK(r.leaf_count() == 16);
    CHECK(r.design_dim() == 6);
    CHECK(code_of([&] { named_domain_tree("octagon", cat); }) == Errc::InvalidConfig);
    for (const InterpTree* t : {&h, &d, &r}) {
      for (std::size_t leaf = 0; leaf < t->leaf_count(); ++leaf) {
        const std::vector<int> dom = dominant_materials(*t, cat, t->vertex_point(leaf).transpose());
        CHECK(dom.front() == cat.index_of(t->leaf_material(leaf).name()));
      }
    }
  }

  TEST_CASE("gamma grid") {
    const auto g = gamma_values(-1.0, 1.0, 0.1);
    REQUIRE(g.size() == 21);
    CHECK(g.front() == -1.0);
    CHECK(g.back() == 1.0);
    CHECK(g[10] == 0.0);
    CHECK(g[13] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(gamma_values(0.5, -0.5, 0.1).empty());
    CHECK(gamma_values(0.2, 0.2, 0.1).size() == 1);
    CHECK_THROWS_AS(gamma_values(-1.0, 1.0, 0.0), Error);
    CHECK(run_stem("recursive", 0.1) == "recursive_g+0.100000");
    CHECK(run_stem("diamond", -1.0) == "diamond_g-1.000000");
  }

  TEST_CASE("config parsing") {
    const StudyConfig def = parse_config("{}");
    CHECK(def.mesh_elements == 2000);
    CHECK(def.domains.size() == 3);
    CHECK(def.optimizer.normalization == StepNormalization::PerElement);

    const StudyConfig c = parse_config(R"({
      "geometry": {"pole_angle_deg": 45},
      "mesh": {"target_elements": 321},
      "domains": ["diamond", {"name": "pair", "nodes": [
          {"label": [], "polytope": {"shape": "segment"}},
          {"label": [1], "material": "steel"},
          {"label": [2], "material": "pm0"}]}],
      "optimizer": {"step_normalization": "global", "filter_radius": 0.002, "objective_convention": "as_printed",
                    "init_seed": 5},
      "sweep": {"gamma_step": 0.5, "phi_max": 0.02},
      "output": {"directory": "elsewhere", "vtk": false}
    })");
    CHECK(c.geometry.pole_angle == doctest::Approx(std::numbers::pi / 4.0));
    CHECK(c.mesh_elements == 321);
    REQUIRE(c.domains.size() == 2);
    CHECK(c.domains[1].name == "pair");
    CHECK(c.optimizer.normalization == StepNormalization::Global);
    CHECK(*c.optimizer.filter_radius == 0.002);
    CHECK(c.optimizer.objective.convention == ObjectiveConvention::AsPrinted);
    CHECK(*c.optimizer.init_seed == 5);
    CHECK(*c.phi_max == 0.02);
    CHECK(c.output_dir == fs::path("elsewhere"));
    CHECK_FALSE(c.write_vtk);
    const InterpTree pair = build_domain_tree(c.domains[1], default_catalogue());
    CHECK(pair.leaf_count() == 2);
    CHECK(pair.design_dim() == 1);

    for (const char* bad : {"not json", R"({"mesh": {"elements": 3}})", R"({"colour": 1})",
                            R"({"optimizer": {"step_normalization": "sideways"}})",
                            R"({"domains": [{"name": "x", "nodes": [{"label": [], "material": "steel", "polytope": {"shape": "segment"}}]}]})",
                            R"({"mesh": {"target_elements": "many"}})"}) {
      CAPTURE(bad);
      CHECK(code_of([&] { parse_config(bad); }) == Errc::InvalidConfig);
    }
    CHECK(code_of([] { load_config("/nonexistent/cfg.json"); }) == Errc::IoFailure);
    CHECK(config_schema_help().find("step_normalization") != std::string::npos);
  }

  TEST_CASE("polytope literals") {
    CHECK(parse_polytope(R"({"shape": "segment", "v0": -1, "v1": 2})").dim() == 1);
    CHECK(parse_polytope(R"({"shape": "regular_polygon", "n": 7, "radius": 2})").vertex_count() == 7);
    CHECK(parse_polytope(R"({"shape": "diamond", "equator": 6, "apex": 1})").vertex_count() == 8);
    CHECK(parse_polytope(R"({"shape": "polygon", "vertices": [[0,0],[1,0],[0,1]]})").vertex_count() == 3);
    const Polytope cube = parse_polytope(
        R"({"shape": "polyhedron", "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0],[0,0,1],[1,0,1],[1,1,1],[0,1,1]]})");
    CHECK(cube.dim() == 3);
    CHECK(cube.vertex_count() == 8);
    CHECK(code_of([] { parse_polytope(R"({"shape": "blob"})"); }) == Errc::InvalidConfig);
    CHECK_THROWS_AS(parse_polytope(R"({"shape": "polygon", "vertices": [[0,0],[1,1],[1,0]]})"), Error);
  }

  TEST_CASE("records and designs round trip") {
    const fs::path dir = fresh_dir("csv");
    std::vector<ParetoRecord> recs(3);
    recs[0] = {-1.0, "diamond", -0.014310043214737887, 1.0 / 3.0, 0.0, 280, "stagnation", "", false, ""};
    recs[1] = {0.1, "recursive", 1e-300, -2.5e-17, 0.123456789012345678, 500, "max_iter", "", false, ""};
    recs[2] = {1.0, "hexadecagon", std::nan(""), std::nan(""), std::nan(""), 3, "solver_failure", "", false, ""};
    write_records_csv(dir / "r.csv", recs);
    const std::string text = slurp(dir / "r.csv");
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.rfind("gamma,domain,phi_plus,phi_minus,sd0,iterations,termination\n", 0) == 0);
    const auto back = read_records_csv(dir / "r.csv");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back[i].gamma == recs[i].gamma);
      CHECK(back[i].domain == recs[i].domain);
      CHECK(back[i].phi_plus == recs[i].phi_plus);
      CHECK(back[i].phi_minus == recs[i].phi_minus);
      CHECK(back[i].sd0 == recs[i].sd0);
      CHECK(back[i].iterations == recs[i].iterations);
      CHECK(back[i].termination == recs[i].termination);
    }
    CHECK(std::isnan(back[2].phi_plus));

    Eigen::MatrixXd m(3, 2);
    m << 0.1, 1.0 / 7.0, -2e-9, 5.0, 3.0, std::sqrt(2.0);
    write_design(dir / "d.csv", m);
    CHECK(read_design(dir / "d.csv") == m);
    CHECK(code_of([&] { read_design(dir / "missing.csv"); }) == Errc::IoFailure);
  }

  TEST_CASE("VTK export") {
    const fs::path dir = fresh_dir("vtk");
    SectorMesh mesh;
    mesh.nodes = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
    mesh.regions = {Region::Design, Region::Airgap};
    const MaterialCatalogue cat = default_catalogue();
    const InterpTree tree = named_domain_tree("recursive", cat);
    const int steel_leaf = tree.leaf_of("steel");
    const Eigen::MatrixXd design = tree.vertex_point(static_cast<std::size_t>(steel_leaf)).transpose();
    export_vtk(dir / "two.vtk", mesh, tree, cat, design);
    const std::string text = slurp(dir / "two.vtk");
    CHECK(text.rfind("# vtk DataFile Version", 0) == 0);
    CHECK(text.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
    CHECK(text.find("POINTS 4 double") != std::string::npos);
    CHECK(text.find("CELLS 2 8") != std::string::npos);
    CHECK(text.find("CELL_TYPES 2\n5\n5\n") != std::string::npos);
    CHECK(text.find("CELL_DATA 2") != std::string::npos);
    CHECK(text.find("POINT_DATA 4") != std::string::npos);
    const auto dom = text.find("SCALARS dominant_material int");
    REQUIRE(dom != std::string::npos);
    std::istringstream is(text.substr(dom));
    std::string line;
    std::getline(is, line);
    std::getline(is, line);  // LOOKUP_TABLE
    int first = -1, second = -1;
    is >> first >> second;
    CHECK(first == cat.index_of("steel"));
    CHECK(second == cat.index_of("air"));
    for (const auto& label : tree.internal_labels()) CHECK(text.find("SCALARS rho_" + label.key() + " double") != std::string::npos);
    CHECK_THROWS_AS(export_vtk(dir / "two.vtk" / "x.vtk", mesh, tree, cat, design), Error);
  }

  TEST_CASE("small sweep: outputs, endpoints and resume") {
    const fs::path dir = fresh_dir("sweep");
    StudyConfig c = parse_config(R"({
      "mesh": {"target_elements": 80},
      "domains": ["hexadecagon", "recursive"],
      "optimizer": {"max_iterations": 40},
      "sweep": {"gamma_min": -1, "gamma_max": 1, "gamma_step": 1}
    })");
    c.output_dir = dir;
    std::ostringstream log;
    const auto recs = gamma_sweep(c, &log);
    REQUIRE(recs.size() == 6);
    CHECK(recs[0].gamma == -1.0);
    CHECK(recs[0].domain == "hexadecagon");
    CHECK(recs[1].domain == "recursive");
    int best = 0;
    for (const auto& r : recs) {
      CAPTURE(r.domain);
      CAPTURE(r.gamma);
      CHECK(r.termination != "error");
      CHECK(std::isfinite(r.phi_plus));
      CHECK(fs::exists(dir / r.design_path));
      CHECK(fs::exists(dir / "runs" / (run_stem(r.domain, r.gamma) + "_trace.csv")));
      CHECK(r.sd0 >= 0.0);
      CHECK(r.sd0 <= 1.0 + 1e-12);
      // Single-excitation endpoints sit near a diagonal.
      if (r.gamma != 0.0) CHECK(r.sd0 <= 0.1);
      best += r.best ? 1 : 0;
    }
    CHECK(best == 2);
    CHECK(read_records_csv(dir / "summary.csv").size() == 6);
    CHECK(read_records_csv(dir / "best_sd0.csv").size() == 2);

    const auto before = snapshot(dir);
    const auto again = gamma_sweep(c);
    CHECK(snapshot(dir) == before);
    REQUIRE(again.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(again[i].phi_plus == recs[i].phi_plus);
      CHECK(again[i].sd0 == recs[i].sd0);
    }
  }
}

#include "mmtopo/study.hpp"

#include "mmtopo/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace mmtopo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(Errc::InvalidConfig, where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw Error(Errc::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

double number(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw Error(Errc::InvalidConfig, where + "." + key + " must be a number");
  return v.get<double>();
}

int integer(const json& obj, const char* key, int fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw Error(Errc::InvalidConfig, where + "." + key + " must be an integer");
  return v.get<int>();
}

bool boolean(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw Error(Errc::InvalidConfig, where + "." + key + " must be true or false");
  return v.get<bool>();
}

std::string text(const json& obj, const char* key, const std::string& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw Error(Errc::InvalidConfig, where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::vector<Eigen::VectorXd> point_list(const json& v, int dim, const std::string& where) {
  if (!v.is_array()) throw Error(Errc::InvalidConfig, where + " must be an array of points");
  std::vector<Eigen::VectorXd> out;
  for (const json& p : v) {
    if (!p.is_array() || static_cast<int>(p.size()) != dim)
      throw Error(Errc::InvalidConfig, where + " entries must have " + std::to_string(dim) + " coordinates");
    Eigen::VectorXd q(dim);
    for (int i = 0; i < dim; ++i) {
      if (!p[static_cast<std::size_t>(i)].is_number()) throw Error(Errc::InvalidConfig, where + " coordinates must be numbers");
      q[i] = p[static_cast<std::size_t>(i)].get<double>();
    }
    out.push_back(q);
  }
  return out;
}

Polytope polytope_from_json(const json& v, const std::string& where) {
  if (!v.is_object() || !v.contains("shape") || !v.at("shape").is_string())
    throw Error(Errc::InvalidConfig, where + " needs a \"shape\" string");
  const std::string shape = v.at("shape").get<std::string>();
  if (shape == "segment") {
    check_keys(v, {"shape", "v0", "v1"}, where);
    return Polytope::segment(number(v, "v0", 0.0, where), number(v, "v1", 1.0, where));
  }
  if (shape == "regular_polygon") {
    check_keys(v, {"shape", "n", "radius"}, where);
    if (!v.contains("n")) throw Error(Errc::InvalidConfig, where + " needs \"n\"");
    return Polytope::regular_polygon(integer(v, "n", 0, where), number(v, "radius", 1.0, where));
  }
  if (shape == "diamond") {
    check_keys(v, {"shape", "equator", "apex"}, where);
    if (!v.contains("equator")) throw Error(Errc::InvalidConfig, where + " needs \"equator\"");
    return Polytope::diamond(integer(v, "equator", 0, where), number(v, "apex", 1.0, where));
  }
  if (shape == "polygon") {
    check_keys(v, {"shape", "vertices"}, where);
    if (!v.contains("vertices")) throw Error(Errc::InvalidConfig, where + " needs \"vertices\"");
    return Polytope::make(2, point_list(v.at("vertices"), 2, where + ".vertices"));
  }
  if (shape == "polyhedron") {
    check_keys(v, {"shape", "vertices", "faces"}, where);
    if (!v.contains("vertices")) throw Error(Errc::InvalidConfig, where + " needs \"vertices\"");
    std::optional<std::vector<std::vector<int>>> faces;
    if (v.contains("faces")) {
      try {
        faces = v.at("faces").get<std::vector<std::vector<int>>>();
      } catch (const json::exception&) {
        throw Error(Errc::InvalidConfig, where + ".faces must be a list of index lists");
      }
    }
    return Polytope::make(3, point_list(v.at("vertices"), 3, where + ".vertices"), faces);
  }
  throw Error(Errc::InvalidConfig, where + ": unknown shape '" + shape + "'");
}

const std::regex& name_pattern() {
  static const std::regex re("[A-Za-z0-9_.+-]+");
  return re;
}

DomainEntry domain_from_json(const json& v, std::size_t index) {
  const std::string where = "domains[" + std::to_string(index) + "]";
  DomainEntry entry;
  if (v.is_string()) {
    entry.name = v.get<std::string>();
    const auto& names = builtin_domain_names();
    if (std::find(names.begin(), names.end(), entry.name) == names.end())
      throw Error(Errc::InvalidConfig, where + ": unknown built-in domain '" + entry.name + "'");
    return entry;
  }
  check_keys(v, {"name", "nodes"}, where);
  entry.name = text(v, "name", "", where);
  if (!v.contains("nodes") || !v.at("nodes").is_array() || v.at("nodes").empty())
    throw Error(Errc::InvalidConfig, where + " needs a non-empty \"nodes\" array");
  std::size_t k = 0;
  for (const json& n : v.at("nodes")) {
    const std::string nw = where + ".nodes[" + std::to_string(k++) + "]";
    check_keys(n, {"label", "polytope", "material"}, nw);
    CustomNode node;
    try {
      node.label = NeveuLabel(n.at("label").get<std::vector<int>>());
    } catch (const json::exception&) {
      throw Error(Errc::InvalidConfig, nw + " needs \"label\": a list of positive integers");
    }
    if (n.contains("polytope") == n.contains("material"))
      throw Error(Errc::InvalidConfig, nw + " needs exactly one of \"polytope\" and \"material\"");
    if (n.contains("polytope")) node.domain = polytope_from_json(n.at("polytope"), nw + ".polytope");
    else node.material = text(n, "material", "", nw);
    entry.nodes.push_back(std::move(node));
  }
  return entry;
}

ObjectiveConvention convention_from(const std::string& s) {
  if (s == "matched") return ObjectiveConvention::MatchedResults;
  if (s == "as_printed") return ObjectiveConvention::AsPrinted;
  throw Error(Errc::InvalidConfig, "optimizer.objective_convention must be \"matched\" or \"as_printed\"");
}

StepNormalization normalization_from(const std::string& s) {
  if (s == "element") return StepNormalization::PerElement;
  if (s == "global") return StepNormalization::Global;
  throw Error(Errc::InvalidConfig, "optimizer.step_normalization must be \"element\" or \"global\"");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

json record_to_json(const ParetoRecord& r) {
  return json{{"gamma", r.gamma},           {"domain", r.domain},
              {"phi_plus", r.phi_plus},     {"phi_minus", r.phi_minus},
              {"iterations", r.iterations}, {"termination", r.termination},
              {"design_path", r.design_path}, {"message", r.message}};
}

ParetoRecord record_from_json(const json& j) {
  ParetoRecord r;
  r.gamma = j.at("gamma").get<double>();
  r.domain = j.at("domain").get<std::string>();
  // NaN fluxes of failed runs are stored as null.
  r.phi_plus = j.at("phi_plus").is_null() ? std::nan("") : j.at("phi_plus").get<double>();
  r.phi_minus = j.at("phi_minus").is_null() ? std::nan("") : j.at("phi_minus").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.termination = j.at("termination").get<std::string>();
  r.design_path = j.at("design_path").get<std::string>();
  r.message = j.value("message", "");
  return r;
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error(Errc::IoFailure, "cannot write " + tmp.string());
    os << content;
    if (!os) throw Error(Errc::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

unsigned worker_cap() {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MMTOPO_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) cap = static_cast<unsigned>(v);
  }
  return cap;
}

std::vector<double> leaf_catalogue_indices(const InterpTree& tree, const MaterialCatalogue& catalogue) {
  std::vector<double> out;
  for (std::size_t l = 0; l < tree.leaf_count(); ++l) {
    const int idx = catalogue.index_of(tree.leaf_material(l).name());
    out.push_back(idx >= 0 ? idx : static_cast<double>(l));
  }
  return out;
}

}  // namespace

StudyConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, {"geometry", "mesh", "materials", "domains", "optimizer", "sweep", "output"}, "config");
  StudyConfig c;
  const json empty = json::object();

  const json& g = root.contains("geometry") ? root.at("geometry") : empty;
  check_keys(g, {"r_shaft", "r_rotor", "r_outer", "pole_angle_deg", "center_angle_deg"}, "geometry");
  c.geometry.r_shaft = number(g, "r_shaft", c.geometry.r_shaft, "geometry");
  c.geometry.r_rotor = number(g, "r_rotor", c.geometry.r_rotor, "geometry");
  c.geometry.r_outer = number(g, "r_outer", c.geometry.r_outer, "geometry");
  c.geometry.pole_angle = number(g, "pole_angle_deg", 30.0, "geometry") * std::numbers::pi / 180.0;
  c.geometry.center_angle = number(g, "center_angle_deg", 0.0, "geometry") * std::numbers::pi / 180.0;

  const json& m = root.contains("mesh") ? root.at("mesh") : empty;
  check_keys(m, {"target_elements"}, "mesh");
  c.mesh_elements = integer(m, "target_elements", c.mesh_elements, "mesh");

  const json& mat = root.contains("materials") ? root.at("materials") : empty;
  check_keys(mat, {"remanence", "pm_orientations", "current_density", "steel_saturation", "steel_initial_slope"},
             "materials");
  c.materials.remanence = number(mat, "remanence", c.materials.remanence, "materials");
  c.materials.pm_orientations = integer(mat, "pm_orientations", c.materials.pm_orientations, "materials");
  c.materials.current_density = number(mat, "current_density", c.materials.current_density, "materials");
  c.materials.steel_saturation = number(mat, "steel_saturation", c.materials.steel_saturation, "materials");
  c.materials.steel_initial_slope = number(mat, "steel_initial_slope", c.materials.steel_initial_slope, "materials");

  if (root.contains("domains")) {
    const json& d = root.at("domains");
    if (!d.is_array()) throw Error(Errc::InvalidConfig, "domains must be an array");
    c.domains.clear();
    std::set<std::string> seen;
    for (std::size_t i = 0; i < d.size(); ++i) {
      DomainEntry e = domain_from_json(d[i], i);
      if (!std::regex_match(e.name, name_pattern()))
        throw Error(Errc::InvalidConfig, "domain name '" + e.name + "' must use letters, digits, '_', '.', '+' or '-'");
      if (!seen.insert(e.name).second) throw Error(Errc::InvalidConfig, "domain '" + e.name + "' listed twice");
      c.domains.push_back(std::move(e));
    }
  }

  const json& o = root.contains("optimizer") ? root.at("optimizer") : empty;
  check_keys(o,
             {"max_iterations", "stagnation_tol", "move_limit", "step_normalization", "filter_radius",
              "objective_convention", "newton_tolerance", "newton_max_iterations", "init_seed", "checkpoint_every"},
             "optimizer");
  OptimizerConfig& oc = c.optimizer;
  oc.max_iterations = integer(o, "max_iterations", oc.max_iterations, "optimizer");
  oc.stagnation_tol = number(o, "stagnation_tol", oc.stagnation_tol, "optimizer");
  oc.move_limit = number(o, "move_limit", oc.move_limit, "optimizer");
  oc.normalization = normalization_from(text(o, "step_normalization", "element", "optimizer"));
  if (o.contains("filter_radius") && !o.at("filter_radius").is_null())
    oc.filter_radius = number(o, "filter_radius", 0.0, "optimizer");
  oc.objective.convention = convention_from(text(o, "objective_convention", "matched", "optimizer"));
  oc.newton.tolerance = number(o, "newton_tolerance", oc.newton.tolerance, "optimizer");
  oc.newton.max_iterations = integer(o, "newton_max_iterations", oc.newton.max_iterations, "optimizer");
  if (o.contains("init_seed") && !o.at("init_seed").is_null()) {
    if (!o.at("init_seed").is_number_unsigned()) throw Error(Errc::InvalidConfig, "optimizer.init_seed must be a non-negative integer");
    oc.init_seed = o.at("init_seed").get<std::uint64_t>();
  }
  oc.checkpoint_every = integer(o, "checkpoint_every", oc.checkpoint_every, "optimizer");

  const json& s = root.contains("sweep") ? root.at("sweep") : empty;
  check_keys(s, {"gamma_min", "gamma_max", "gamma_step", "phi_max"}, "sweep");
  c.gamma_min = number(s, "gamma_min", c.gamma_min, "sweep");
  c.gamma_max = number(s, "gamma_max", c.gamma_max, "sweep");
  c.gamma_step = number(s, "gamma_step", c.gamma_step, "sweep");
  if (s.contains("phi_max") && !s.at("phi_max").is_null()) c.phi_max = number(s, "phi_max", 0.0, "sweep");

  const json& out = root.contains("output") ? root.at("output") : empty;
  check_keys(out, {"directory", "vtk", "trace"}, "output");
  c.output_dir = text(out, "directory", c.output_dir.string(), "output");
  c.write_vtk = boolean(out, "vtk", c.write_vtk, "output");
  c.write_trace = boolean(out, "trace", c.write_trace, "output");

  if (!(c.gamma_step > 0.0)) throw Error(Errc::InvalidConfig, "sweep.gamma_step must be positive");
  if (!(c.gamma_min >= -1.0) || !(c.gamma_max <= 1.0))
    throw Error(Errc::InvalidConfig, "sweep gamma range must lie in [-1, 1]");
  if (c.phi_max && !(*c.phi_max > 0.0)) throw Error(Errc::InvalidConfig, "sweep.phi_max must be positive");
  if (!(oc.move_limit > 0.0) || !(oc.stagnation_tol > 0.0) || oc.max_iterations < 0)
    throw Error(Errc::InvalidConfig, "optimizer needs move_limit > 0, stagnation_tol > 0, max_iterations >= 0");
  if (oc.filter_radius && !(*oc.filter_radius >= 0.0))
    throw Error(Errc::InvalidConfig, "optimizer.filter_radius must be non-negative");
  if (!(oc.newton.tolerance > 0.0) || oc.newton.max_iterations < 1)
    throw Error(Errc::InvalidConfig, "optimizer Newton settings must be positive");
  return c;
}

StudyConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::IoFailure, "cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string config_schema_help() {
  return R"(Config file: a JSON object; every section and key is optional.
  geometry   r_shaft, r_rotor, r_outer (m), pole_angle_deg (30), center_angle_deg (0)
  mesh       target_elements (2000)
  materials  remanence (1 T), pm_orientations (12), current_density (1e7 A/m^2),
             steel_saturation (1.9 T), steel_initial_slope (0.999)
  domains    list of "hexadecagon" | "diamond" | "recursive" or
             {"name": ..., "nodes": [{"label": [..], "polytope": {...}} | {"label": [..], "material": "pm0"}]}
             polytope: {"shape": "segment", "v0", "v1"} | {"shape": "regular_polygon", "n", "radius"} |
                       {"shape": "diamond", "equator", "apex"} | {"shape": "polygon", "vertices": [[x,y],..]} |
                       {"shape": "polyhedron", "vertices": [[x,y,z],..], "faces"?}
  optimizer  max_iterations (500), stagnation_tol (1e-4), move_limit (0.05),
             step_normalization ("element" | "global"), filter_radius (m, null = 2x mean edge),
             objective_convention ("matched" | "as_printed"), newton_tolerance (1e-8),
             newton_max_iterations (50), init_seed (null = centroids), checkpoint_every (0 = off)
  sweep      gamma_min (-1), gamma_max (1), gamma_step (0.1), phi_max (null = largest |phi| observed)
  output     directory ("mmtopo_out"), vtk (true), trace (true)
)";
}

Polytope parse_polytope(const std::string& json_text) {
  json v;
  try {
    v = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("polytope literal is not valid JSON: ") + e.what());
  }
  return polytope_from_json(v, "polytope");
}

InterpTree build_domain_tree(const DomainEntry& entry, const MaterialCatalogue& catalogue) {
  if (entry.nodes.empty()) return named_domain_tree(entry.name, catalogue);
  std::vector<InterpTree::NodeSpec> spec;
  for (const CustomNode& n : entry.nodes) {
    InterpTree::NodeSpec s{n.label, n.domain, std::nullopt};
    if (n.material) s.material = catalogue.at(*n.material);
    spec.push_back(std::move(s));
  }
  return InterpTree::build(std::move(spec));
}

double sd0(double phi_plus, double phi_minus, double phi_max) {
  if (!(phi_max > 0.0)) throw Error(Errc::InvalidNormalization, "phi_max must be positive");
  return std::min(std::abs(phi_plus - phi_minus), std::abs(phi_plus + phi_minus)) / phi_max;
}

std::vector<double> gamma_values(double gamma_min, double gamma_max, double gamma_step) {
  if (!(gamma_step > 0.0)) throw Error(Errc::InvalidParameters, "gamma step must be positive");
  std::vector<double> out;
  if (gamma_min > gamma_max) return out;
  const auto count = static_cast<long>(std::floor((gamma_max - gamma_min) / gamma_step + 1e-9));
  for (long k = 0; k <= count; ++k) {
    // Snap to 1e-12 so accumulated rounding never yields -0.0 or 0.30000000000000004.
    const double v = std::round((gamma_min + static_cast<double>(k) * gamma_step) * 1e12) / 1e12;
    out.push_back(std::min(v, gamma_max) + 0.0);
  }
  return out;
}

std::string run_stem(const std::string& domain, double gamma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.6f", gamma == 0.0 ? 0.0 : gamma);
  return domain + "_g" + buf;
}

ParetoRecord run_study_case(const StudyConfig& config, const SectorMesh& mesh, const InterpTree& tree,
                            const MaterialCatalogue& catalogue, const std::string& domain, double gamma) {
  OptimizerConfig opt = config.optimizer;
  opt.objective.gamma = gamma;
  const fs::path dir = config.output_dir / "runs";
  make_dirs(dir);
  const std::string stem = run_stem(domain, gamma);

  std::ofstream trace;
  RunHooks hooks;
  if (config.write_trace) {
    trace.open(dir / (stem + "_trace.csv"), std::ios::binary);
    if (!trace) throw Error(Errc::IoFailure, "cannot write trace for " + stem);
    hooks.trace_csv = &trace;
  }
  if (config.write_vtk && opt.checkpoint_every > 0) {
    hooks.checkpoint = [&](int it, const DesignField& field, const FemModel&, const BothCases& states) {
      char name[32];
      std::snprintf(name, sizeof name, "_it%05d.vtk", it);
      export_vtk(dir / (stem + name), mesh, tree, catalogue, field.filtered, &states.plus);
    };
  }
  const RunResult result = run(mesh, tree, opt, hooks);
  trace.close();

  ParetoRecord rec;
  rec.gamma = gamma;
  rec.domain = domain;
  rec.iterations = result.iterations();
  rec.termination = to_string(result.termination);
  rec.message = result.message;
  const bool solved = result.state_plus.a.size() > 0;
  rec.phi_plus = solved ? result.phi_plus : std::nan("");
  rec.phi_minus = solved ? result.phi_minus : std::nan("");

  write_design(dir / (stem + "_design.csv"), result.field.filtered);
  rec.design_path = (fs::path("runs") / (stem + "_design.csv")).string();
  if (config.write_vtk) {
    export_vtk(dir / (stem + ".vtk"), mesh, tree, catalogue, result.field.filtered,
               solved ? &result.state_plus : nullptr);
    rec.design_path = (fs::path("runs") / (stem + ".vtk")).string();
  }
  write_text_atomic(dir / (stem + ".json"), record_to_json(rec).dump(2) + "\n");
  return rec;
}

std::vector<ParetoRecord> gamma_sweep(const StudyConfig& config, std::ostream* log) {
  const std::vector<double> gammas = gamma_values(config.gamma_min, config.gamma_max, config.gamma_step);
  std::vector<ParetoRecord> records;
  make_dirs(config.output_dir);
  if (!gammas.empty() && !config.domains.empty()) {
    const SectorMesh mesh = generate_sector_mesh(config.geometry, config.mesh_elements);
    const MaterialCatalogue catalogue = default_catalogue(config.materials);
    std::vector<InterpTree> trees;
    for (const auto& d : config.domains) trees.push_back(build_domain_tree(d, catalogue));

    const std::size_t jobs = gammas.size() * config.domains.size();
    records.resize(jobs);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
      for (std::size_t j = next++; j < jobs; j = next++) {
        const double gamma = gammas[j / config.domains.size()];
        const std::size_t d = j % config.domains.size();
        const std::string& name = config.domains[d].name;
        const fs::path done = config.output_dir / "runs" / (run_stem(name, gamma) + ".json");
        ParetoRecord rec;
        bool resumed = false;
        try {
          if (fs::exists(done)) {
            std::ifstream is(done);
            rec = record_from_json(json::parse(is));
            resumed = true;
          } else {
            rec = run_study_case(config, mesh, trees[d], catalogue, name, gamma);
          }
        } catch (const std::exception& e) {
          rec = ParetoRecord{};
          rec.gamma = gamma;
          rec.domain = name;
          rec.phi_plus = rec.phi_minus = std::nan("");
          rec.termination = "error";
          rec.message = e.what();
        }
        if (log) {
          std::lock_guard lock(log_mutex);
          *log << (resumed ? "resumed " : "finished ") << run_stem(name, gamma) << " " << rec.termination
               << " iterations=" << rec.iterations << " phi+=" << rec.phi_plus << " phi-=" << rec.phi_minus
               << (rec.message.empty() ? "" : " (" + rec.message + ")") << "\n";
        }
        records[j] = std::move(rec);
      }
    };
    const auto threads = std::min<std::size_t>(worker_cap(), jobs);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    double phi_max = 0.0;
    if (config.phi_max) {
      phi_max = *config.phi_max;
    } else {
      for (const auto& r : records) {
        if (std::isfinite(r.phi_plus)) phi_max = std::max(phi_max, std::abs(r.phi_plus));
        if (std::isfinite(r.phi_minus)) phi_max = std::max(phi_max, std::abs(r.phi_minus));
      }
    }
    for (auto& r : records) {
      const bool usable = phi_max > 0.0 && std::isfinite(r.phi_plus) && std::isfinite(r.phi_minus);
      r.sd0 = usable ? sd0(r.phi_plus, r.phi_minus, phi_max) : std::nan("");
    }
    for (const auto& d : config.domains) {
      ParetoRecord* best = nullptr;
      for (auto& r : records)
        if (r.domain == d.name && std::isfinite(r.sd0) && (!best || r.sd0 > best->sd0)) best = &r;
      if (best) best->best = true;
    }
  }
  write_records_csv(config.output_dir / "summary.csv", records);
  std::vector<ParetoRecord> best;
  for (const auto& r : records)
    if (r.best) best.push_back(r);
  write_records_csv(config.output_dir / "best_sd0.csv", best);
  return records;
}

void write_records_csv(const fs::path& path, const std::vector<ParetoRecord>& records) {
  std::ostringstream os;
  os << "gamma,domain,phi_plus,phi_minus,sd0,iterations,termination\n";
  for (const auto& r : records) {
    os << format_double(r.gamma) << ',' << r.domain << ',' << format_double(r.phi_plus) << ','
       << format_double(r.phi_minus) << ',' << format_double(r.sd0) << ',' << r.iterations << ',' << r.termination
       << '\n';
  }
  write_text_atomic(path, os.str());
}

std::vector<ParetoRecord> read_records_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::IoFailure, "cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "gamma,domain,phi_plus,phi_minus,sd0,iterations,termination")
    throw Error(Errc::IoFailure, path.string() + " lacks the summary header");
  std::vector<ParetoRecord> out;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw Error(Errc::IoFailure, path.string() + ":" + std::to_string(line_no) + ": expected 7 fields");
    ParetoRecord r;
    try {
      r.gamma = std::stod(f[0]);
      r.domain = f[1];
      r.phi_plus = std::stod(f[2]);
      r.phi_minus = std::stod(f[3]);
      r.sd0 = std::stod(f[4]);
      r.iterations = std::stoi(f[5]);
    } catch (const std::exception&) {
      throw Error(Errc::IoFailure, path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    r.termination = f[6];
    out.push_back(std::move(r));
  }
  return out;
}

void write_design(const fs::path& path, const Eigen::MatrixXd& design) {
  std::ostringstream os;
  os << design.rows() << ' ' << design.cols() << '\n';
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    for (Eigen::Index c = 0; c < design.cols(); ++c) os << (c ? " " : "") << format_double(design(r, c));
    os << '\n';
  }
  write_text_atomic(path, os.str());
}

Eigen::MatrixXd read_design(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::IoFailure, "cannot read " + path.string());
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) throw Error(Errc::IoFailure, path.string() + ": bad design header");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(is >> m(r, c))) throw Error(Errc::IoFailure, path.string() + ": truncated design");
  return m;
}

std::vector<int> dominant_materials(const InterpTree& tree, const MaterialCatalogue& catalogue,
                                    const Eigen::MatrixXd& design) {
  const std::vector<double> index = leaf_catalogue_indices(tree, catalogue);
  std::vector<int> out;
  Eigen::VectorXd row;
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    row = design.row(r).transpose();
    const Eigen::VectorXd w = tree.leaf_weights(tree.coefficients({row.data(), static_cast<std::size_t>(row.size())}));
    Eigen::Index leaf = 0;
    w.maxCoeff(&leaf);
    out.push_back(static_cast<int>(index[static_cast<std::size_t>(leaf)]));
  }
  return out;
}

void export_vtk(const fs::path& path, const SectorMesh& mesh, const InterpTree& tree,
                const MaterialCatalogue& catalogue, const Eigen::MatrixXd& design, const FemState* state) {
  const std::vector<int> rows_of = [&] {
    std::vector<int> v(mesh.element_count(), -1);
    const auto design_elements = mesh.design_elements();
    for (std::size_t r = 0; r < design_elements.size(); ++r) v[static_cast<std::size_t>(design_elements[r])] = static_cast<int>(r);
    return v;
  }();
  if (static_cast<std::size_t>(design.rows()) != mesh.design_elements().size() ||
      static_cast<std::size_t>(design.cols()) != tree.design_dim())
    throw Error(Errc::InvalidParameters, "design does not match the mesh and tree");
  if (state && (static_cast<std::size_t>(state->a.size()) != mesh.nodes.size() || state->b.size() != mesh.element_count()))
    throw Error(Errc::InvalidParameters, "state does not match the mesh");

  const std::size_t n_el = mesh.element_count();
  const std::vector<double> leaf_index = leaf_catalogue_indices(tree, catalogue);
  const int air_index = catalogue.index_of("air");
  const std::array<double, 3> air_color =
      air_index >= 0 ? catalogue.colors[static_cast<std::size_t>(air_index)] : std::array<double, 3>{1.0, 1.0, 1.0};

  std::vector<int> dominant(n_el, air_index);
  std::vector<double> jp(n_el, 0.0), jz(n_el, 0.0);
  std::vector<std::array<double, 3>> color(n_el, air_color);
  Eigen::VectorXd row;
  for (std::size_t e = 0; e < n_el; ++e) {
    const int r = rows_of[e];
    if (r < 0) continue;
    row = design.row(r).transpose();
    const auto c = tree.coefficients({row.data(), static_cast<std::size_t>(row.size())});
    const Eigen::Vector2d b = state ? state->b[e] : Eigen::Vector2d::Zero();
    const PropertyValue p = tree.eval(c, b);
    jp[e] = p.polarization.norm();
    jz[e] = p.current_density;
    const Eigen::VectorXd w = tree.leaf_weights(c);
    Eigen::Index leaf = 0;
    w.maxCoeff(&leaf);
    dominant[e] = static_cast<int>(leaf_index[static_cast<std::size_t>(leaf)]);
    std::array<double, 3> mix{0.0, 0.0, 0.0};
    for (std::size_t l = 0; l < tree.leaf_count(); ++l) {
      const int idx = catalogue.index_of(tree.leaf_material(l).name());
      const std::array<double, 3> lc =
          idx >= 0 ? catalogue.colors[static_cast<std::size_t>(idx)] : std::array<double, 3>{0.5, 0.5, 0.5};
      for (int k = 0; k < 3; ++k) mix[static_cast<std::size_t>(k)] += w[static_cast<Eigen::Index>(l)] * lc[static_cast<std::size_t>(k)];
    }
    for (auto& v : mix) v = std::clamp(v, 0.0, 1.0);
    color[e] = mix;
  }

  std::ostringstream os;
  os << "# vtk DataFile Version 3.0\nmmtopo design\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.nodes.size() << " double\n";
  for (const auto& p : mesh.nodes) os << format_double(p.x()) << ' ' << format_double(p.y()) << " 0\n";
  os << "CELLS " << n_el << ' ' << 4 * n_el << '\n';
  for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << n_el << '\n';
  for (std::size_t e = 0; e < n_el; ++e) os << "5\n";

  os << "CELL_DATA " << n_el << '\n';
  for (const auto& label : tree.internal_labels()) {
    const int dim = tree.domain(label).dim();
    const auto off = static_cast<Eigen::Index>(tree.offset(label));
    os << "SCALARS rho_" << label.key() << " double " << dim << "\nLOOKUP_TABLE default\n";
    for (std::size_t e = 0; e < n_el; ++e) {
      for (int k = 0; k < dim; ++k) {
        const double v = rows_of[e] < 0 ? 0.0 : design(rows_of[e], off + k);
        os << (k ? " " : "") << format_double(v);
      }
      os << '\n';
    }
  }
  os << "SCALARS dominant_material int 1\nLOOKUP_TABLE default\n";
  for (int d : dominant) os << d << '\n';
  os << "SCALARS polarization_magnitude double 1\nLOOKUP_TABLE default\n";
  for (double v : jp) os << format_double(v) << '\n';
  os << "SCALARS current_density double 1\nLOOKUP_TABLE default\n";
  for (double v : jz) os << format_double(v) << '\n';
  os << "COLOR_SCALARS material_color 3\n";
  for (const auto& c : color) os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';

  os << "POINT_DATA " << mesh.nodes.size() << '\n';
  os << "SCALARS a double 1\nLOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
    os << format_double(state ? state->a[static_cast<Eigen::Index>(i)] : 0.0) << '\n';

  if (!path.parent_path().empty()) make_dirs(path.parent_path());
  write_text_atomic(path, os.str());
}

GradientCheck check_gradients(int target_elements, std::uint64_t seed, double gamma, const std::string& domain) {
  const SectorMesh mesh = generate_sector_mesh(SectorGeometry{}, target_elements);
  GradientCheck out;
  out.elements = static_cast<int>(mesh.element_count());
  const NewtonOptions tight{1e-12, 100};
  const ObjectiveSpec spec{gamma};
  const double h = 1e-6;

  for (const bool linear : {true, false}) {
    MaterialCatalogue catalogue = default_catalogue();
    if (linear) {
      const int s = catalogue.index_of("steel");
      catalogue.entries[static_cast<std::size_t>(s)] =
          MaterialModel("steel", LinearLaw{CatalogueParameters{}.steel_initial_slope}, 0.0);
    }
    const InterpTree tree = named_domain_tree(domain, catalogue);
    FemModel model(mesh, tree);
    const auto rows = static_cast<Eigen::Index>(model.design_elements().size());
    const auto cols = static_cast<Eigen::Index>(tree.design_dim());
    Eigen::MatrixXd rho(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) rho.row(r) = tree.random_point(seed * 1000003u + static_cast<std::uint64_t>(r)).transpose();
    model.set_design(rho);
    const BothCases base = solve_both_cases(model, tight);
    const Eigen::MatrixXd adjoint = design_gradient(model, base.plus, base.minus, spec);

    Eigen::MatrixXd fd(rows, cols);
    auto value = [&](const Eigen::MatrixXd& design) {
      model.set_design(design);
      const BothCases s = solve_both_cases(model, tight, base.plus.free, base.minus.free);
      return objective(s.phi_plus, s.phi_minus, spec);
    };
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::MatrixXd up = rho, down = rho;
        up(r, c) += h;
        down(r, c) -= h;
        fd(r, c) = (value(up) - value(down)) / (2.0 * h);
      }
    }
    const double scale = fd.cwiseAbs().maxCoeff();
    const double err = (adjoint - fd).cwiseAbs().maxCoeff() / (scale > 0.0 ? scale : 1.0);
    (linear ? out.linear_error : out.nonlinear_error) = err;
    out.coordinates = static_cast<int>(rows * cols);
  }
  return out;
}

}  // namespace mmtopo

#include "mmtopo/domains.hpp"

#include "mmtopo/error.hpp"

namespace mmtopo {

namespace {

std::vector<int> pm_indices(const MaterialCatalogue& catalogue) {
  std::vector<int> out;
  for (std::size_t i = 0; i < catalogue.size(); ++i)
    if (catalogue.entries[i].name().rfind("pm", 0) == 0) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace

InterpTree hexadecagon_tree(const MaterialCatalogue& catalogue) {
  std::vector<InterpTree::NodeSpec> spec;
  spec.push_back({NeveuLabel{}, Polytope::regular_polygon(static_cast<int>(catalogue.size())), std::nullopt});
  for (std::size_t i = 0; i < catalogue.size(); ++i)
    spec.push_back({NeveuLabel{static_cast<int>(i) + 1}, std::nullopt, catalogue.entries[i]});
  return InterpTree::build(std::move(spec));
}

InterpTree diamond_tree(const MaterialCatalogue& catalogue) {
  std::vector<int> equator = pm_indices(catalogue);
  equator.push_back(catalogue.index_of("cond+"));
  equator.push_back(catalogue.index_of("cond-"));
  const int steel = catalogue.index_of("steel");
  const int air = catalogue.index_of("air");
  if (steel < 0 || air < 0 || equator.back() < 0) throw Error(Errc::InvalidConfig, "catalogue lacks a required entry");

  std::vector<InterpTree::NodeSpec> spec;
  spec.push_back({NeveuLabel{}, Polytope::diamond(static_cast<int>(equator.size())), std::nullopt});
  int slot = 1;
  for (int i : equator) spec.push_back({NeveuLabel{slot++}, std::nullopt, catalogue.entries[static_cast<std::size_t>(i)]});
  spec.push_back({NeveuLabel{slot++}, std::nullopt, catalogue.entries[static_cast<std::size_t>(steel)]});
  spec.push_back({NeveuLabel{slot++}, std::nullopt, catalogue.entries[static_cast<std::size_t>(air)]});
  return InterpTree::build(std::move(spec));
}

InterpTree recursive_tree(const MaterialCatalogue& catalogue) {
  const std::vector<int> pms = pm_indices(catalogue);
  std::vector<InterpTree::NodeSpec> spec;
  spec.push_back({NeveuLabel{}, Polytope::regular_polygon(3), std::nullopt});
  spec.push_back({NeveuLabel{1}, std::nullopt, catalogue.at("air")});
  spec.push_back({NeveuLabel{2}, std::nullopt, catalogue.at("steel")});
  spec.push_back({NeveuLabel{3}, Polytope::segment(0.0, 1.0), std::nullopt});
  spec.push_back({NeveuLabel{3, 1}, Polytope::regular_polygon(static_cast<int>(pms.size())), std::nullopt});
  for (std::size_t k = 0; k < pms.size(); ++k)
    spec.push_back({NeveuLabel{3, 1, static_cast<int>(k) + 1}, std::nullopt, catalogue.entries[static_cast<std::size_t>(pms[k])]});
  spec.push_back({NeveuLabel{3, 2}, Polytope::segment(0.0, 1.0), std::nullopt});
  spec.push_back({NeveuLabel{3, 2, 1}, std::nullopt, catalogue.at("cond+")});
  spec.push_back({NeveuLabel{3, 2, 2}, std::nullopt, catalogue.at("cond-")});
  return InterpTree::build(std::move(spec));
}

const std::vector<std::string>& builtin_domain_names() {
  static const std::vector<std::string> names{"hexadecagon", "diamond", "recursive"};
  return names;
}

InterpTree named_domain_tree(const std::string& name, const MaterialCatalogue& catalogue) {
  if (name == "hexadecagon") return hexadecagon_tree(catalogue);
  if (name == "diamond") return diamond_tree(catalogue);
  if (name == "recursive") return recursive_tree(catalogue);
  throw Error(Errc::InvalidConfig, "unknown domain '" + name + "'");
}

}  // namespace mmtopo

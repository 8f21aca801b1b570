#pragma once

#include "mmtopo/interp_tree.hpp"
#include "mmtopo/materials.hpp"

#include <string>
#include <vector>

namespace mmtopo {

/// Depth-1 tree on a regular 16-gon, one catalogue entry per vertex in catalogue order.
InterpTree hexadecagon_tree(const MaterialCatalogue& catalogue);

/// Depth-1 tree on a diamond: magnets and conductors on the equator, steel on the top apex, air on the bottom one.
InterpTree diamond_tree(const MaterialCatalogue& catalogue);

/**
 * Six-dimensional recursive tree:
 *   root triangle {air, steel, excitation}
 *     excitation segment {magnets, conductors}
 *       magnets regular polygon, one orientation per vertex
 *       conductors segment {cond+, cond-}
 */
InterpTree recursive_tree(const MaterialCatalogue& catalogue);

/// "hexadecagon", "diamond" or "recursive"; throws InvalidConfig otherwise.
InterpTree named_domain_tree(const std::string& name, const MaterialCatalogue& catalogue);

const std::vector<std::string>& builtin_domain_names();

}  // namespace mmtopo

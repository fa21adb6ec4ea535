#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retroroute/route.hpp"

namespace retroroute {

/// Converts a recursive {smiles, children?} object. PaRoutes-style reaction
/// nodes ({"type": "reaction", "children": [...]}) sitting between molecules
/// are flattened; all other keys are ignored.
RouteNode route_from_json(const nlohmann::json& j);

nlohmann::json route_to_json(const RouteNode& root);

/// Reads a top-level JSON array of routes. Throws ParseError naming the
/// index of the first bad route.
std::vector<RouteNode> load_routes(const std::string& path);

void save_routes(const std::string& path, const std::vector<RouteNode>& routes);

}  // namespace retroroute

#include "retroroute/route_json.hpp"

#include <fstream>

#include "retroroute/errors.hpp"

namespace retroroute {

namespace {

void append_children(const nlohmann::json& j, RouteNode& node) {
  if (!j.contains("children")) return;
  const auto& children = j.at("children");
  if (!children.is_array()) throw InputError("'children' must be an array");
  for (const auto& child : children) {
    if (!child.is_object()) throw InputError("route node must be an object");
    if (child.value("type", std::string()) == "reaction") {
      append_children(child, node);
    } else {
      node.children.push_back(route_from_json(child));
    }
  }
}

}  // namespace

RouteNode route_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("route node must be an object");
  const auto it = j.find("smiles");
  if (it == j.end() || !it->is_string()) {
    throw InputError("route node lacks a string 'smiles' field");
  }
  RouteNode node{it->get<std::string>(), {}};
  check_molecule(node.smiles);
  append_children(j, node);
  return node;
}

nlohmann::json route_to_json(const RouteNode& root) {
  nlohmann::json j;
  j["smiles"] = root.smiles;
  if (!root.children.empty()) {
    auto children = nlohmann::json::array();
    for (const auto& child : root.children) children.push_back(route_to_json(child));
    j["children"] = std::move(children);
  }
  return j;
}

std::vector<RouteNode> load_routes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open route file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!doc.is_array()) throw InputError(path + ": expected a top-level array");
  std::vector<RouteNode> routes;
  routes.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      routes.push_back(route_from_json(doc[i]));
    } catch (const Error& e) {
      throw ParseError(i, e.what());
    }
  }
  return routes;
}

void save_routes(const std::string& path, const std::vector<RouteNode>& routes) {
  auto doc = nlohmann::json::array();
  for (const auto& r : routes) doc.push_back(route_to_json(r));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << doc.dump() << '\n';
}

}  // namespace retroroute

#include "wavetopo/tree.hpp"

#include <algorithm>
#include <json.hpp>

#include "wavetopo/errors.hpp"

namespace wavetopo {

namespace {

RootedTree from_json(const nlohmann::json& j, int level) {
  if (!j.is_array()) throw ParseError("tree nodes must be JSON arrays");
  if (level > 10000) throw ParseError("tree is nested too deeply");
  RootedTree t;
  t.children.reserve(j.size());
  for (const auto& c : j) t.children.push_back(from_json(c, level + 1));
  return t;
}

}  // namespace

int RootedTree::node_count() const {
  int n = 1;
  for (const auto& c : children) n += c.node_count();
  return n;
}

int RootedTree::depth() const {
  int d = 0;
  for (const auto& c : children) d = std::max(d, 1 + c.depth());
  return d;
}

RootedTree parse_tree(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed tree: ") + e.what());
  }
  return from_json(j, 0);
}

std::string tree_to_string(const RootedTree& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    if (i) s += ",";
    s += tree_to_string(t.children[i]);
  }
  return s + "]";
}

std::string canonical_tree(const RootedTree& t) {
  std::vector<std::string> codes;
  codes.reserve(t.children.size());
  for (const auto& c : t.children) codes.push_back(canonical_tree(c));
  std::sort(codes.begin(), codes.end());
  std::string s = "(";
  for (const auto& c : codes) s += c;
  return s + ")";
}

bool trees_isomorphic(const RootedTree& a, const RootedTree& b) {
  return canonical_tree(a) == canonical_tree(b);
}

}  // namespace wavetopo

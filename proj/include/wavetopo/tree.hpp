#pragma once

// Finite ordered rooted trees; JSON form is nested arrays ([] is a leaf).

#include <string>
#include <vector>

namespace wavetopo {

struct RootedTree {
  std::vector<RootedTree> children;

  bool is_leaf() const { return children.empty(); }
  int node_count() const;
  int depth() const;  // a single node has depth 0
  bool operator==(const RootedTree&) const = default;
};

RootedTree parse_tree(const std::string& text);
std::string tree_to_string(const RootedTree& t);

// AHU encoding: leaf "()", inner node "(" + sorted child codes + ")".
std::string canonical_tree(const RootedTree& t);
bool trees_isomorphic(const RootedTree& a, const RootedTree& b);

}  // namespace wavetopo

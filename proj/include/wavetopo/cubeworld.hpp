#pragma once

// Integer-lattice combinatorics of signed unit cubes: structures, engulf and
// join, tree assembly and the classification of codimension-two faces.

#include <json.hpp>

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wavetopo/errors.hpp"
#include "wavetopo/tree.hpp"

namespace wavetopo {

using LatticePoint = std::vector<int>;

enum class Polarity { Plus, Minus };

inline int sign_of(Polarity p) { return p == Polarity::Plus ? 1 : -1; }
inline Polarity flipped(Polarity p) { return p == Polarity::Plus ? Polarity::Minus : Polarity::Plus; }

// The cube prod [c_i, c_i + 1] has the sign of u0 on its interior.
int cube_sign(const LatticePoint& c);

// Closed axis-aligned unit face: base + sum_{i in free} t_i e_i, t in [0,1]^|free|.
// Codimension-two faces ("edges") have n - 2 free axes; vertices have none.
struct LatticeFace {
  LatticePoint base;
  unsigned free_mask = 0;

  int free_count() const { return __builtin_popcount(free_mask); }
  bool is_free(int axis) const { return (free_mask >> axis) & 1u; }
  std::vector<LatticePoint> vertices() const;
  auto operator<=>(const LatticeFace&) const = default;
};

struct CubeStructure {
  int dim = 3;
  Polarity polarity = Polarity::Plus;
  std::set<LatticePoint> cubes;

  bool contains(const LatticePoint& c) const { return cubes.count(c) > 0; }
  bool operator==(const CubeStructure&) const = default;
};

CubeStructure single_cube(const LatticePoint& c);
CubeStructure translated(const CubeStructure& s, const LatticePoint& t);

struct ValidationReport {
  bool nonempty = true;
  bool complement_connected = true;
  bool boundary_signs = true;
  std::string witness;

  bool ok() const { return nonempty && complement_connected && boundary_signs; }
};

ValidationReport validate(const CubeStructure& s);

// Empty cells in bounded components of the complement.
std::vector<LatticePoint> enclosed_cells(const CubeStructure& s);

// Adds every cube of the opposite sign touching the structure (shared vertex
// suffices), then fills any cells the new layer encloses. Throws
// InvalidStructure if the input is invalid.
CubeStructure engulf(const CubeStructure& s);

// Extremal lattice vertices of the union. Priority is x_n first, then
// x_{n-1}, ..., x_1, i.e. the literal nested composition A1(A2(...An)).
std::pair<LatticePoint, LatticePoint> extremal_vertices(const CubeStructure& s);

// The codimension-two faces spanned by x_1..x_{n-2} ending at v_+ and
// starting at v_-.
std::pair<LatticeFace, LatticeFace> extremal_edges(const CubeStructure& s);

struct JoinResult {
  CubeStructure joined;
  LatticePoint translation;  // applied to the second argument
  LatticeFace edge;          // shared face, open in the joined structure
};

JoinResult join(const CubeStructure& a, const CubeStructure& b);
// Right fold J(C1, J(C2, ...)).
CubeStructure join_all(const std::vector<CubeStructure>& parts);

struct NodeRecord {
  std::vector<int> path;  // child indices from the root, 1-based
  int parent = -1;
  std::vector<int> children;
  int depth = 0;
  CubeStructure structure;        // C_v in root coordinates
  CubeStructure engulfed;         // E(C_v), empty for the root
  std::vector<LatticeFace> join_faces;
  LatticePoint translation;       // total shift from the locally built copy
};

struct StructureAssembly {
  int dim = 3;
  Polarity root_polarity = Polarity::Minus;
  RootedTree tree;
  std::vector<NodeRecord> nodes;  // preorder, nodes[0] is the root

  const CubeStructure& root_structure() const { return nodes.front().structure; }
};

// Leaves get sign root_polarity * (-1)^depth; a positive leaf sits at the
// origin and a negative one at e_1.
StructureAssembly build_structure(const RootedTree& t, int dim,
                                  Polarity root_polarity = Polarity::Minus);

struct EdgeClasses {
  std::vector<LatticeFace> exterior;
  std::vector<LatticeFace> interior;
  std::vector<LatticeFace> join;  // open faces
  // For each interior face, its vertices on a child's surface.
  std::vector<std::vector<LatticePoint>> interior_anchors;
};

// Requires n >= 3: for n = 2 the shells of a node and its child touch.
EdgeClasses classify_edges(const StructureAssembly& a, int node);

// True when every point of the face is at Chebyshev distance exactly one
// from the union of the cubes.
bool face_in_shell(const LatticeFace& f, const std::set<LatticePoint>& cubes);

// All codimension-two faces of the cubes.
std::set<LatticeFace> structure_edges(const CubeStructure& s);

// Whether the face set is connected through shared vertices; point faces
// (n = 2) also connect through unit lattice steps.
bool faces_connected(const std::vector<LatticeFace>& faces);

nlohmann::json to_json(const CubeStructure& s);
CubeStructure structure_from_json(const nlohmann::json& j);

}  // namespace wavetopo

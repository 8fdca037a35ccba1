#pragma once

// Nodal analysis on regular sample grids: sign grids, nodal domains, zero-set
// meshes with their topology, nesting trees and ensemble statistics.

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wavetopo/eigenfield.hpp"
#include "wavetopo/grid.hpp"
#include "wavetopo/tree.hpp"

namespace wavetopo {

struct SignGrid {
  GridSpec grid;
  Eigen::VectorXd values;
  std::vector<std::int8_t> signs;
  long long nudged = 0;  // samples moved off an exact zero
};

// Cell-centre samples of f. Values with |v| < 1e-14 * max|v| become
// +1e-14 * max|v| before signing.
SignGrid sign_grid(const EigenField& f, const Box& box, double h);
SignGrid sign_grid_from_values(const GridSpec& grid, Eigen::VectorXd values);

// Face-adjacent components of constant sign.
struct DomainLabels {
  std::vector<int> label;  // per sample
  std::vector<int> sign;   // per domain
  std::vector<long long> size;
  std::vector<char> touches_boundary;

  int count() const { return static_cast<int>(sign.size()); }
  int bounded_count() const;
  // Bounded domains plus one for the merged unbounded domain, if present.
  int merged_count() const;
};

DomainLabels label_domains(const SignGrid& g);

struct TopologyRecord {
  int euler_characteristic = 0;
  int genus = -1;  // closed surfaces in R^3 only
  bool compact = false;
};

nlohmann::json to_json(const TopologyRecord& t);

struct ZeroComponent {
  TopologyRecord topology;
  long long vertices = 0;
  long long faces = 0;     // triangles (n = 3) or segments (n = 2)
  double max_radius = 0.0; // max |x| over the grid points bracketing its vertices
};

// Piecewise-linear zero set on the Freudenthal (Kuhn) simplex split of the
// sample grid. Mesh vertices sit on grid edges with a sign change; the edge
// id is sample * directions + (offset mask - 1).
struct ZeroSetMesh {
  int dim = 3;
  std::vector<std::int64_t> vertex_edge;
  std::vector<int> vertex_component;
  std::vector<ZeroComponent> components;

  int directions() const { return dim == 3 ? 7 : 3; }
};

ZeroSetMesh zero_set_topology(const SignGrid& g);

// Explicit geometry for selected components (all when `components` is empty).
// Faces of a 2D mesh are segments with the third index -1.
struct TriangleMesh {
  int dim = 3;
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<int> face_component;
};

TriangleMesh zero_set_geometry(const SignGrid& g, const ZeroSetMesh& z,
                               const std::vector<int>& components = {});

// OBJ with one object per component.
void write_obj(std::ostream& os, const TriangleMesh& m);

struct ZeroSetResult {
  SignGrid grid;
  ZeroSetMesh topology;
  TriangleMesh mesh;
  double min_gradient_ratio = 0.0;  // min |grad f| / median |grad f| over mesh vertices
};

// Throws DegenerateZeroSet when min |grad f| over the mesh vertices falls
// below grad_tol times the median; grad_tol = 0 disables the check.
ZeroSetResult extract_zero_set(const EigenField& f, const Box& box, double h,
                               double grad_tol = 0.1);

// Incidence of domains and zero-set components. Graph node 0 is the unbounded
// domain (all domains touching the box boundary, merged); every bounded domain
// gets its own node.
struct NodalDecomposition {
  SignGrid grid;
  DomainLabels domains;
  ZeroSetMesh zero;
  std::vector<int> node_of_domain;
  std::vector<int> domain_of_node;  // -1 for node 0
  std::vector<std::vector<int>> component_nodes;  // distinct nodes on each side
  std::vector<std::vector<int>> node_components;
  std::vector<int> node_depth;       // BFS depth from node 0 in the bipartite graph, -1 if unreachable
  std::vector<int> component_depth;

  int node_count() const { return static_cast<int>(domain_of_node.size()); }
};

NodalDecomposition decompose(SignGrid grid);

struct NestingTree {
  RootedTree tree;
  std::vector<int> nodes;  // graph node per tree vertex, preorder
};

// The component separating `node` from the unbounded domain, -1 for node 0.
int enclosing_component(const NodalDecomposition& d, int node);
// The bounded side of a compact component. Throws OpenComponent or NotATree.
int inner_node(const NodalDecomposition& d, int component);
// Tree of domains enclosed by the component above `node`, rooted at `node`.
// Children are ordered by canonical code. Throws NotATree with a witness.
NestingTree nesting_tree_below(const NodalDecomposition& d, int node);
NestingTree nesting_tree(const NodalDecomposition& d, int component);

nlohmann::json tree_to_json(const RootedTree& t);

struct HistogramBin {
  std::string key;
  long long count = 0;
  double frequency = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// 95% Wilson score interval.
std::pair<double, double> wilson_interval(long long successes, long long trials, double z = 1.96);
std::vector<HistogramBin> make_histogram(const std::vector<std::string>& keys);
void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& bins);

struct EnsembleParams {
  int n = 2;
  int samples = 200;
  double radius = 50.0;
  std::uint64_t seed = 0;
  int waves = 256;
  double h = 0.0;  // 0 selects 0.1 (n = 2) or 0.2 (n = 3)
  int jobs = 1;
};

struct EnsembleStats {
  EnsembleParams params;
  long long compact_components = 0;
  long long non_loop_components = 0;  // n = 2: compact components with chi != 0
  long long tree_failures = 0;        // components whose enclosed graph was not a tree
  std::vector<HistogramBin> topology;  // "loop" (n = 2) or "genus=g" (n = 3)
  std::vector<HistogramBin> trees;     // canonical e(c)
};

// Per-sample seeds are derived from (seed, index), so results do not depend
// on the job count.
EnsembleStats ensemble_stats(const EnsembleParams& p);
nlohmann::json to_json(const EnsembleStats& s);

}  // namespace wavetopo

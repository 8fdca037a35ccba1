#pragma once

// End-to-end realization of a rooted tree as a nesting tree of u_eps and the
// checks on the extracted nodal domains.

#include <json.hpp>

#include <string>
#include <vector>

#include "wavetopo/cubeworld.hpp"
#include "wavetopo/nodal.hpp"
#include "wavetopo/perturb.hpp"

namespace wavetopo {

enum class FitMode {
  LeastSquares,  // fit_eigenfunction
  SignFeasible,  // fit_sign_feasible
  Auto,          // least squares, then the sign-feasible fit if the tree is not extracted
};

struct RealizeTreeParams {
  int dim = 3;
  double h = 0.05;       // must be 1/(2m): samples then lie on the lattice planes
  double margin = 0.5;   // box padding around C_root, a multiple of h
  FitOptions fit;
  FitMode fit_mode = FitMode::LeastSquares;
  SignFitOptions sign_fit;
  double epsilon_grid_step = 0.05;
  bool refine_check = false;  // repeat the extraction at h/2
};

struct NodeCheck {
  std::vector<int> path;
  int domain = -1;            // majority label over the predicted cubes
  double vote_share = 0.0;    // fraction of those samples carrying that label
  double hausdorff = 0.0;     // between the domain and its predicted cube union
  bool hausdorff_ok = false;  // <= 2h
  long long bounded_complement_samples = 0;  // complement of the domain and everything it encloses
  bool claim_ok = false;
};

struct RealizeTreeReport {
  std::string input_tree;
  std::string extracted_tree;
  std::string input_canonical;
  std::string extracted_canonical;
  bool pass = false;
  std::string failure;  // stage and reason when the tree was not extracted

  FitReport fit;                      // the fit behind the reported field
  std::vector<std::string> attempts;  // "solver: outcome" per fit tried
  EpsilonChoice epsilon;
  GradientReport gradient;
  long long samples = 0;
  double h = 0.0;
  int domains = 0;
  int zero_components = 0;
  TopologyRecord outer_component;
  std::vector<NodeCheck> nodes;  // assembly preorder
  bool node_map_consistent = false;  // predicted domains form the extracted tree
  bool domain_checks_ok = false;
  std::string refined_canonical;     // empty unless refine_check
  double seconds = 0.0;

  bool fit_target_met() const { return fit.met_target; }
};

nlohmann::json to_json(const RealizeTreeReport& r);

struct RealizeTreeResult {
  RealizeTreeReport report;
  EigenField u_eps;
  TriangleMesh mesh;  // the outer component and the zero set inside it
  RootedTree extracted;
};

// The sample box: C_root's bounding box padded by `margin`, shifted by h/2 so
// cell centres land on integer coordinates.
Box lattice_aligned_box(const Box& bounds, double h, double margin);

// Pipeline: structure, targets, fit, epsilon, sign grid, decomposition and
// nesting tree of the domain carrying the root's own cubes. Upstream errors
// propagate; a missing or mismatched tree is reported with pass = false.
RealizeTreeResult realize_and_verify(const RootedTree& t, const RealizeTreeParams& p = {});

// Squared Euclidean distance (in samples) to the nearest marked sample.
std::vector<float> distance_transform_sq(const GridSpec& g, const std::vector<char>& mask);

}  // namespace wavetopo

#pragma once

// Realizing a bounded domain's boundary as a zero-set component of a
// unit-frequency eigenfunction: Dirichlet ground state, rescaling and a
// plane-wave fit near the rescaled boundary.

#include <Eigen/Dense>
#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "wavetopo/eigenfield.hpp"
#include "wavetopo/grid.hpp"
#include "wavetopo/nodal.hpp"
#include "wavetopo/perturb.hpp"

namespace wavetopo {

// Analytic domains; phi < 0 inside.
struct Shape {
  enum class Kind { Ball, Torus, Superellipsoid, Cuboid };
  Kind kind = Kind::Ball;
  double radius = 1.0;                            // ball
  double major = 2.0, minor = 0.8;                // torus about the z axis
  Eigen::Vector3d semi_axes{1.0, 1.0, 1.0};       // superellipsoid
  double exponent = 4.0;                          // superellipsoid
  Eigen::Vector3d lo{0.0, 0.0, 0.0}, hi{1.0, 1.0, 1.0};  // cuboid

  double phi(const Eigen::Vector3d& x) const;
  // Distance to the boundary; exact except for superellipsoids (first order in phi).
  double boundary_distance(const Eigen::Vector3d& x) const;
  Box bounds() const;
};

// {"shape": "ball" | "torus" | "superellipsoid" | "cube", ...parameters}
Shape shape_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Shape& s);

struct VoxelDomain {
  GridSpec grid;
  std::vector<char> inside;   // per cell centre
  std::optional<Shape> shape; // boundary crossings are exact when present, mid-cell otherwise
};

VoxelDomain voxelize(const Shape& s, double h);
// Raw bytes (one per cell, nonzero inside, x fastest) with a JSON header
// {"size": [nx, ny, nz], "spacing": h, "origin": [x, y, z]}.
VoxelDomain voxel_domain_from_mask(const nlohmann::json& header, const std::vector<char>& bytes);

struct DirichletEigenpair {
  double lambda = 0.0;  // square root of the eigenvalue
  Eigen::VectorXd vector;           // per grid cell, zero outside, sup = 1
  std::vector<std::int64_t> cells;  // interior cells in unknown order
  double residual = 0.0;            // |L v - lambda^2 v| / (lambda^2 |v|)
  int iterations = 0;
};

// Smallest eigenpair of the 7-point Dirichlet Laplacian (Shortley-Weller
// weights at the boundary) by inverse iteration with shift 0.
DirichletEigenpair dirichlet_ground_state(const VoxelDomain& d, double tol = 1e-8,
                                          int max_iterations = 200);

struct RealizeSurfaceParams {
  double h = 0.05;             // eigenproblem spacing, original units
  double shell = 0.5;          // half-width of the fitting shell, rescaled units
  double extract_h = 0.1;      // zero-set resolution, rescaled units
  FitOptions fit;              // frequency is forced to 1
  double eig_tol = 1e-8;
};

struct RealizeSurfaceReport {
  double lambda = 0.0;
  double lambda_sq = 0.0;
  double eig_residual = 0.0;
  int eig_iterations = 0;
  long long unknowns = 0;
  FitReport fit;
  TopologyRecord topology;
  int refined_genus = -1;         // at extract_h / 2
  bool genus_stable = false;
  double hausdorff = 0.0;         // max distance of the component's vertices to lambda dA
  bool within_shell = false;
  double min_gradient_ratio = 0.0;
  long long component_vertices = 0;
};

nlohmann::json to_json(const RealizeSurfaceReport& r);

struct RealizeSurfaceResult {
  EigenField field;
  TopologyRecord topology;
  RealizeSurfaceReport report;
  TriangleMesh mesh;
};

// Throws DegenerateZeroSet when no compact component of the fit lies within
// the shell.
RealizeSurfaceResult realize_component(const Shape& s, const RealizeSurfaceParams& p = {});

}  // namespace wavetopo

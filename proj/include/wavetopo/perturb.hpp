#pragma once

// Target perturbation h on the edge set K of a tree assembly, a plane-wave
// fit of a Helmholtz solution to h in C^1 norm, and the perturbed field
// u_eps = u0 + eps f.

#include <Eigen/Dense>
#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

#include "wavetopo/cubeworld.hpp"
#include "wavetopo/eigenfield.hpp"
#include "wavetopo/grid.hpp"

namespace wavetopo {

// chi(t) = -cos(pi t) on [0, 1], 1 beyond.
double chi(double t);
double chi_prime(double t);

enum class EdgeRule { Exterior, Interior, Join };

struct EdgeTarget {
  LatticeFace face;
  EdgeRule rule = EdgeRule::Exterior;
  int node = 0;   // assembly node that labeled the face
  int sign = 1;   // +1 for a minus-polarity node, -1 for plus
  LatticePoint anchor;            // Interior: the vertex on the child surface
  std::vector<int> connecting;    // Interior: axes along which h varies
};

// h and its gradient (tangential; normal components are zero) at x on the face.
double target_value(const EdgeTarget& e, const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr);

struct PerturbationSpec {
  int dim = 3;
  std::vector<EdgeTarget> edges;  // K, one entry per face
  Box bounds;                     // bounding box of C_root
  CubeStructure root;
};

// Rules A, B, C over all nodes. Throws UnlabeledEdge if a face of a root cube
// gets no label and InvalidStructure on conflicting labels or vertex values.
PerturbationSpec build_h(const StructureAssembly& a);

struct TargetSamples {
  Eigen::MatrixXd points;     // n x M
  Eigen::VectorXd values;     // M
  Eigen::MatrixXd gradients;  // n x M
};

// Tensor grid with per_unit intervals per free axis on every face of K;
// shared points are kept once.
TargetSamples sample_targets(const PerturbationSpec& spec, int per_unit);

void write_samples_csv(std::ostream& os, const TargetSamples& s);

struct FitOptions {
  int basis_size = 600;           // direction pairs
  double frequency = 0.0;         // 0 selects pi sqrt(n)
  double svd_cutoff = 1e-8;       // relative to the largest singular value
  int samples_per_unit = 8;
  int check_factor = 4;
  double gradient_weight = 1.0;   // relative to value rows
  double target = 0.01;
  long long direct_svd_limit = 20'000'000;  // rows * cols below which BDCSVD runs on A
};

struct FitReport {
  double achieved_sup_c1_error = 0.0;
  double max_value_error = 0.0;
  double max_gradient_error = 0.0;
  double fit_rms = 0.0;
  int basis_size = 0;
  int rank = 0;
  double svd_cutoff = 0.0;
  double condition_estimate = 0.0;
  int fit_points = 0;
  int check_points = 0;
  double frequency = 0.0;
  double target = 0.0;
  bool met_target = false;
  std::string solver;
  int iterations = 0;  // sign-feasible fit only
};

nlohmann::json to_json(const FitReport& r);

struct FitResult {
  EigenField field;
  FitReport report;
};

// Least squares over cos/sin plane waves with wavevectors of length kappa on
// a hemisphere direction set, centred at `centre`; errors are measured on
// `check`, never on the fit samples.
FitResult fit_to_samples(const TargetSamples& fit, const TargetSamples& check,
                         const Eigen::VectorXd& centre, const FitOptions& opt);

// Throws SingularFit when every singular value falls below the cutoff.
FitResult fit_eigenfunction(const PerturbationSpec& spec, const FitOptions& opt = {});

struct SignFitOptions {
  double tau = 0.3;    // samples with |h| < tau are fitted in value and gradient
  double rho = 0.3;    // elsewhere sign(h) f is asked to lie in [rho |h|, upper]
  double upper = 3.0;
  double ridge = 1e-8; // relative to the largest Gram diagonal entry
  int max_iterations = 100;
};

// Variant of the fit that asks only for the sign structure of h away from its
// zeros: least squares to h and grad h where |h| < tau plus a squared hinge on
// the interval constraints, minimised by an active-set Newton iteration with
// backtracking. Errors are reported against h on the same check set.
FitResult fit_sign_feasible(const PerturbationSpec& spec, const FitOptions& opt = {},
                            const SignFitOptions& sign = {});

// u0 + eps f with u0 the product of sines at frequency pi.
EigenField assemble_u_eps(const EigenField& f, double epsilon);

struct EpsilonChoice {
  double epsilon = 0.0;
  double delta = 0.0;
  double f_sup = 0.0;
  double margin = 0.0;  // min |u_eps| over the checked points
  long long checked_points = 0;
};

// Scans delta = 0.2, 0.1, 0.05, ... (down to min_delta), eps = delta^2 / (4 sup|f|).
// A delta passes when u_eps has the sign of u0 at every point of a lattice-
// aligned grid in C_root lying outside the delta-tube of K and at least
// delta/2 from the lattice planes. Returns the largest passing delta; throws
// NoValidEpsilon otherwise.
EpsilonChoice choose_epsilon(const EigenField& f, const PerturbationSpec& spec,
                             double grid_step = 0.05, double min_delta = 0.01);

struct GradientReport {
  double min_gradient = 0.0;  // min |grad f| over sample points where h = 0
  double required = 0.0;
  double margin = 0.0;        // min_gradient - required
  int points = 0;
  bool ok = true;
};

// Transversality at the zeros of h: |grad f| >= 1 - 1/100 - slack. Accepts
// u_eps (uses its perturbation part) or f itself.
GradientReport verify_local_gradient(const EigenField& u_eps, const PerturbationSpec& spec,
                                     double slack = 0.0, int per_unit = 32);

}  // namespace wavetopo

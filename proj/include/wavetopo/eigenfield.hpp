#pragma once

// Exactly evaluable solutions of the Helmholtz equation in R^n.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "wavetopo/grid.hpp"

namespace wavetopo {

// sum_j a_j cos<k_j, x> + b_j sin<k_j, x>. Wave vectors carry the frequency.
struct PlaneWaveSum {
  Eigen::MatrixXd wavevectors;  // n x N
  Eigen::VectorXd cos_weights;
  Eigen::VectorXd sin_weights;
};

struct BesselTerm {
  int l = 0;
  int m = 1;
  double coeff = 0.0;
};

// sum c_lm Y_lm(x/|x|) J_{l+nu}(|x|) / |x|^nu, unit frequency.
struct BesselHarmonicSum {
  int n = 3;
  std::vector<BesselTerm> terms;
};

// prod_i sin(frequency x_i); eigenvalue n * frequency^2.
struct ProductSines {
  int n = 3;
  double frequency = 3.14159265358979323846;
};

// sin(pi x) sin(pi y) + sin(pi x) sin(pi z) + sin(pi y) sin(pi z) in R^3.
struct Classic2Sines {};

class EigenField;

// base + scale * add
struct AffineCombo {
  std::shared_ptr<const EigenField> base;
  std::shared_ptr<const EigenField> add;
  double scale = 0.0;
};

class EigenField {
 public:
  using Variant = std::variant<PlaneWaveSum, BesselHarmonicSum, ProductSines, Classic2Sines,
                               AffineCombo>;

  EigenField(PlaneWaveSum p);
  EigenField(BesselHarmonicSum b);
  EigenField(ProductSines p);
  EigenField(Classic2Sines c);
  EigenField(AffineCombo a);

  int dim() const { return dim_; }
  const Variant& rep() const { return rep_; }

 private:
  Variant rep_;
  int dim_ = 3;
};

double evaluate(const EigenField& f, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd gradient(const EigenField& f, const Eigen::Ref<const Eigen::VectorXd>& x);
double value_and_gradient(const EigenField& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                          Eigen::VectorXd& grad);

// k^2 with Delta f + k^2 f = 0, or nullopt when the terms disagree.
std::optional<double> eigenvalue(const EigenField& f);

// Values at every grid sample, x fastest. Plane-wave sums use separable
// exponentials and one complex matrix product per z-slice.
Eigen::VectorXd evaluate_grid(const EigenField& f, const GridSpec& grid);

EigenField affine_combo(const EigenField& base, const EigenField& add, double scale);

struct FieldSampleParams {
  int n = 3;
  int N = 256;
  std::uint64_t seed = 0;
  double alpha = 1.0;
};

EigenField sample_rpw(const FieldSampleParams& params);

EigenField bessel_mode(int n, int l, int m);

// Quadrature of int e^{-i<x,xi>} Y_lm(xi) dsigma, rotated by i^l to a real
// number, against (2 pi)^{n/2} Y_lm(x/|x|) J_{l+nu}(|x|)/|x|^nu.
std::pair<double, double> planewave_transform_check(int n, int l, int m,
                                                    const Eigen::Ref<const Eigen::VectorXd>& x,
                                                    double tol = 1e-10);

struct ModeApproximation {
  EigenField field;
  double sup_error = 0.0;
};

ModeApproximation approximate_mode_by_planewaves(int n, int l, int m, int N,
                                                 double radius = 5.0);

// Max over a points_per_axis^n grid in the box of |Delta_h f + k^2 f|.
double laplacian_residual(const EigenField& f, const Box& box, double h,
                          int points_per_axis = 9);

// Unit directions: Fibonacci lattice on S^2, equal angles on [0, pi) for S^1.
Eigen::MatrixXd direction_set(int n, int N);

nlohmann::json to_json(const EigenField& f);
EigenField field_from_json(const nlohmann::json& j);

}  // namespace wavetopo

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "wavetopo/eigenfield.hpp"
#include "wavetopo/specfun.hpp"

using namespace wavetopo;

namespace {
constexpr double pi = std::numbers::pi;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(v.size());
  int i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

EigenField single_wave(const Eigen::VectorXd& k, double a, double b) {
  PlaneWaveSum p;
  p.wavevectors = k;
  p.cos_weights = Eigen::VectorXd::Constant(1, a);
  p.sin_weights = Eigen::VectorXd::Constant(1, b);
  return EigenField(p);
}
}  // namespace

TEST_CASE("evaluate and gradient examples") {
  const EigenField u0(ProductSines{3});
  CHECK(evaluate(u0, vec({0.5, 0.5, 0.5})) == doctest::Approx(1.0));
  CHECK(gradient(u0, vec({0.5, 0.5, 0.5})).norm() < 1e-14);
  const EigenField w = single_wave(vec({1, 0, 0}), 1.0, 0.0);
  CHECK(evaluate(w, vec({pi, 0, 0})) == doctest::Approx(-1.0));
}

TEST_CASE("gradients agree with central differences at 100 random points") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double h = 1e-4;
  std::vector<EigenField> fields{
      EigenField(ProductSines{3}),
      EigenField(Classic2Sines{}),
      sample_rpw({3, 32, 9, 1.0}),
      sample_rpw({2, 32, 9, 1.0}),
      EigenField(BesselHarmonicSum{3, {{0, 1, 1.0}, {2, 3, 0.5}, {3, 6, -0.7}}}),
      EigenField(BesselHarmonicSum{2, {{0, 1, 1.0}, {3, 2, 0.4}}}),
      affine_combo(EigenField(ProductSines{3}), sample_rpw({3, 16, 2, 1.0}), 0.3),
  };
  for (const auto& f : fields) {
    const int n = f.dim();
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd x(n);
      for (int d = 0; d < n; ++d) x[d] = u(rng);
      const Eigen::VectorXd g = gradient(f, x);
      for (int d = 0; d < n; ++d) {
        Eigen::VectorXd xp = x, xm = x;
        xp[d] += h;
        xm[d] -= h;
        const double fd = (evaluate(f, xp) - evaluate(f, xm)) / (2 * h);
        // third derivatives are bounded by ~ pi^3 * sum|coeffs| here
        CHECK(std::fabs(g[d] - fd) <= 10 * h * h * 200.0);
      }
    }
  }
}

TEST_CASE("sample_rpw determinism and unit variance") {
  const auto a = to_json(sample_rpw({3, 50, 42, 1.0}));
  const auto b = to_json(sample_rpw({3, 50, 42, 1.0}));
  CHECK(a == b);
  CHECK(a != to_json(sample_rpw({3, 50, 43, 1.0})));

  const Eigen::VectorXd x = vec({0.3, -1.2, 2.0});
  double s2 = 0.0;
  const int S = 10000;
  for (int s = 0; s < S; ++s) {
    const double v = evaluate(sample_rpw({3, 8, std::uint64_t(s), 1.0}), x);
    s2 += v * v;
  }
  CHECK(std::fabs(s2 / S - 1.0) < 3.0 * std::sqrt(2.0 / S));
}

TEST_CASE("sample_rpw annulus radii stay inside [alpha, 1]") {
  const EigenField f = sample_rpw({3, 500, 4, 0.5});
  const auto& p = std::get<PlaneWaveSum>(f.rep());
  const Eigen::VectorXd r = p.wavevectors.colwise().norm();
  CHECK(r.minCoeff() >= 0.5 - 1e-12);
  CHECK(r.maxCoeff() <= 1.0 + 1e-12);
  CHECK_FALSE(eigenvalue(f).has_value());
}

TEST_CASE("empirical covariance matches the kernel within 4 standard errors") {
  const int S = 20000;
  for (int n : {2, 3}) {
    for (double r : {0.5, 1.0, 2.0, pi}) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n), y = Eigen::VectorXd::Zero(n);
      y[0] = r;
      double sum = 0.0, sum2 = 0.0;
      for (int s = 0; s < S; ++s) {
        const EigenField f = sample_rpw({n, 16, std::uint64_t(1000 + s), 1.0});
        const double v = evaluate(f, x) * evaluate(f, y);
        sum += v;
        sum2 += v * v;
      }
      const double mean = sum / S;
      const double se = std::sqrt((sum2 / S - mean * mean) / S);
      CHECK(std::fabs(mean - specfun::covariance_kernel(n, r)) < 4.0 * se);
    }
  }
}

TEST_CASE("bessel_mode examples") {
  const EigenField b30 = bessel_mode(3, 0, 1);
  CHECK(std::fabs(evaluate(b30, vec({pi, 0, 0}))) < 1e-15);
  const double at0 = evaluate(b30, vec({0, 0, 0}));
  CHECK(std::isfinite(at0));
  CHECK(at0 != 0.0);
  CHECK(std::fabs(evaluate(bessel_mode(2, 0, 1), vec({2.404825557695773, 0}))) < 1e-10);
  CHECK(gradient(b30, vec({0, 0, 0})).norm() < 1e-14);
  CHECK_THROWS_AS(bessel_mode(3, 1, 4), DomainError);
}

TEST_CASE("planewave transform examples") {
  {
    const auto [lhs, rhs] = planewave_transform_check(3, 0, 1, vec({pi, 0, 0}));
    CHECK(std::fabs(lhs) < 1e-8);
    CHECK(std::fabs(rhs) < 1e-8);
  }
  {
    const auto [lhs, rhs] = planewave_transform_check(3, 0, 1, vec({0, pi / 2, 0}));
    const double want = 2.0 * std::sqrt(pi) * (2.0 / pi);  // 2 sqrt(pi) sin(r)/r
    CHECK(lhs == doctest::Approx(want).epsilon(1e-10));
    CHECK(rhs == doctest::Approx(want).epsilon(1e-10));
  }
  {
    const auto [lhs, rhs] = planewave_transform_check(2, 0, 1, vec({1e-9, 0}));
    CHECK(lhs == doctest::Approx(std::sqrt(2 * pi)).epsilon(1e-9));
    CHECK(rhs == doctest::Approx(std::sqrt(2 * pi)).epsilon(1e-9));
  }
}

TEST_CASE("planewave transform identity at 50 random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    const int n = t % 2 ? 2 : 3;
    const int l = static_cast<int>(u(rng) * 7) % 7;
    const int m = 1 + static_cast<int>(u(rng) * specfun::harmonic_dimension(n, l)) %
                          specfun::harmonic_dimension(n, l);
    Eigen::VectorXd x(n);
    for (int d = 0; d < n; ++d) x[d] = g(rng);
    x *= (0.1 + 14.9 * u(rng)) / x.norm();
    const auto [lhs, rhs] = planewave_transform_check(n, l, m, x);
    CHECK(std::fabs(lhs - rhs) <= 1e-7);
  }
}

TEST_CASE("plane-wave approximation of Bessel modes") {
  const auto e100 = approximate_mode_by_planewaves(3, 2, 3, 100).sup_error;
  const auto e1000 = approximate_mode_by_planewaves(3, 2, 3, 1000).sup_error;
  const auto e10000 = approximate_mode_by_planewaves(3, 2, 3, 10000).sup_error;
  CHECK(e1000 < e100);
  CHECK(e10000 < 1.1 * e1000);

  // single pair +-e1 in the plane: J0(r)/sqrt(2 pi) at the origin exactly
  const auto one = approximate_mode_by_planewaves(2, 0, 1, 1);
  CHECK(evaluate(one.field, vec({0, 0})) == doctest::Approx(1.0 / std::sqrt(2 * pi)));
  CHECK(evaluate(one.field, vec({0.7, 0})) ==
        doctest::Approx(std::cos(0.7) / std::sqrt(2 * pi)));

  // odd degrees use sine weights
  const auto odd = approximate_mode_by_planewaves(2, 3, 2, 64);
  CHECK(odd.sup_error < 1e-8);
}

TEST_CASE("laplacian residual examples and second-order convergence") {
  const Box unit = Box::cube(3, 0.0, 1.0);
  const EigenField u0(ProductSines{3});
  const double h = 0.01;
  CHECK(laplacian_residual(u0, unit, h) <= 10 * h * h * pi * pi * 3);
  const EigenField w = sample_rpw({3, 64, 5, 1.0});
  const double rw = laplacian_residual(w, Box::cube(3, -2.0, 2.0), h);
  CHECK(rw <= 10 * h * h);

  std::vector<EigenField> fields{u0, w, EigenField(Classic2Sines{}), bessel_mode(3, 2, 2),
                                 bessel_mode(2, 1, 1)};
  for (const auto& f : fields) {
    const Box box = Box::cube(f.dim(), -1.3, 1.1);
    const double r1 = laplacian_residual(f, box, 0.02);
    const double r2 = laplacian_residual(f, box, 0.01);
    CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.2));
  }
}

TEST_CASE("eigenvalue per variant") {
  CHECK(*eigenvalue(EigenField(ProductSines{3})) == doctest::Approx(3 * pi * pi));
  CHECK(*eigenvalue(EigenField(Classic2Sines{})) == doctest::Approx(2 * pi * pi));
  CHECK(*eigenvalue(bessel_mode(3, 1, 1)) == 1.0);
  CHECK(*eigenvalue(sample_rpw({2, 10, 1, 1.0})) == doctest::Approx(1.0));
  CHECK_FALSE(eigenvalue(affine_combo(EigenField(ProductSines{3}), bessel_mode(3, 0, 1), 0.1)));
  CHECK(eigenvalue(affine_combo(EigenField(ProductSines{3}), bessel_mode(3, 0, 1), 0.0)));
}

TEST_CASE("affine combination with zero scale is the base field") {
  const EigenField u0(ProductSines{3});
  const EigenField ue = affine_combo(u0, sample_rpw({3, 10, 1, 1.0}), 0.0);
  for (double t : {0.1, 0.37, 1.6})
    CHECK(evaluate(ue, vec({t, 0.2, 0.9})) == evaluate(u0, vec({t, 0.2, 0.9})));
}

TEST_CASE("grid evaluation matches pointwise evaluation") {
  GridSpec g;
  g.dim = 3;
  g.origin = vec({-1.0, 0.3, 2.0});
  g.spacing = 0.07;
  g.size = {11, 7, 5};
  std::vector<EigenField> fields{sample_rpw({3, 40, 3, 1.0}), EigenField(ProductSines{3}),
                                 affine_combo(EigenField(ProductSines{3}),
                                              sample_rpw({3, 5, 1, 1.0}), 0.2),
                                 EigenField(Classic2Sines{})};
  for (const auto& f : fields) {
    const Eigen::VectorXd v = evaluate_grid(f, g);
    for (std::int64_t i = 0; i < g.count(); ++i) CHECK(v[i] == doctest::Approx(evaluate(f, g.point(i))).epsilon(1e-12).scale(1.0));
  }
  GridSpec g2;
  g2.dim = 2;
  g2.origin = vec({0.1, -0.4});
  g2.spacing = 0.2;
  g2.size = {6, 9, 1};
  const EigenField f2 = sample_rpw({2, 30, 8, 1.0});
  const Eigen::VectorXd v2 = evaluate_grid(f2, g2);
  for (std::int64_t i = 0; i < g2.count(); ++i)
    CHECK(v2[i] == doctest::Approx(evaluate(f2, g2.point(i))).epsilon(1e-12).scale(1.0));
}

TEST_CASE("JSON round trip keeps full precision") {
  std::vector<EigenField> fields{sample_rpw({3, 7, 77, 0.3}), EigenField(ProductSines{2}),
                                 EigenField(Classic2Sines{}), bessel_mode(3, 4, 7),
                                 affine_combo(EigenField(ProductSines{3}),
                                              sample_rpw({3, 4, 1, 1.0}), 0.0123456789012345)};
  const Eigen::VectorXd x = vec({0.123, 0.456, 0.789});
  for (const auto& f : fields) {
    const EigenField g = field_from_json(nlohmann::json::parse(to_json(f).dump()));
    CHECK(g.dim() == f.dim());
    CHECK(to_json(g) == to_json(f));
    const Eigen::VectorXd y = x.head(f.dim());
    CHECK(evaluate(g, y) == evaluate(f, y));
  }
  CHECK_THROWS_AS(field_from_json(nlohmann::json::parse(R"({"type":"nope","n":3,"terms":[]})")),
                  ParseError);
}

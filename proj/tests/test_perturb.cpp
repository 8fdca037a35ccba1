#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "wavetopo/perturb.hpp"

using namespace wavetopo;

namespace {

constexpr double kPi = std::numbers::pi;

PerturbationSpec spec_of(const char* tree) { return build_h(build_structure(parse_tree(tree), 3)); }

Eigen::VectorXd to_vec(const LatticePoint& p) {
  Eigen::VectorXd v(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) v[i] = p[i];
  return v;
}

Eigen::VectorXd face_point(const LatticeFace& f, double t) {
  Eigen::VectorXd x = to_vec(f.base);
  for (int i = 0; i < static_cast<int>(x.size()); ++i)
    if (f.is_free(i)) x[i] += t;
  return x;
}

int free_axis(const LatticeFace& f) {
  for (int i = 0; i < 3; ++i)
    if (f.is_free(i)) return i;
  return -1;
}

TargetSamples sample_field(const EigenField& g, const TargetSamples& where) {
  TargetSamples t = where;
  for (Eigen::Index m = 0; m < t.points.cols(); ++m) {
    Eigen::VectorXd grad;
    t.values[m] = value_and_gradient(g, t.points.col(m), grad);
    t.gradients.col(m) = grad;
  }
  return t;
}

}  // namespace

TEST_CASE("chi profile") {
  CHECK(chi(0.0) == -1.0);
  CHECK(chi(0.5) == doctest::Approx(0.0));
  CHECK(chi(1.0) == 1.0);
  CHECK(chi(3.0) == 1.0);
  CHECK(chi_prime(0.5) == doctest::Approx(kPi));
  CHECK(chi_prime(0.0) == 0.0);
  CHECK(chi_prime(1.0) == 0.0);
  for (double t = 0.01; t < 1.0; t += 0.01) CHECK(chi(t + 0.01) > chi(t));
}

TEST_CASE("nested pair: shell grid, inner cube and connecting edges") {
  const PerturbationSpec s = spec_of("[[]]");
  std::map<std::tuple<EdgeRule, int, int>, int> count;
  for (const auto& e : s.edges) ++count[{e.rule, e.node, e.sign}];
  // Edge graph of the 3x3x3 box surface, the inner cube's 12 edges, and 3
  // connecting edges at each of its 8 vertices.
  CHECK(count[{EdgeRule::Exterior, 0, 1}] == 108);
  CHECK(count[{EdgeRule::Exterior, 1, -1}] == 12);
  CHECK(count[{EdgeRule::Interior, 0, 1}] == 24);
  CHECK(s.edges.size() == 144);
  CHECK(s.bounds.lo == Eigen::Vector3d(-1, -1, -1));
  CHECK(s.bounds.hi == Eigen::Vector3d(2, 2, 2));
  // 7 interior points per edge plus the 56 + 8 lattice vertices.
  CHECK(sample_targets(s, 8).values.size() == 144 * 7 + 64);
}

TEST_CASE("Rule A sign follows polarity") {
  for (const char* tree : {"[]", "[[]]", "[[],[]]", "[[[]]]"}) {
    const auto a = build_structure(parse_tree(tree), 3);
    const auto s = build_h(a);
    for (const auto& e : s.edges) {
      const bool minus = a.nodes[e.node].structure.polarity == Polarity::Minus;
      REQUIRE(e.sign == (minus ? 1 : -1));
      if (e.rule == EdgeRule::Exterior)
        REQUIRE(target_value(e, face_point(e.face, 0.3)) == e.sign);
    }
  }
}

TEST_CASE("target profiles: one zero per connecting edge, two per join edge") {
  const PerturbationSpec s = spec_of("[[],[]]");
  int joins = 0;
  for (const auto& e : s.edges) {
    if (e.rule == EdgeRule::Exterior) continue;
    const int ax = free_axis(e.face);
    int zeros = 0;
    double prev = target_value(e, face_point(e.face, 0.0));
    for (int k = 1; k <= 32; ++k) {
      const double v = target_value(e, face_point(e.face, k / 32.0));
      if ((prev < 0) != (v < 0)) ++zeros;
      prev = v;
    }
    Eigen::VectorXd g;
    if (e.rule == EdgeRule::Interior) {
      CHECK(zeros == 1);
      CHECK(target_value(e, face_point(e.face, 0.5), &g) == doctest::Approx(0.0));
      CHECK(std::abs(g[ax]) == doctest::Approx(kPi));
    } else {
      ++joins;
      CHECK(zeros == 2);
      CHECK(target_value(e, face_point(e.face, 0.5)) == -e.sign);
      CHECK(target_value(e, face_point(e.face, 0.0)) == e.sign);
      CHECK(target_value(e, face_point(e.face, 0.25), &g) == doctest::Approx(0.0));
      CHECK(std::abs(g[ax]) == doctest::Approx(2 * kPi));
    }
    for (double t : {0.0, 1.0}) {
      target_value(e, face_point(e.face, t), &g);
      CHECK(g.norm() == doctest::Approx(0.0));
    }
    // Gradient agrees with a central difference along the edge.
    for (double t : {0.2, 0.4, 0.7}) {
      const double d = 1e-6;
      target_value(e, face_point(e.face, t), &g);
      const double fd = (target_value(e, face_point(e.face, t + d)) -
                         target_value(e, face_point(e.face, t - d))) / (2 * d);
      CHECK(g[ax] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  CHECK(joins == 1);
}

TEST_CASE("h is single-valued at shared lattice vertices") {
  for (const char* tree : {"[[]]", "[[],[]]", "[[[]]]", "[[[],[]],[]]"}) {
    const PerturbationSpec s = spec_of(tree);
    std::map<LatticePoint, double> at;
    for (const auto& e : s.edges)
      for (const auto& v : e.face.vertices()) {
        const double h = target_value(e, to_vec(v));
        const auto [it, fresh] = at.emplace(v, h);
        if (!fresh) REQUIRE(it->second == doctest::Approx(h));
      }
  }
}

TEST_CASE("n = 4: h is built for depth one and rejected for depth two") {
  for (const char* tree : {"[[]]", "[[],[]]", "[[],[],[]]"})
    CHECK_NOTHROW(build_h(build_structure(parse_tree(tree), 4)));
  // Opposite Rule A constants meet at shared vertices.
  for (const char* tree : {"[[[]]]", "[[[]],[]]"})
    CHECK_THROWS_AS(build_h(build_structure(parse_tree(tree), 4)), InvalidStructure);
}

TEST_CASE("samples CSV") {
  const TargetSamples t = sample_targets(spec_of("[[]]"), 2);
  std::ostringstream os;
  write_samples_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x1,x2,x3,h,dh1,dh2,dh3");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(rows == t.values.size());
}

TEST_CASE("a target inside the span is recovered") {
  const PerturbationSpec s = spec_of("[[]]");
  const double kappa = kPi * std::sqrt(3.0);
  FitOptions opt;
  opt.basis_size = 200;
  // The fit's basis: the first N of 2N Fibonacci directions (one hemisphere).
  const Eigen::MatrixXd dirs = direction_set(3, 2 * opt.basis_size).leftCols(opt.basis_size);
  std::mt19937 rng(7);
  std::normal_distribution<double> gauss;
  PlaneWaveSum pw;
  pw.wavevectors = kappa * dirs(Eigen::all, {3, 50, 117, 160, 199});
  pw.cos_weights = Eigen::VectorXd::NullaryExpr(5, [&] { return gauss(rng); });
  pw.sin_weights = Eigen::VectorXd::NullaryExpr(5, [&] { return gauss(rng); });
  const EigenField g(pw);
  const auto fit = sample_field(g, sample_targets(s, 8));
  const auto check = sample_field(g, sample_targets(s, 32));
  const auto r = fit_to_samples(fit, check, 0.5 * (s.bounds.lo + s.bounds.hi), opt);
  CHECK(r.report.achieved_sup_c1_error <= 1e-8);
}

TEST_CASE("nested pair fit: error non-increasing in N, reported honestly") {
  const PerturbationSpec s = spec_of("[[]]");
  FitOptions opt;
  opt.basis_size = 600;
  const auto a = fit_eigenfunction(s, opt);
  opt.basis_size = 1200;
  const auto b = fit_eigenfunction(s, opt);
  CHECK(b.report.achieved_sup_c1_error <= 1.05 * a.report.achieved_sup_c1_error);
  CHECK(a.report.check_points > a.report.fit_points);
  CHECK(a.report.met_target == (a.report.achieved_sup_c1_error <= a.report.target));
  CHECK(*eigenvalue(a.field) == doctest::Approx(3 * kPi * kPi));
}

TEST_CASE("nested pair fit reaches the C1 target of 1/100 at N = 600") {
  const auto r = fit_eigenfunction(spec_of("[[]]"));
  CHECK(r.report.achieved_sup_c1_error <= 0.01);
}

TEST_CASE("u_eps at epsilon 0 is u0") {
  PlaneWaveSum pw;
  pw.wavevectors = Eigen::MatrixXd::Identity(3, 3) * kPi * std::sqrt(3.0);
  pw.cos_weights = Eigen::VectorXd::Ones(3);
  pw.sin_weights = Eigen::VectorXd::Zero(3);
  const EigenField u = assemble_u_eps(EigenField(pw), 0.0);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-2, 3);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector3d x(U(rng), U(rng), U(rng));
    CHECK(evaluate(u, x) == std::sin(kPi * x[0]) * std::sin(kPi * x[1]) * std::sin(kPi * x[2]));
  }
}

TEST_CASE("epsilon choice and transversality on the nested pair") {
  const PerturbationSpec s = spec_of("[[]]");
  const auto fit = fit_eigenfunction(s);
  const EpsilonChoice c = choose_epsilon(fit.field, s, 0.02);
  CHECK(c.delta > 0.0);
  CHECK(c.margin > 0.0);
  CHECK(c.epsilon == doctest::Approx(c.delta * c.delta / (4 * c.f_sup)));
  CHECK(c.checked_points > 0);

  const GradientReport g = verify_local_gradient(assemble_u_eps(fit.field, c.epsilon), s);
  CHECK(g.points > 0);
  CHECK(g.margin > 0.5);
  CHECK(g.ok);

  PlaneWaveSum zero;
  zero.wavevectors = Eigen::MatrixXd::Identity(3, 1) * kPi * std::sqrt(3.0);
  zero.cos_weights = Eigen::VectorXd::Zero(1);
  zero.sin_weights = Eigen::VectorXd::Zero(1);
  const GradientReport bad = verify_local_gradient(EigenField(zero), s);
  CHECK(bad.min_gradient == 0.0);
  CHECK_FALSE(bad.ok);

  const GradientReport leaf = verify_local_gradient(EigenField(zero), spec_of("[]"));
  CHECK(leaf.points == 0);
  CHECK(leaf.ok);
}

TEST_CASE("sign-feasible fit keeps the sign of h on the sibling pair") {
  const PerturbationSpec s = spec_of("[[],[]]");
  const auto r = fit_sign_feasible(s);
  CHECK(r.report.solver == "sign-feasible");
  CHECK(r.report.iterations > 0);
  int wrong = 0;
  for (const auto& e : s.edges) {
    if (e.rule != EdgeRule::Exterior) continue;
    for (int k = 0; k <= 8; ++k) {
      const Eigen::VectorXd x = face_point(e.face, k / 8.0);
      if (evaluate(r.field, x) * e.sign <= 0) ++wrong;
    }
  }
  CHECK(wrong == 0);
}

#include "wavetopo/eigenfield.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "wavetopo/specfun.hpp"

namespace wavetopo {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double sphere_area(int n) {
  // |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)
  return 2.0 * std::pow(kPi, n / 2.0) / std::tgamma(n / 2.0);
}

double pws_value_grad(const PlaneWaveSum& p, const Eigen::Ref<const Eigen::VectorXd>& x,
                      Eigen::VectorXd* grad) {
  const Eigen::VectorXd phase = p.wavevectors.transpose() * x;
  const Eigen::ArrayXd c = phase.array().cos();
  const Eigen::ArrayXd s = phase.array().sin();
  if (grad) {
    const Eigen::VectorXd w = (p.sin_weights.array() * c - p.cos_weights.array() * s).matrix();
    *grad = p.wavevectors * w;
  }
  return (p.cos_weights.array() * c + p.sin_weights.array() * s).sum();
}

double bessel_value_grad(const BesselHarmonicSum& b, const Eigen::Ref<const Eigen::VectorXd>& x,
                         Eigen::VectorXd* grad) {
  const double nu = specfun::order_for_dimension(b.n);
  const double r = x.norm();
  double value = 0.0;
  if (grad) grad->setZero(b.n);
  Eigen::VectorXd gp;
  for (const auto& t : b.terms) {
    const double P = specfun::solid_harmonic(b.n, t.l, t.m, x, grad ? &gp : nullptr);
    const double g = specfun::bessel_j_scaled(t.l + nu, r);
    value += t.coeff * P * g;
    if (grad) {
      // d/dr (J_mu/r^mu) = -r J_{mu+1}/r^{mu+1}
      const double g1 = specfun::bessel_j_scaled(t.l + nu + 1.0, r);
      *grad += t.coeff * (g * gp - P * g1 * x);
    }
  }
  return value;
}

double sines_value_grad(const ProductSines& p, const Eigen::Ref<const Eigen::VectorXd>& x,
                        Eigen::VectorXd* grad) {
  Eigen::ArrayXd s(p.n), c(p.n);
  for (int i = 0; i < p.n; ++i) {
    s[i] = std::sin(p.frequency * x[i]);
    c[i] = std::cos(p.frequency * x[i]);
  }
  if (grad) {
    grad->resize(p.n);
    for (int i = 0; i < p.n; ++i) {
      double prod = p.frequency * c[i];
      for (int j = 0; j < p.n; ++j)
        if (j != i) prod *= s[j];
      (*grad)[i] = prod;
    }
  }
  return s.prod();
}

double classic_value_grad(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd* grad) {
  const double sx = std::sin(kPi * x[0]), sy = std::sin(kPi * x[1]), sz = std::sin(kPi * x[2]);
  if (grad) {
    const double cx = std::cos(kPi * x[0]), cy = std::cos(kPi * x[1]), cz = std::cos(kPi * x[2]);
    grad->resize(3);
    (*grad)[0] = kPi * cx * (sy + sz);
    (*grad)[1] = kPi * cy * (sx + sz);
    (*grad)[2] = kPi * cz * (sx + sy);
  }
  return sx * sy + sx * sz + sy * sz;
}

double value_grad(const EigenField& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                  Eigen::VectorXd* grad) {
  if (x.size() != f.dim()) throw DomainError("evaluation point has wrong dimension");
  return std::visit(
      overloaded{
          [&](const PlaneWaveSum& p) { return pws_value_grad(p, x, grad); },
          [&](const BesselHarmonicSum& b) { return bessel_value_grad(b, x, grad); },
          [&](const ProductSines& p) { return sines_value_grad(p, x, grad); },
          [&](const Classic2Sines&) { return classic_value_grad(x, grad); },
          [&](const AffineCombo& a) {
            if (!grad) return evaluate(*a.base, x) + a.scale * evaluate(*a.add, x);
            Eigen::VectorXd g2;
            const double v = value_grad(*a.base, x, grad) + a.scale * value_grad(*a.add, x, &g2);
            *grad += a.scale * g2;
            return v;
          },
      },
      f.rep());
}

// Complex exponentials e^{i k_j^d x_d} for every grid coordinate of one axis.
Eigen::MatrixXcd axis_exponentials(const PlaneWaveSum& p, const GridSpec& g, int axis) {
  const int N = static_cast<int>(p.wavevectors.cols());
  Eigen::MatrixXcd E(g.size[axis], N);
  for (int i = 0; i < g.size[axis]; ++i) {
    const double t = g.origin[axis] + g.spacing * i;
    for (int j = 0; j < N; ++j) E(i, j) = std::polar(1.0, p.wavevectors(axis, j) * t);
  }
  return E;
}

Eigen::VectorXd pws_grid(const PlaneWaveSum& p, const GridSpec& g) {
  const int N = static_cast<int>(p.wavevectors.cols());
  Eigen::VectorXd out(g.count());
  if (N == 0) return out.setZero();
  const Eigen::MatrixXcd Ex = axis_exponentials(p, g, 0);
  const Eigen::MatrixXcd Ey = axis_exponentials(p, g, 1);
  Eigen::VectorXcd coef(N);
  for (int j = 0; j < N; ++j) coef[j] = std::complex<double>(p.cos_weights[j], -p.sin_weights[j]);
  const int nz = g.dim == 3 ? g.size[2] : 1;
  Eigen::MatrixXcd Ez;
  if (g.dim == 3) Ez = axis_exponentials(p, g, 2);
  Eigen::MatrixXcd right(N, g.size[1]);
  for (int k = 0; k < nz; ++k) {
    Eigen::VectorXcd c = coef;
    if (g.dim == 3) c.array() *= Ez.row(k).transpose().array();
    right.noalias() = c.asDiagonal() * Ey.transpose();
    const Eigen::MatrixXd slice = (Ex * right).real();
    // slice(i, j) -> index i + nx (j + ny k)
    Eigen::Map<Eigen::MatrixXd>(out.data() + g.index(0, 0, k), g.size[0], g.size[1]) = slice;
  }
  return out;
}

Eigen::VectorXd sines_grid(const ProductSines& p, const GridSpec& g) {
  std::array<Eigen::VectorXd, 3> s;
  for (int d = 0; d < 3; ++d) {
    s[d] = Eigen::VectorXd::Ones(g.size[d]);
    if (d < g.dim)
      for (int i = 0; i < g.size[d]; ++i)
        s[d][i] = std::sin(p.frequency * (g.origin[d] + g.spacing * i));
  }
  Eigen::VectorXd out(g.count());
  for (int k = 0; k < g.size[2]; ++k)
    for (int j = 0; j < g.size[1]; ++j)
      for (int i = 0; i < g.size[0]; ++i) out[g.index(i, j, k)] = s[0][i] * s[1][j] * s[2][k];
  return out;
}

void require_dim(int n, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != n) throw DomainError("direction has wrong dimension");
}

}  // namespace

EigenField::EigenField(PlaneWaveSum p) : dim_(static_cast<int>(p.wavevectors.rows())) {
  if (p.cos_weights.size() != p.wavevectors.cols() || p.sin_weights.size() != p.wavevectors.cols())
    throw DomainError("plane-wave weights do not match the number of waves");
  if (!p.wavevectors.allFinite() || !p.cos_weights.allFinite() || !p.sin_weights.allFinite())
    throw DomainError("plane-wave coefficients must be finite");
  rep_ = std::move(p);
}

EigenField::EigenField(BesselHarmonicSum b) : dim_(b.n) {
  if (b.n != 2 && b.n != 3) throw DomainError("Bessel sums support n = 2, 3");
  for (const auto& t : b.terms) {
    if (t.m < 1 || t.m > specfun::harmonic_dimension(b.n, t.l))
      throw DomainError("Bessel term has an invalid harmonic index");
    if (!std::isfinite(t.coeff)) throw DomainError("Bessel coefficient must be finite");
  }
  rep_ = std::move(b);
}

EigenField::EigenField(ProductSines p) : dim_(p.n) {
  if (p.n < 1) throw DomainError("product of sines needs n >= 1");
  rep_ = p;
}

EigenField::EigenField(Classic2Sines c) : rep_(c), dim_(3) {}

EigenField::EigenField(AffineCombo a) {
  if (!a.base || !a.add) throw DomainError("affine combination needs two fields");
  if (a.base->dim() != a.add->dim()) throw DomainError("affine combination dimension mismatch");
  dim_ = a.base->dim();
  rep_ = std::move(a);
}

double evaluate(const EigenField& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return value_grad(f, x, nullptr);
}

Eigen::VectorXd gradient(const EigenField& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd g;
  value_grad(f, x, &g);
  return g;
}

double value_and_gradient(const EigenField& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                          Eigen::VectorXd& grad) {
  return value_grad(f, x, &grad);
}

std::optional<double> eigenvalue(const EigenField& f) {
  return std::visit(
      overloaded{
          [](const PlaneWaveSum& p) -> std::optional<double> {
            if (p.wavevectors.cols() == 0) return std::nullopt;
            const Eigen::VectorXd k2 = p.wavevectors.colwise().squaredNorm();
            const double lo = k2.minCoeff(), hi = k2.maxCoeff();
            if (hi - lo > 1e-9 * std::max(1.0, hi)) return std::nullopt;
            return 0.5 * (lo + hi);
          },
          [](const BesselHarmonicSum&) -> std::optional<double> { return 1.0; },
          [](const ProductSines& p) -> std::optional<double> {
            return p.n * p.frequency * p.frequency;
          },
          [](const Classic2Sines&) -> std::optional<double> { return 2.0 * kPi * kPi; },
          [](const AffineCombo& a) -> std::optional<double> {
            const auto kb = eigenvalue(*a.base);
            if (a.scale == 0.0) return kb;
            const auto ka = eigenvalue(*a.add);
            if (!kb || !ka) return std::nullopt;
            if (std::fabs(*kb - *ka) > 1e-9 * std::max(1.0, *kb)) return std::nullopt;
            return *kb;
          },
      },
      f.rep());
}

Eigen::VectorXd evaluate_grid(const EigenField& f, const GridSpec& grid) {
  if (grid.dim != f.dim()) throw DomainError("grid dimension does not match the field");
  if (const auto* p = std::get_if<PlaneWaveSum>(&f.rep())) return pws_grid(*p, grid);
  if (const auto* p = std::get_if<ProductSines>(&f.rep())) return sines_grid(*p, grid);
  if (const auto* a = std::get_if<AffineCombo>(&f.rep())) {
    Eigen::VectorXd v = evaluate_grid(*a->base, grid);
    if (a->scale != 0.0) v += a->scale * evaluate_grid(*a->add, grid);
    return v;
  }
  Eigen::VectorXd out(grid.count());
  for (std::int64_t i = 0; i < grid.count(); ++i) out[i] = evaluate(f, grid.point(i));
  return out;
}

EigenField affine_combo(const EigenField& base, const EigenField& add, double scale) {
  return EigenField(AffineCombo{std::make_shared<const EigenField>(base),
                                std::make_shared<const EigenField>(add), scale});
}

EigenField sample_rpw(const FieldSampleParams& params) {
  if (params.n < 1 || params.N < 1) throw DomainError("sample_rpw: need n >= 1 and N >= 1");
  if (!(params.alpha >= 0.0 && params.alpha <= 1.0))
    throw DomainError("sample_rpw: alpha must lie in [0, 1]");
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = params.n, N = params.N;
  PlaneWaveSum p;
  p.wavevectors.resize(n, N);
  p.cos_weights.resize(N);
  p.sin_weights.resize(N);
  const double scale = 1.0 / std::sqrt(static_cast<double>(N));
  for (int j = 0; j < N; ++j) {
    Eigen::VectorXd v(n);
    do {
      for (int d = 0; d < n; ++d) v[d] = gauss(rng);
    } while (v.norm() == 0.0);
    v.normalize();
    if (params.alpha < 1.0) {
      // density proportional to r^{n-1} on [alpha, 1]
      const double an = std::pow(params.alpha, n);
      v *= std::pow(an + unif(rng) * (1.0 - an), 1.0 / n);
    }
    p.wavevectors.col(j) = v;
    p.cos_weights[j] = scale * gauss(rng);
    p.sin_weights[j] = scale * gauss(rng);
  }
  return EigenField(std::move(p));
}

EigenField bessel_mode(int n, int l, int m) {
  if (n != 2 && n != 3) throw DomainError("bessel_mode supports n = 2, 3");
  if (l < 0 || m < 1 || m > specfun::harmonic_dimension(n, l))
    throw DomainError("bessel_mode: invalid harmonic index");
  return EigenField(BesselHarmonicSum{n, {{l, m, 1.0}}});
}

std::pair<double, double> planewave_transform_check(int n, int l, int m,
                                                    const Eigen::Ref<const Eigen::VectorXd>& x,
                                                    double tol) {
  require_dim(n, x);
  const double r = x.norm();
  if (!(r > 0.0)) throw DomainError("planewave_transform_check needs |x| > 0");
  const double nu = specfun::order_for_dimension(n);
  const Eigen::VectorXd xhat = x / r;
  const double rhs = std::pow(2.0 * kPi, n / 2.0) * specfun::real_spherical_harmonic(n, l, m, xhat) *
                     specfun::bessel_j_scaled(l + nu, r) * std::pow(r, l);

  auto integrate = [&](int level) {
    std::complex<double> acc = 0.0;
    if (n == 2) {
      const int M = level;
      const double w = 2.0 * kPi / M;
      Eigen::VectorXd xi(2);
      for (int j = 0; j < M; ++j) {
        const double th = w * j;
        xi << std::cos(th), std::sin(th);
        acc += w * std::polar(1.0, -x.dot(xi)) * specfun::solid_harmonic(2, l, m, xi);
      }
    } else {
      const auto [t, wt] = specfun::gauss_legendre(level);
      const int M = 2 * level;
      const double wp = 2.0 * kPi / M;
      Eigen::VectorXd xi(3);
      for (std::size_t a = 0; a < t.size(); ++a) {
        const double st = std::sqrt(std::max(0.0, 1.0 - t[a] * t[a]));
        for (int j = 0; j < M; ++j) {
          const double ph = wp * j;
          xi << st * std::cos(ph), st * std::sin(ph), t[a];
          acc += wt[a] * wp * std::polar(1.0, -x.dot(xi)) * specfun::solid_harmonic(3, l, m, xi);
        }
      }
    }
    // i^l rotates the transform onto the real axis
    return (std::pow(std::complex<double>(0.0, 1.0), l) * acc).real();
  };

  int level = static_cast<int>(std::ceil(r + l)) + 16;
  if (n == 2) level *= 2;
  double prev = integrate(level);
  for (int it = 0; it < 6; ++it) {
    level *= 2;
    const double cur = integrate(level);
    if (std::fabs(cur - prev) <= tol * std::max(1.0, std::fabs(cur))) return {cur, rhs};
    prev = cur;
  }
  throw QuadratureError("planewave_transform_check: quadrature did not converge");
}

Eigen::MatrixXd direction_set(int n, int N) {
  if (N < 1) throw DomainError("direction_set: N must be >= 1");
  Eigen::MatrixXd D(n, N);
  if (n == 2) {
    for (int j = 0; j < N; ++j) {
      const double th = kPi * j / N;
      D.col(j) << std::cos(th), std::sin(th);
    }
  } else if (n == 3) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < N; ++j) {
      const double z = 1.0 - (2.0 * j + 1.0) / N;
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      D.col(j) << s * std::cos(golden * j), s * std::sin(golden * j), z;
    }
  } else {
    throw DomainError("direction_set supports n = 2, 3");
  }
  return D;
}

ModeApproximation approximate_mode_by_planewaves(int n, int l, int m, int N, double radius) {
  const EigenField mode = bessel_mode(n, l, m);
  const Eigen::MatrixXd D = direction_set(n, N);
  // Symmetric quadrature over the pairs +-xi_j with equal weights.
  const double w = sphere_area(n) / (2.0 * N) / std::pow(2.0 * kPi, n / 2.0);
  PlaneWaveSum p;
  p.wavevectors = D;
  p.cos_weights.setZero(N);
  p.sin_weights.setZero(N);
  for (int j = 0; j < N; ++j) {
    const double y = specfun::solid_harmonic(n, l, m, D.col(j));
    if (l % 2 == 0)
      p.cos_weights[j] = w * 2.0 * ((l / 2) % 2 == 0 ? 1.0 : -1.0) * y;
    else
      p.sin_weights[j] = -w * 2.0 * (((l + 1) / 2) % 2 == 0 ? 1.0 : -1.0) * y;
  }
  EigenField field(std::move(p));

  double err = 0.0;
  const int per_axis = n == 2 ? 41 : 17;
  Eigen::VectorXd x(n);
  const int total = static_cast<int>(std::pow(per_axis, n));
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    for (int d = 0; d < n; ++d) {
      x[d] = -radius + 2.0 * radius * (rem % per_axis) / (per_axis - 1);
      rem /= per_axis;
    }
    if (x.norm() > radius) continue;
    err = std::max(err, std::fabs(evaluate(field, x) - evaluate(mode, x)));
  }
  return {std::move(field), err};
}

double laplacian_residual(const EigenField& f, const Box& box, double h, int points_per_axis) {
  if (!(h > 0.0)) throw DomainError("laplacian_residual: h must be positive");
  const auto k2 = eigenvalue(f);
  if (!k2) throw DomainError("laplacian_residual: field has no single eigenvalue");
  const int n = f.dim();
  if (box.dim() != n) throw DomainError("laplacian_residual: box dimension mismatch");
  const int P = std::max(2, points_per_axis);
  double worst = 0.0;
  std::int64_t total = 1;
  for (int d = 0; d < n; ++d) total *= P;
  Eigen::VectorXd x(n), y(n);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    std::int64_t rem = idx;
    for (int d = 0; d < n; ++d) {
      x[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * double(rem % P) / (P - 1);
      rem /= P;
    }
    const double f0 = evaluate(f, x);
    double lap = 0.0;
    for (int d = 0; d < n; ++d) {
      y = x;
      y[d] += h;
      const double fp = evaluate(f, y);
      y[d] = x[d] - h;
      const double fm = evaluate(f, y);
      lap += (fp - 2.0 * f0 + fm) / (h * h);
    }
    worst = std::max(worst, std::fabs(lap + *k2 * f0));
  }
  return worst;
}

nlohmann::json to_json(const EigenField& f) {
  using nlohmann::json;
  return std::visit(
      overloaded{
          [&](const PlaneWaveSum& p) {
            json terms = json::array();
            for (Eigen::Index j = 0; j < p.wavevectors.cols(); ++j) {
              std::vector<double> k(p.wavevectors.col(j).data(),
                                    p.wavevectors.col(j).data() + p.wavevectors.rows());
              terms.push_back({{"k", k}, {"a", p.cos_weights[j]}, {"b", p.sin_weights[j]}});
            }
            return json{{"type", "plane_wave_sum"}, {"n", f.dim()}, {"terms", terms}};
          },
          [&](const BesselHarmonicSum& b) {
            json terms = json::array();
            for (const auto& t : b.terms) terms.push_back({{"l", t.l}, {"m", t.m}, {"c", t.coeff}});
            return json{{"type", "bessel_harmonic_sum"}, {"n", b.n}, {"terms", terms}};
          },
          [&](const ProductSines& p) {
            return json{{"type", "product_sines"},
                        {"n", p.n},
                        {"terms", json::array({{{"frequency", p.frequency}}})}};
          },
          [&](const Classic2Sines&) {
            return json{{"type", "classic_two_sines"}, {"n", 3}, {"terms", json::array()}};
          },
          [&](const AffineCombo& a) {
            return json{{"type", "affine_combo"},
                        {"n", f.dim()},
                        {"terms", json::array({{{"scale", a.scale},
                                                {"base", to_json(*a.base)},
                                                {"add", to_json(*a.add)}}})}};
          },
      },
      f.rep());
}

EigenField field_from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    const int n = j.at("n").get<int>();
    const auto& terms = j.at("terms");
    if (type == "plane_wave_sum") {
      PlaneWaveSum p;
      const int N = static_cast<int>(terms.size());
      p.wavevectors.resize(n, N);
      p.cos_weights.resize(N);
      p.sin_weights.resize(N);
      for (int c = 0; c < N; ++c) {
        const auto k = terms[c].at("k").get<std::vector<double>>();
        if (static_cast<int>(k.size()) != n) throw ParseError("wave vector has wrong dimension");
        for (int d = 0; d < n; ++d) p.wavevectors(d, c) = k[d];
        p.cos_weights[c] = terms[c].at("a").get<double>();
        p.sin_weights[c] = terms[c].at("b").get<double>();
      }
      return EigenField(std::move(p));
    }
    if (type == "bessel_harmonic_sum") {
      BesselHarmonicSum b{n, {}};
      for (const auto& t : terms)
        b.terms.push_back({t.at("l").get<int>(), t.at("m").get<int>(), t.at("c").get<double>()});
      return EigenField(std::move(b));
    }
    if (type == "product_sines") {
      ProductSines p{n};
      if (!terms.empty()) p.frequency = terms[0].at("frequency").get<double>();
      return EigenField(p);
    }
    if (type == "classic_two_sines") return EigenField(Classic2Sines{});
    if (type == "affine_combo") {
      const auto& t = terms.at(0);
      return affine_combo(field_from_json(t.at("base")), field_from_json(t.at("add")),
                          t.at("scale").get<double>());
    }
    throw ParseError("unknown field type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed field JSON: ") + e.what());
  }
}

}  // namespace wavetopo

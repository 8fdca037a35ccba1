#include "wavetopo/perturb.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

namespace wavetopo {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<int> free_axes(const LatticeFace& f) {
  std::vector<int> ax;
  for (int i = 0; i < static_cast<int>(f.base.size()); ++i)
    if (f.is_free(i)) ax.push_back(i);
  return ax;
}

bool same_label(const EdgeTarget& a, const EdgeTarget& b) {
  return a.rule == b.rule && a.sign == b.sign && a.anchor == b.anchor &&
         a.connecting == b.connecting;
}

Eigen::VectorXd to_vec(const LatticePoint& p) {
  Eigen::VectorXd v(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) v[i] = p[i];
  return v;
}

// Hemisphere directions so that +k and -k never both appear.
Eigen::MatrixXd half_directions(int n, int N) {
  if (n == 2) return direction_set(2, N);
  if (n == 3) return direction_set(3, 2 * N).leftCols(N);
  throw DomainError("plane-wave fits support n = 2, 3");
}

// Value row followed by n gradient rows for each point in [first, last).
void design_rows(const Eigen::MatrixXd& K, const TargetSamples& t, const Eigen::VectorXd& centre,
                 Eigen::Index first, Eigen::Index last, Eigen::MatrixXd& A, double gw = 1.0) {
  const int n = static_cast<int>(K.rows());
  const Eigen::Index N = K.cols();
  A.resize((last - first) * (n + 1), 2 * N);
  for (Eigen::Index p = first; p < last; ++p) {
    const Eigen::RowVectorXd phase = (t.points.col(p) - centre).transpose() * K;
    const Eigen::RowVectorXd c = phase.array().cos();
    const Eigen::RowVectorXd s = phase.array().sin();
    const Eigen::Index r = (p - first) * (n + 1);
    A.row(r).head(N) = c;
    A.row(r).tail(N) = s;
    for (int i = 0; i < n; ++i) {
      A.row(r + 1 + i).head(N) = -gw * K.row(i).cwiseProduct(s);
      A.row(r + 1 + i).tail(N) = gw * K.row(i).cwiseProduct(c);
    }
  }
}

Eigen::VectorXd target_rows(const TargetSamples& t, Eigen::Index first, Eigen::Index last,
                            double gw = 1.0) {
  const int n = static_cast<int>(t.points.rows());
  Eigen::VectorXd y((last - first) * (n + 1));
  for (Eigen::Index p = first; p < last; ++p) {
    const Eigen::Index r = (p - first) * (n + 1);
    y[r] = t.values[p];
    y.segment(r + 1, n) = gw * t.gradients.col(p);
  }
  return y;
}


// Max value, gradient and C^1 errors on the check set, in the centred frame.
void check_errors(const Eigen::MatrixXd& K, const TargetSamples& check, const Eigen::VectorXd& centre,
                  const Eigen::VectorXd& coef, FitReport& rep) {
  const int n = static_cast<int>(K.rows());
  const Eigen::Index Mc = check.points.cols();
  const Eigen::Index chunk = 512;
  Eigen::MatrixXd A;
  for (Eigen::Index p = 0; p < Mc; p += chunk) {
    const Eigen::Index q = std::min(Mc, p + chunk);
    design_rows(K, check, centre, p, q, A);
    const Eigen::VectorXd pred = A * coef;
    for (Eigen::Index m = p; m < q; ++m) {
      const Eigen::Index r = (m - p) * (n + 1);
      const double ev = std::abs(pred[r] - check.values[m]);
      const double eg = (pred.segment(r + 1, n) - check.gradients.col(m)).norm();
      rep.max_value_error = std::max(rep.max_value_error, ev);
      rep.max_gradient_error = std::max(rep.max_gradient_error, eg);
      rep.achieved_sup_c1_error = std::max(rep.achieved_sup_c1_error, ev + eg);
    }
  }
}

// cos(k(x-c)) = cos(kx)cos(kc) + sin(kx)sin(kc).
EigenField to_global(const Eigen::MatrixXd& K, const Eigen::VectorXd& centre, const Eigen::VectorXd& coef) {
  const Eigen::Index N = K.cols();
  PlaneWaveSum pw;
  pw.wavevectors = K;
  pw.cos_weights.resize(N);
  pw.sin_weights.resize(N);
  for (Eigen::Index j = 0; j < N; ++j) {
    const double kc = K.col(j).dot(centre);
    const double a = coef[j], b = coef[N + j];
    pw.cos_weights[j] = a * std::cos(kc) - b * std::sin(kc);
    pw.sin_weights[j] = a * std::sin(kc) + b * std::cos(kc);
  }
  return EigenField(std::move(pw));
}

}  // namespace

double chi(double t) {
  if (t <= 0.0) return -1.0;
  if (t >= 1.0) return 1.0;
  return -std::cos(kPi * t);
}

double chi_prime(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return kPi * std::sin(kPi * t);
}

double target_value(const EdgeTarget& e, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  const int n = static_cast<int>(x.size());
  if (grad) grad->setZero(n);
  switch (e.rule) {
    case EdgeRule::Exterior:
      return e.sign;
    case EdgeRule::Interior: {
      double r2 = 0.0;
      for (int i : e.connecting) r2 += (x[i] - e.anchor[i]) * (x[i] - e.anchor[i]);
      const double r = std::sqrt(r2);
      if (grad && r > 0.0)
        for (int i : e.connecting) (*grad)[i] = e.sign * chi_prime(r) * (x[i] - e.anchor[i]) / r;
      return e.sign * chi(r);
    }
    case EdgeRule::Join: {
      double r2 = 0.0;
      for (int i = 0; i < n; ++i)
        if (e.face.is_free(i)) {
          const double d = x[i] - (e.face.base[i] + 0.5);
          r2 += d * d;
        }
      const double r = std::sqrt(r2);
      if (grad && r > 0.0)
        for (int i = 0; i < n; ++i)
          if (e.face.is_free(i))
            (*grad)[i] = e.sign * chi_prime(2.0 * r) * 2.0 * (x[i] - (e.face.base[i] + 0.5)) / r;
      return e.sign * chi(2.0 * r);
    }
  }
  return 0.0;
}

PerturbationSpec build_h(const StructureAssembly& a) {
  if (a.dim < 3) throw DomainError("build_h needs n >= 3");
  const int n = a.dim;
  std::map<LatticeFace, EdgeTarget> labels;
  auto put = [&](EdgeTarget t) {
    auto [it, inserted] = labels.emplace(t.face, t);
    if (!inserted && !same_label(it->second, t))
      throw InvalidStructure("face labeled by nodes " + std::to_string(it->second.node) + " and " +
                             std::to_string(t.node) + " with different rules");
  };

  for (int v = 0; v < static_cast<int>(a.nodes.size()); ++v) {
    const int s = a.nodes[v].structure.polarity == Polarity::Minus ? 1 : -1;
    const EdgeClasses cls = classify_edges(a, v);
    for (const auto& f : cls.exterior) put({f, EdgeRule::Exterior, v, s, {}, {}});
    for (const auto& f : cls.join) put({f, EdgeRule::Join, v, s, {}, {}});
    for (std::size_t k = 0; k < cls.interior.size(); ++k) {
      const auto& f = cls.interior[k];
      const auto& inner = cls.interior_anchors[k];
      EdgeTarget t{f, EdgeRule::Interior, v, s, inner.front(), {}};
      for (int i : free_axes(f)) {
        bool shared = true;
        for (const auto& p : inner) shared = shared && p[i] == inner.front()[i];
        if (shared) t.connecting.push_back(i);
      }
      if (t.connecting.empty())
        throw InvalidStructure("interior face without a connecting direction");
      put(std::move(t));
    }
  }

  PerturbationSpec spec;
  spec.dim = n;
  spec.root = a.root_structure();
  for (const auto& f : structure_edges(spec.root))
    if (!labels.count(f)) {
      std::string where;
      for (int c : f.base) where += std::to_string(c) + " ";
      throw UnlabeledEdge("root face at " + where + "has no rule");
    }

  // Vertex values must agree across incident faces.
  std::map<LatticePoint, double> vertex_value;
  LatticePoint lo(n, std::numeric_limits<int>::max()), hi(n, std::numeric_limits<int>::min());
  for (const auto& [f, t] : labels) {
    for (const auto& v : f.vertices()) {
      const double h = target_value(t, to_vec(v));
      auto [it, inserted] = vertex_value.emplace(v, h);
      if (!inserted && std::abs(it->second - h) > 1e-12)
        throw InvalidStructure("inconsistent h at a vertex of node " + std::to_string(t.node));
      for (int i = 0; i < n; ++i) {
        lo[i] = std::min(lo[i], v[i]);
        hi[i] = std::max(hi[i], v[i]);
      }
    }
    spec.edges.push_back(t);
  }
  for (const auto& c : spec.root.cubes)
    for (int i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], c[i]);
      hi[i] = std::max(hi[i], c[i] + 1);
    }
  spec.bounds = {to_vec(lo), to_vec(hi)};
  return spec;
}

TargetSamples sample_targets(const PerturbationSpec& spec, int per_unit) {
  if (per_unit < 1) throw DomainError("sample density must be >= 1");
  const int n = spec.dim;
  struct Acc {
    double value;
    Eigen::VectorXd grad;
    std::vector<int> hits;  // faces contributing per axis
  };
  std::map<std::vector<long long>, Acc> pts;
  for (const auto& e : spec.edges) {
    const auto axes = free_axes(e.face);
    const int d = static_cast<int>(axes.size());
    std::vector<int> k(d, 0);
    while (true) {
      std::vector<long long> key(n);
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) key[i] = static_cast<long long>(e.face.base[i]) * per_unit;
      for (int j = 0; j < d; ++j) key[axes[j]] += k[j];
      for (int i = 0; i < n; ++i) x[i] = static_cast<double>(key[i]) / per_unit;
      Eigen::VectorXd g;
      const double h = target_value(e, x, &g);
      auto it = pts.find(key);
      if (it == pts.end()) {
        Acc acc{h, Eigen::VectorXd::Zero(n), std::vector<int>(n, 0)};
        it = pts.emplace(std::move(key), std::move(acc)).first;
      } else if (std::abs(it->second.value - h) > 1e-9) {
        throw InvalidStructure("h differs between faces at a shared point");
      }
      // Each face knows only its tangential components.
      for (int j : axes) {
        it->second.grad[j] += g[j];
        ++it->second.hits[j];
      }
      int j = 0;
      while (j < d && k[j] == per_unit) k[j++] = 0;
      if (j == d) break;
      ++k[j];
    }
  }
  TargetSamples out;
  const Eigen::Index M = static_cast<Eigen::Index>(pts.size());
  out.points.resize(n, M);
  out.values.resize(M);
  out.gradients.resize(n, M);
  Eigen::Index m = 0;
  for (const auto& [key, acc] : pts) {
    for (int i = 0; i < n; ++i) {
      out.points(i, m) = static_cast<double>(key[i]) / per_unit;
      out.gradients(i, m) = acc.hits[i] ? acc.grad[i] / acc.hits[i] : 0.0;
    }
    out.values[m] = acc.value;
    ++m;
  }
  return out;
}

void write_samples_csv(std::ostream& os, const TargetSamples& s) {
  const int n = static_cast<int>(s.points.rows());
  for (int i = 0; i < n; ++i) os << "x" << i + 1 << ",";
  os << "h";
  for (int i = 0; i < n; ++i) os << ",dh" << i + 1;
  os << "\n";
  os.precision(17);
  for (Eigen::Index m = 0; m < s.points.cols(); ++m) {
    for (int i = 0; i < n; ++i) os << s.points(i, m) << ",";
    os << s.values[m];
    for (int i = 0; i < n; ++i) os << "," << s.gradients(i, m);
    os << "\n";
  }
}

nlohmann::json to_json(const FitReport& r) {
  nlohmann::json j{{"achieved_sup_c1_error", r.achieved_sup_c1_error},
          {"max_value_error", r.max_value_error},
          {"max_gradient_error", r.max_gradient_error},
          {"fit_rms", r.fit_rms},
          {"basis_size", r.basis_size},
          {"rank", r.rank},
          {"svd_cutoff", r.svd_cutoff},
          {"condition_estimate", r.condition_estimate},
          {"fit_points", r.fit_points},
          {"check_points", r.check_points},
          {"frequency", r.frequency},
          {"target", r.target},
          {"met_target", r.met_target},
          {"solver", r.solver}};
  if (r.iterations > 0) j["iterations"] = r.iterations;
  return j;
}

FitResult fit_to_samples(const TargetSamples& fit, const TargetSamples& check,
                         const Eigen::VectorXd& centre, const FitOptions& opt) {
  const int n = static_cast<int>(fit.points.rows());
  if (opt.basis_size < 2) throw DomainError("basis size must be >= 2");
  if (fit.points.cols() == 0) throw DomainError("no fit samples");
  const double kappa = opt.frequency > 0.0 ? opt.frequency : kPi * std::sqrt(double(n));
  const int N = opt.basis_size;
  const Eigen::MatrixXd K = kappa * half_directions(n, N);
  const Eigen::Index M = fit.points.cols();
  const Eigen::Index rows = M * (n + 1), cols = 2 * N;

  FitReport rep;
  rep.basis_size = N;
  rep.frequency = kappa;
  rep.target = opt.target;
  rep.fit_points = static_cast<int>(M);
  rep.check_points = static_cast<int>(check.points.cols());

  Eigen::VectorXd coef;
  if (static_cast<long long>(rows) * cols <= opt.direct_svd_limit) {
    Eigen::MatrixXd A;
    design_rows(K, fit, centre, 0, M, A, opt.gradient_weight);
    const Eigen::VectorXd y = target_rows(fit, 0, M, opt.gradient_weight);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double floor = opt.svd_cutoff * sv[0];
    int r = 0;
    while (r < sv.size() && sv[r] > floor) ++r;
    if (r == 0) throw SingularFit("all singular values below the cutoff");
    const Eigen::VectorXd uty = svd.matrixU().leftCols(r).transpose() * y;
    coef = svd.matrixV().leftCols(r) * uty.cwiseQuotient(sv.head(r));
    rep.rank = r;
    rep.svd_cutoff = opt.svd_cutoff;
    rep.condition_estimate = sv[0] / sv[r - 1];
    rep.solver = "bdcsvd";
    rep.fit_rms = std::sqrt((A * coef - y).squaredNorm() / rows);
  } else {
    // Normal equations; the eigenvalues of A^T A resolve singular values only
    // down to about 1e-7 of the largest, so the cutoff is clamped there.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(cols, cols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(cols);
    double yy = 0.0;
    const Eigen::Index chunk = 512;
    Eigen::MatrixXd A;
    for (Eigen::Index p = 0; p < M; p += chunk) {
      const Eigen::Index q = std::min(M, p + chunk);
      design_rows(K, fit, centre, p, q, A, opt.gradient_weight);
      const Eigen::VectorXd y = target_rows(fit, p, q, opt.gradient_weight);
      G.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
      b.noalias() += A.transpose() * y;
      yy += y.squaredNorm();
    }
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    const Eigen::VectorXd& lam = eig.eigenvalues();  // ascending
    const double cutoff = std::max(opt.svd_cutoff, 1e-7);
    const double lmax = lam[cols - 1];
    const double floor = cutoff * cutoff * lmax;
    Eigen::Index first = cols;
    while (first > 0 && lam[first - 1] > floor) --first;
    const Eigen::Index r = cols - first;
    if (r == 0 || !(lmax > 0.0)) throw SingularFit("all singular values below the cutoff");
    const auto V = eig.eigenvectors().rightCols(r);
    const Eigen::VectorXd vb = V.transpose() * b;
    coef = V * vb.cwiseQuotient(lam.tail(r));
    rep.rank = static_cast<int>(r);
    rep.svd_cutoff = cutoff;
    rep.condition_estimate = std::sqrt(lmax / lam[first]);
    rep.solver = "gram-eigen";
    // |Ac - y|^2 = c'Gc - 2 c'b + y'y
    const double res2 = coef.dot(G * coef) - 2.0 * coef.dot(b) + yy;
    rep.fit_rms = std::sqrt(std::max(0.0, res2) / rows);
  }

  check_errors(K, check, centre, coef, rep);
  rep.met_target = rep.achieved_sup_c1_error <= opt.target;
  return {to_global(K, centre, coef), rep};
}

FitResult fit_eigenfunction(const PerturbationSpec& spec, const FitOptions& opt) {
  if (opt.samples_per_unit < 1 || opt.check_factor < 1)
    throw DomainError("sample densities must be positive");
  const TargetSamples fit = sample_targets(spec, opt.samples_per_unit);
  const TargetSamples check = sample_targets(spec, opt.samples_per_unit * opt.check_factor);
  const Eigen::VectorXd centre = 0.5 * (spec.bounds.lo + spec.bounds.hi);
  return fit_to_samples(fit, check, centre, opt);
}

FitResult fit_sign_feasible(const PerturbationSpec& spec, const FitOptions& opt,
                            const SignFitOptions& so) {
  if (opt.samples_per_unit < 1 || opt.check_factor < 1)
    throw DomainError("sample densities must be positive");
  if (!(so.rho > 0.0) || !(so.upper > so.rho) || so.ridge < 0.0)
    throw DomainError("sign fit needs 0 < rho < upper and ridge >= 0");
  const TargetSamples S = sample_targets(spec, opt.samples_per_unit);
  const TargetSamples check = sample_targets(spec, opt.samples_per_unit * opt.check_factor);
  const Eigen::VectorXd centre = 0.5 * (spec.bounds.lo + spec.bounds.hi);
  const int n = spec.dim;
  const double kappa = opt.frequency > 0.0 ? opt.frequency : kPi * std::sqrt(double(n));
  const int N = opt.basis_size;
  if (N < 2) throw DomainError("basis size must be >= 2");
  const Eigen::MatrixXd K = kappa * half_directions(n, N);
  const Eigen::Index M = S.points.cols(), cols = 2 * N;

  // Value rows for every sample; two-sided samples also fit the gradient.
  Eigen::MatrixXd V(M, cols);
  std::vector<Eigen::Index> two, one;
  for (Eigen::Index p = 0; p < M; ++p) {
    const Eigen::RowVectorXd ph = (S.points.col(p) - centre).transpose() * K;
    V.row(p).head(N) = ph.array().cos();
    V.row(p).tail(N) = ph.array().sin();
    (std::abs(S.values[p]) < so.tau ? two : one).push_back(p);
  }
  Eigen::MatrixXd Gfix = Eigen::MatrixXd::Zero(cols, cols);
  Eigen::VectorXd bfix = Eigen::VectorXd::Zero(cols);
  double yyfix = 0.0;
  if (!two.empty()) {
    TargetSamples t;
    t.points.resize(n, Eigen::Index(two.size()));
    t.values.resize(Eigen::Index(two.size()));
    t.gradients.resize(n, Eigen::Index(two.size()));
    for (std::size_t i = 0; i < two.size(); ++i) {
      t.points.col(i) = S.points.col(two[i]);
      t.values[i] = S.values[two[i]];
      t.gradients.col(i) = S.gradients.col(two[i]);
    }
    Eigen::MatrixXd A;
    design_rows(K, t, centre, 0, t.points.cols(), A, opt.gradient_weight);
    const Eigen::VectorXd y = target_rows(t, 0, t.points.cols(), opt.gradient_weight);
    Gfix.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
    Gfix.triangularView<Eigen::StrictlyUpper>() = Gfix.transpose();
    bfix = A.transpose() * y;
    yyfix = y.squaredNorm();
  }
  const double lambda =
      so.ridge * std::max(two.empty() ? 0.0 : Gfix.diagonal().maxCoeff(), V.colwise().squaredNorm().maxCoeff());

  // One-sided samples: sign(h) f should lie in [rho |h|, upper]. State -1
  // pulls to the lower bound, +1 to the upper one, 0 leaves the sample free.
  auto bound = [&](Eigen::Index p, int state) {
    const double h = S.values[p];
    return (state < 0 ? so.rho * std::abs(h) : so.upper) * (h > 0 ? 1.0 : -1.0);
  };
  auto objective = [&](const Eigen::VectorXd& c, const Eigen::VectorXd& f) {
    double v = c.dot(Gfix * c) - 2.0 * bfix.dot(c) + yyfix + lambda * c.squaredNorm();
    for (Eigen::Index p : one) {
      const double m = f[p] * (S.values[p] > 0 ? 1.0 : -1.0);
      const double lo = so.rho * std::abs(S.values[p]);
      if (m < lo) v += (lo - m) * (lo - m);
      else if (m > so.upper) v += (m - so.upper) * (m - so.upper);
    }
    return v;
  };
  std::vector<int> state(M, 0), in_gram(M, 0);
  for (Eigen::Index p : one) state[p] = -1;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(cols), f = Eigen::VectorXd::Zero(M);
  double current = objective(coef, f);
  Eigen::MatrixXd Gact = Eigen::MatrixXd::Zero(cols, cols);
  Eigen::VectorXd bact = Eigen::VectorXd::Zero(cols);
  auto update = [&](const std::vector<Eigen::Index>& rows, double sign, const std::vector<int>& st) {
    if (rows.empty()) return;
    Eigen::MatrixXd B(Eigen::Index(rows.size()), cols);
    Eigen::VectorXd y(Eigen::Index(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      B.row(r) = V.row(rows[r]);
      y[r] = bound(rows[r], st[rows[r]]);
    }
    Gact.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose(), sign);
    bact.noalias() += sign * (B.transpose() * y);
  };
  int iterations = 0;
  for (; iterations < so.max_iterations; ++iterations) {
    std::vector<Eigen::Index> added, removed;
    for (Eigen::Index p : one)
      if (state[p] != in_gram[p]) {
        if (in_gram[p]) removed.push_back(p);
        if (state[p]) added.push_back(p);
      }
    update(removed, -1.0, in_gram);
    update(added, 1.0, state);
    for (Eigen::Index p : one) in_gram[p] = state[p];

    Eigen::MatrixXd G = Gfix + Gact;  // Gact holds only its lower triangle
    G.diagonal().array() += lambda;
    const Eigen::VectorXd step = G.selfadjointView<Eigen::Lower>().llt().solve(bfix + bact) - coef;
    const Eigen::VectorXd fstep = V * step;
    // Backtracking keeps the piecewise quadratic objective monotone.
    double t = 1.0, value = 0.0;
    Eigen::VectorXd ct, ft;
    while (true) {
      ct = coef + t * step;
      ft = f + t * fstep;
      value = objective(ct, ft);
      if (value <= current || t < 1e-4) break;
      t *= 0.5;
    }
    coef = std::move(ct);
    f = std::move(ft);
    const double previous = current;
    current = value;
    int changed = 0;
    for (Eigen::Index p : one) {
      const double m = f[p] * (S.values[p] > 0 ? 1.0 : -1.0);
      const int s = m < so.rho * std::abs(S.values[p]) ? -1 : (m > so.upper ? 1 : 0);
      if (s != state[p]) {
        state[p] = s;
        ++changed;
      }
    }
    if (changed == 0 || previous - current < 1e-10 * previous) {
      ++iterations;
      break;
    }
  }

  FitReport rep;
  rep.basis_size = N;
  rep.frequency = kappa;
  rep.target = opt.target;
  rep.fit_points = static_cast<int>(M);
  rep.check_points = static_cast<int>(check.points.cols());
  rep.rank = static_cast<int>(cols);
  rep.svd_cutoff = so.ridge;
  rep.condition_estimate = 0.0;
  rep.solver = "sign-feasible";
  rep.iterations = iterations;
  rep.fit_rms = std::sqrt(std::max(0.0, current) / double(M + Eigen::Index(two.size()) * n));
  check_errors(K, check, centre, coef, rep);
  rep.met_target = rep.achieved_sup_c1_error <= opt.target;
  return {to_global(K, centre, coef), rep};
}

EigenField assemble_u_eps(const EigenField& f, double epsilon) {
  return affine_combo(EigenField(ProductSines{f.dim(), kPi}), f, epsilon);
}

namespace {

// Scan on precomputed f values of a lattice-aligned grid.
EpsilonChoice scan_epsilon(const Eigen::VectorXd& fvals, const GridSpec& grid,
                           const PerturbationSpec& spec, double min_delta) {
  const int n = grid.dim;
  std::vector<char> inside(grid.count(), 0);
  std::vector<double> u0(grid.count(), 0.0), d1(grid.count(), 0.0), dl(grid.count(), 0.0);
  double fsup = 0.0;
  for (std::int64_t idx = 0; idx < grid.count(); ++idx) {
    const Eigen::VectorXd x = grid.point(idx);
    LatticePoint cell(n);
    std::vector<double> d(n);
    double u = 1.0;
    for (int i = 0; i < n; ++i) {
      cell[i] = static_cast<int>(std::floor(x[i]));
      d[i] = std::abs(x[i] - std::round(x[i]));
      u *= std::sin(kPi * x[i]);
    }
    bool in = spec.root.contains(cell);
    // Points on a cube face belong to the closed structure as well.
    if (!in)
      for (int i = 0; i < n && !in; ++i)
        if (d[i] < 1e-9) {
          LatticePoint c2 = cell;
          c2[i] = static_cast<int>(std::round(x[i])) - 1;
          in = spec.root.contains(c2);
        }
    if (!in) continue;
    inside[idx] = 1;
    fsup = std::max(fsup, std::abs(fvals[idx]));
    std::sort(d.begin(), d.end());
    u0[idx] = u;
    d1[idx] = d[0];
    dl[idx] = std::sqrt(d[0] * d[0] + d[1] * d[1]);
  }
  if (!(fsup > 0.0)) throw NoValidEpsilon("f vanishes on the structure grid");

  for (double delta = 0.2; delta >= min_delta * (1 - 1e-12); delta *= 0.5) {
    EpsilonChoice c;
    c.delta = delta;
    c.f_sup = fsup;
    c.epsilon = delta * delta / (4.0 * fsup);
    c.margin = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (std::int64_t idx = 0; idx < grid.count() && ok; ++idx) {
      if (!inside[idx] || dl[idx] < delta || d1[idx] < 0.5 * delta) continue;
      const double ue = u0[idx] + c.epsilon * fvals[idx];
      ok = (ue > 0) == (u0[idx] > 0) && ue != 0.0;
      c.margin = std::min(c.margin, std::abs(ue));
      ++c.checked_points;
    }
    if (ok && c.checked_points > 0) return c;
  }
  throw NoValidEpsilon("no delta down to " + std::to_string(min_delta) + " passes the sign check");
}

}  // namespace

EpsilonChoice choose_epsilon(const EigenField& f, const PerturbationSpec& spec, double grid_step,
                             double min_delta) {
  const double per = 1.0 / grid_step;
  if (!(grid_step > 0.0) || std::abs(per - std::round(per)) > 1e-9)
    throw DomainError("grid step must divide the unit lattice");
  const int n = spec.dim;
  if (n != 3 && n != 2) throw DomainError("choose_epsilon supports n = 2, 3");
  GridSpec g;
  g.dim = n;
  g.spacing = grid_step;
  g.origin = spec.bounds.lo;
  for (int i = 0; i < n; ++i)
    g.size[i] = static_cast<int>(std::lround((spec.bounds.hi[i] - spec.bounds.lo[i]) * per)) + 1;
  return scan_epsilon(evaluate_grid(f, g), g, spec, min_delta);
}

GradientReport verify_local_gradient(const EigenField& u_eps, const PerturbationSpec& spec,
                                     double slack, int per_unit) {
  const EigenField* f = &u_eps;
  if (const auto* ac = std::get_if<AffineCombo>(&u_eps.rep())) f = ac->add.get();
  const TargetSamples s = sample_targets(spec, per_unit);
  GradientReport r;
  r.required = 1.0 - 0.01 - slack;
  r.min_gradient = std::numeric_limits<double>::infinity();
  Eigen::VectorXd g;
  for (Eigen::Index m = 0; m < s.points.cols(); ++m) {
    if (std::abs(s.values[m]) > 1e-9) continue;
    value_and_gradient(*f, s.points.col(m), g);
    r.min_gradient = std::min(r.min_gradient, g.norm());
    ++r.points;
  }
  if (r.points == 0) {
    r.min_gradient = 0.0;
    r.margin = 0.0;
    r.ok = true;
    return r;
  }
  r.margin = r.min_gradient - r.required;
  r.ok = r.margin >= 0.0;
  return r;
}

}  // namespace wavetopo

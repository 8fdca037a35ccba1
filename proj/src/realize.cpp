#include "wavetopo/realize.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>

#include "wavetopo/errors.hpp"

namespace wavetopo {

namespace {

using Vec3 = Eigen::Vector3d;

Vec3 cell_point(const GridSpec& g, std::int64_t idx) {
  const auto c = g.coords(idx);
  return Vec3(g.origin[0] + g.spacing * c[0], g.origin[1] + g.spacing * c[1],
              g.origin[2] + g.spacing * c[2]);
}

Vec3 vec3_of(const nlohmann::json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw ParseError(std::string(key) + " must be a 3-vector");
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

// Distance along +-e_axis from the interior point x to the boundary, at most h.
double crossing(const VoxelDomain& d, const Vec3& x, int axis, int dir) {
  const double h = d.grid.spacing;
  if (!d.shape) return 0.5 * h;
  const Shape& s = *d.shape;
  double a = 0.0, b = h;
  Vec3 y = x;
  y[axis] += dir * b;
  if (s.phi(y) < 0.0) return h;  // mask and shape disagree at round-off
  for (int it = 0; it < 60; ++it) {
    const double m = 0.5 * (a + b);
    y = x;
    y[axis] += dir * m;
    (s.phi(y) < 0.0 ? a : b) = m;
  }
  // Tiny arms make the stencil stiff without improving accuracy.
  return std::max(0.5 * (a + b), 1e-3 * h);
}

struct Arm {
  std::int64_t cell = -1;  // -1: boundary at `dist`
  double dist = 0.0;
};

// Neighbour of cell `idx` along +-axis.
Arm arm(const VoxelDomain& d, std::int64_t idx, int axis, int dir) {
  const auto c = d.grid.coords(idx);
  auto n = c;
  n[axis] += dir;
  if (n[axis] >= 0 && n[axis] < d.grid.size[axis]) {
    const std::int64_t j = d.grid.index(n[0], n[1], n[2]);
    if (d.inside[j]) return {j, d.grid.spacing};
  }
  return {-1, crossing(d, cell_point(d.grid, idx), axis, dir)};
}

}  // namespace

double Shape::phi(const Vec3& x) const {
  switch (kind) {
    case Kind::Ball:
      return x.norm() - radius;
    case Kind::Torus: {
      const double rho = std::hypot(x[0], x[1]);
      return std::hypot(rho - major, x[2]) - minor;
    }
    case Kind::Superellipsoid: {
      double s = 0.0;
      for (int d = 0; d < 3; ++d) s += std::pow(std::abs(x[d] / semi_axes[d]), exponent);
      return std::pow(s, 1.0 / exponent) - 1.0;
    }
    case Kind::Cuboid: {
      double m = -1e300;
      for (int d = 0; d < 3; ++d) m = std::max({m, lo[d] - x[d], x[d] - hi[d]});
      return m;
    }
  }
  return 0.0;
}

double Shape::boundary_distance(const Vec3& x) const {
  switch (kind) {
    case Kind::Ball:
    case Kind::Torus:
      return std::abs(phi(x));
    case Kind::Superellipsoid: {
      const double e = 1e-6;
      Vec3 g;
      for (int d = 0; d < 3; ++d) {
        Vec3 a = x, b = x;
        a[d] += e;
        b[d] -= e;
        g[d] = (phi(a) - phi(b)) / (2 * e);
      }
      const double n = g.norm();
      return n > 0.0 ? std::abs(phi(x)) / n : std::abs(phi(x));
    }
    case Kind::Cuboid: {
      const Vec3 below = (lo - x).cwiseMax(0.0), above = (x - hi).cwiseMax(0.0);
      const double out = (below + above).norm();
      if (out > 0.0) return out;
      return (x - lo).cwiseMin(hi - x).minCoeff();
    }
  }
  return 0.0;
}

Box Shape::bounds() const {
  Vec3 l, u;
  switch (kind) {
    case Kind::Ball:
      l.setConstant(-radius);
      u.setConstant(radius);
      break;
    case Kind::Torus:
      l = Vec3(-(major + minor), -(major + minor), -minor);
      u = -l;
      break;
    case Kind::Superellipsoid:
      l = -semi_axes;
      u = semi_axes;
      break;
    case Kind::Cuboid:
      l = lo;
      u = hi;
      break;
  }
  return {l, u};
}

Shape shape_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("shape")) throw ParseError("domain needs a \"shape\" field");
  Shape s;
  const std::string kind = j.at("shape").get<std::string>();
  if (kind == "ball") {
    s.kind = Shape::Kind::Ball;
    s.radius = j.value("radius", 1.0);
    if (!(s.radius > 0)) throw DomainError("ball radius must be positive");
  } else if (kind == "torus") {
    s.kind = Shape::Kind::Torus;
    s.major = j.value("R", 2.0);
    s.minor = j.value("r", 0.8);
    if (!(s.minor > 0 && s.major > s.minor)) throw DomainError("torus needs R > r > 0");
  } else if (kind == "superellipsoid") {
    s.kind = Shape::Kind::Superellipsoid;
    s.semi_axes = vec3_of(j, "axes", Vec3(1, 1, 1));
    s.exponent = j.value("p", 4.0);
    if (!(s.semi_axes.minCoeff() > 0 && s.exponent >= 1)) throw DomainError("bad superellipsoid");
  } else if (kind == "cube") {
    s.kind = Shape::Kind::Cuboid;
    s.lo = vec3_of(j, "lo", Vec3(0, 0, 0));
    s.hi = vec3_of(j, "hi", Vec3(1, 1, 1));
    if (!((s.hi - s.lo).minCoeff() > 0)) throw DomainError("cube needs hi > lo");
  } else {
    throw ParseError("unknown shape: " + kind);
  }
  return s;
}

nlohmann::json to_json(const Shape& s) {
  auto arr = [](const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); };
  switch (s.kind) {
    case Shape::Kind::Ball:
      return {{"shape", "ball"}, {"radius", s.radius}};
    case Shape::Kind::Torus:
      return {{"shape", "torus"}, {"R", s.major}, {"r", s.minor}};
    case Shape::Kind::Superellipsoid:
      return {{"shape", "superellipsoid"}, {"axes", arr(s.semi_axes)}, {"p", s.exponent}};
    case Shape::Kind::Cuboid:
      return {{"shape", "cube"}, {"lo", arr(s.lo)}, {"hi", arr(s.hi)}};
  }
  return {};
}

VoxelDomain voxelize(const Shape& s, double h) {
  const Box b = s.bounds();
  // Two cells of padding keep every boundary crossing inside the grid.
  const Box padded{b.lo.array() - 2 * h, b.hi.array() + 2 * h};
  VoxelDomain d;
  d.grid = cell_center_grid(padded, h);
  d.shape = s;
  d.inside.assign(d.grid.count(), 0);
  for (std::int64_t i = 0; i < d.grid.count(); ++i)
    d.inside[i] = s.phi(cell_point(d.grid, i)) < 0.0;
  return d;
}

VoxelDomain voxel_domain_from_mask(const nlohmann::json& header, const std::vector<char>& bytes) {
  VoxelDomain d;
  d.grid.dim = 3;
  const auto size = header.at("size");
  if (!size.is_array() || size.size() != 3) throw ParseError("mask size must have 3 entries");
  for (int a = 0; a < 3; ++a) {
    d.grid.size[a] = size[a].get<int>();
    if (d.grid.size[a] < 1) throw ParseError("mask size must be positive");
  }
  d.grid.spacing = header.at("spacing").get<double>();
  if (!(d.grid.spacing > 0)) throw ParseError("mask spacing must be positive");
  d.grid.origin = vec3_of(header, "origin", Vec3::Zero());
  if (static_cast<std::int64_t>(bytes.size()) != d.grid.count())
    throw ParseError("mask has " + std::to_string(bytes.size()) + " bytes, header implies " +
                     std::to_string(d.grid.count()));
  d.inside.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) d.inside[i] = bytes[i] != 0;
  return d;
}

DirichletEigenpair dirichlet_ground_state(const VoxelDomain& d, double tol, int max_iterations) {
  if (d.grid.dim != 3) throw DomainError("voxel domains are three-dimensional");
  DirichletEigenpair out;
  std::vector<std::int64_t> unknown(d.grid.count(), -1);
  for (std::int64_t i = 0; i < d.grid.count(); ++i)
    if (d.inside[i]) {
      unknown[i] = static_cast<std::int64_t>(out.cells.size());
      out.cells.push_back(i);
    }
  const auto M = static_cast<Eigen::Index>(out.cells.size());
  if (M == 0) throw DomainError("the domain contains no grid cell");

  // -Laplacian with Shortley-Weller weights: along each axis with arms a, b,
  // u'' ~ 2/(a+b) [(u_b - u)/b - (u - u_a)/a], boundary values zero.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(7 * M);
  for (Eigen::Index r = 0; r < M; ++r) {
    double diag = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      const Arm lo = arm(d, out.cells[r], axis, -1), hi = arm(d, out.cells[r], axis, +1);
      const double a = lo.dist, b = hi.dist;
      diag += 2.0 / (a * b);
      if (lo.cell >= 0) trip.emplace_back(r, unknown[lo.cell], -2.0 / (a * (a + b)));
      if (hi.cell >= 0) trip.emplace_back(r, unknown[hi.cell], -2.0 / (b * (a + b)));
    }
    trip.emplace_back(r, r, diag);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> L(M, M);
  L.setFromTriplets(trip.begin(), trip.end());

  Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>> solver;
  solver.setTolerance(std::min(1e-10, 0.01 * tol));
  solver.setMaxIterations(20 * static_cast<int>(std::cbrt(double(M))) + 500);
  solver.compute(L);

  Eigen::VectorXd v = Eigen::VectorXd::Ones(M), x;
  double mu = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    if (mu > 0.0)
      x = solver.solveWithGuess(v, Eigen::VectorXd(v / mu));
    else
      x = solver.solve(v);
    if (solver.info() != Eigen::Success)
      throw NonConvergence("BiCGSTAB failed in inverse iteration");
    v = x.normalized();
    const Eigen::VectorXd Lv = L * v;
    mu = v.dot(Lv);
    out.residual = (Lv - mu * v).norm() / mu;
    out.iterations = it;
    if (out.residual <= tol) break;
  }
  if (out.residual > tol)
    throw NonConvergence("inverse iteration stopped at relative residual " +
                         std::to_string(out.residual));
  if (v.sum() < 0.0) v = -v;
  v /= v.maxCoeff();
  out.lambda = std::sqrt(mu);
  out.vector = Eigen::VectorXd::Zero(d.grid.count());
  for (Eigen::Index r = 0; r < M; ++r) out.vector[out.cells[r]] = v[r];
  return out;
}

namespace {

// Gradient of the grid function at an interior cell from the three-point
// stencil on each axis (boundary arms carry the value zero).
Vec3 grid_gradient(const VoxelDomain& d, const Eigen::VectorXd& u, std::int64_t idx) {
  Vec3 g;
  for (int axis = 0; axis < 3; ++axis) {
    const Arm lo = arm(d, idx, axis, -1), hi = arm(d, idx, axis, +1);
    const double a = lo.dist, b = hi.dist;
    const double ua = lo.cell >= 0 ? u[lo.cell] : 0.0;
    const double ub = hi.cell >= 0 ? u[hi.cell] : 0.0;
    g[axis] = (a * a * ub - b * b * ua + (b * b - a * a) * u[idx]) / (a * b * (a + b));
  }
  return g;
}

struct Pick {
  int component = -1;
  long long vertices = 0;
  double hausdorff = 0.0;
  TriangleMesh mesh;
  SignGrid grid;
  TopologyRecord topology;
};

// The compact zero-set component with the most vertices among those lying
// within the shell around lambda dA.
Pick pick_component(const EigenField& f, const Shape& s, double lambda, const Box& box,
                    double h, double shell) {
  Pick p;
  p.grid = sign_grid(f, box, h);
  const ZeroSetMesh z = zero_set_topology(p.grid);
  std::vector<int> compact;
  for (int c = 0; c < static_cast<int>(z.components.size()); ++c)
    if (z.components[c].topology.compact) compact.push_back(c);
  const TriangleMesh all = zero_set_geometry(p.grid, z, compact);

  std::vector<double> far(z.components.size(), 0.0);
  std::vector<long long> count(z.components.size(), 0);
  std::vector<int> vertex_comp(all.vertices.size(), -1);
  for (std::size_t k = 0; k < all.faces.size(); ++k)
    for (int v : all.faces[k]) vertex_comp[v] = all.face_component[k];
  for (std::size_t v = 0; v < all.vertices.size(); ++v) {
    const int c = vertex_comp[v];
    if (c < 0) continue;
    ++count[c];
    far[c] = std::max(far[c], lambda * s.boundary_distance(all.vertices[v] / lambda));
  }
  for (int c : compact)
    if (far[c] <= shell && count[c] > p.vertices) {
      p.component = c;
      p.vertices = count[c];
      p.hausdorff = far[c];
    }
  if (p.component < 0) {
    // Report the nearest candidate so the failure says how far off it was.
    for (int c : compact)
      if (count[c] > 0 && (p.component < 0 || far[c] < p.hausdorff)) {
        p.component = c;
        p.hausdorff = far[c];
        p.vertices = count[c];
      }
    p.component = -1;
    return p;
  }
  p.topology = z.components[p.component].topology;
  p.mesh = zero_set_geometry(p.grid, z, {p.component});
  return p;
}

}  // namespace

nlohmann::json to_json(const RealizeSurfaceReport& r) {
  return {{"lambda", r.lambda},
          {"lambda_sq", r.lambda_sq},
          {"eigen_residual", r.eig_residual},
          {"eigen_iterations", r.eig_iterations},
          {"unknowns", r.unknowns},
          {"fit", to_json(r.fit)},
          {"topology", to_json(r.topology)},
          {"refined_genus", r.refined_genus},
          {"genus_stable", r.genus_stable},
          {"hausdorff", r.hausdorff},
          {"within_shell", r.within_shell},
          {"min_gradient_ratio", r.min_gradient_ratio},
          {"component_vertices", r.component_vertices}};
}

RealizeSurfaceResult realize_component(const Shape& s, const RealizeSurfaceParams& p) {
  if (!(p.shell > 0 && p.extract_h > 0)) throw DomainError("shell and extract_h must be positive");
  const VoxelDomain d = voxelize(s, p.h);
  const DirichletEigenpair eig = dirichlet_ground_state(d, p.eig_tol);
  const double lambda = eig.lambda;

  RealizeSurfaceReport rep;
  rep.lambda = lambda;
  rep.lambda_sq = lambda * lambda;
  rep.eig_residual = eig.residual;
  rep.eig_iterations = eig.iterations;
  rep.unknowns = static_cast<long long>(eig.cells.size());

  // h(y) = h_lambda(y / lambda) solves Delta h + h = 0 in lambda A. Fit and
  // check samples come from two disjoint sublattices of the inner shell,
  // about 0.35 apart in rescaled units.
  const int stride = std::max(2, static_cast<int>(std::lround(0.35 / (lambda * p.h))));
  std::vector<std::int64_t> fit_cells, check_cells;
  for (std::int64_t idx : eig.cells) {
    if (lambda * s.boundary_distance(cell_point(d.grid, idx)) > p.shell) continue;
    const auto c = d.grid.coords(idx);
    if (c[0] % stride == 0 && c[1] % stride == 0 && c[2] % stride == 0)
      fit_cells.push_back(idx);
    else if (c[0] % stride == stride / 2 && c[1] % stride == stride / 2 &&
             c[2] % stride == stride / 2)
      check_cells.push_back(idx);
  }
  auto samples = [&](const std::vector<std::int64_t>& cells) {
    TargetSamples t;
    const auto m = static_cast<Eigen::Index>(cells.size());
    t.points.resize(3, m);
    t.values.resize(m);
    t.gradients.resize(3, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      t.points.col(i) = lambda * cell_point(d.grid, cells[i]);
      t.values[i] = eig.vector[cells[i]];
      t.gradients.col(i) = grid_gradient(d, eig.vector, cells[i]) / lambda;
    }
    return t;
  };
  if (fit_cells.empty() || check_cells.empty())
    throw DomainError("the fitting shell contains no samples; refine h");
  const Box b = s.bounds();
  FitOptions fo = p.fit;
  fo.frequency = 1.0;
  FitResult fit =
      fit_to_samples(samples(fit_cells), samples(check_cells), lambda * 0.5 * (b.lo + b.hi), fo);
  rep.fit = fit.report;

  const double pad = p.shell + 1.0;
  const Box box{lambda * b.lo.array() - pad, lambda * b.hi.array() + pad};
  Pick coarse = pick_component(fit.field, s, lambda, box, p.extract_h, p.shell);
  rep.hausdorff = coarse.hausdorff;
  rep.component_vertices = coarse.vertices;
  if (coarse.component < 0)
    throw DegenerateZeroSet("no compact zero-set component within " + std::to_string(p.shell) +
                            " of the rescaled boundary (nearest at " +
                            std::to_string(coarse.hausdorff) + ")");
  rep.within_shell = true;
  rep.topology = coarse.topology;

  std::vector<double> grad;
  grad.reserve(coarse.mesh.vertices.size());
  for (const auto& v : coarse.mesh.vertices) grad.push_back(gradient(fit.field, v).norm());
  if (!grad.empty()) {
    std::vector<double> sorted = grad;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    rep.min_gradient_ratio =
        median > 0.0 ? *std::min_element(grad.begin(), grad.end()) / median : 0.0;
  }

  const Pick fine = pick_component(fit.field, s, lambda, box, 0.5 * p.extract_h, p.shell);
  rep.refined_genus = fine.component >= 0 ? fine.topology.genus : -1;
  rep.genus_stable = fine.component >= 0 && rep.refined_genus == rep.topology.genus &&
                     rep.topology.genus >= 0;

  return {std::move(fit.field), rep.topology, rep, std::move(coarse.mesh)};
}

}  // namespace wavetopo

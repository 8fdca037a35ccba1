#include "wavetopo/realize_tree.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "wavetopo/errors.hpp"

namespace wavetopo {

namespace {

// 1D lower envelope of parabolas (Felzenszwalb and Huttenlocher).
void edt_line(const float* f, float* d, int n, std::vector<int>& v, std::vector<float>& z) {
  constexpr float inf = std::numeric_limits<float>::infinity();
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    while (k >= 0) {
      const float s = ((f[q] + float(q) * q) - (f[v[k]] + float(v[k]) * v[k])) / (2.0f * (q - v[k]));
      if (s <= z[k]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -inf : ((f[q] + float(q) * q) - (f[v[k - 1]] + float(v[k - 1]) * v[k - 1])) /
                               (2.0f * (q - v[k - 1]));
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d, d + n, inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const float dq = float(q - v[j]);
    d[q] = dq * dq + f[v[j]];
  }
}

std::set<LatticePoint> own_cubes(const StructureAssembly& a, int v) {
  const auto& node = a.nodes[v];
  if (node.children.empty()) return node.structure.cubes;
  std::set<LatticePoint> out;
  for (int c : node.children) {
    const auto& child = a.nodes[c];
    for (const auto& q : child.engulfed.cubes)
      if (!child.structure.contains(q)) out.insert(q);
  }
  return out;
}

// Lattice cube containing the sample and whether the sample lies on a lattice plane.
LatticePoint containing_cube(const Eigen::VectorXd& x, bool& on_plane) {
  LatticePoint c(x.size());
  on_plane = false;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double r = std::round(x[d]);
    if (std::abs(x[d] - r) < 1e-7) on_plane = true;
    c[d] = static_cast<int>(std::floor(x[d] + 1e-7));
  }
  return c;
}

// Marks samples inside the closed union of the cubes.
std::vector<char> closed_union_mask(const GridSpec& g, const std::set<LatticePoint>& cubes) {
  std::vector<char> mask(std::size_t(g.count()), 0);
  const int n = g.dim;
  for (std::int64_t s = 0; s < g.count(); ++s) {
    const Eigen::VectorXd x = g.point(s);
    // Candidate cubes: floor and floor - 1 along coordinates on a plane.
    LatticePoint base(n);
    int plane_mask = 0;
    for (int d = 0; d < n; ++d) {
      const double r = std::round(x[d]);
      if (std::abs(x[d] - r) < 1e-7) {
        base[d] = static_cast<int>(r);
        plane_mask |= 1 << d;
      } else {
        base[d] = static_cast<int>(std::floor(x[d]));
      }
    }
    for (int sub = plane_mask;; sub = (sub - 1) & plane_mask) {
      LatticePoint c = base;
      for (int d = 0; d < n; ++d)
        if (sub >> d & 1) --c[d];
      if (cubes.count(c)) {
        mask[s] = 1;
        break;
      }
      if (sub == 0) break;
    }
  }
  return mask;
}

double hausdorff(const GridSpec& g, const std::vector<char>& a, const std::vector<char>& b) {
  const auto da = distance_transform_sq(g, a), db = distance_transform_sq(g, b);
  float worst = 0.0f;
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (a[s]) worst = std::max(worst, db[s]);
    if (b[s]) worst = std::max(worst, da[s]);
  }
  return std::sqrt(double(worst)) * g.spacing;
}

// Samples outside `set` not reachable from the box boundary.
long long bounded_complement(const GridSpec& g, const std::vector<char>& set) {
  const std::int64_t N = g.count();
  std::vector<char> seen(set.begin(), set.end());
  std::vector<std::int64_t> stack;
  for (std::int64_t s = 0; s < N; ++s)
    if (!seen[s] && g.on_boundary(s)) {
      seen[s] = 1;
      stack.push_back(s);
    }
  const std::int64_t stride[3] = {1, g.size[0], std::int64_t(g.size[0]) * g.size[1]};
  while (!stack.empty()) {
    const std::int64_t s = stack.back();
    stack.pop_back();
    const auto c = g.coords(s);
    for (int d = 0; d < g.dim; ++d)
      for (int dir : {-1, 1}) {
        const int cd = c[d] + dir;
        if (cd < 0 || cd >= g.size[d]) continue;
        const std::int64_t t = s + dir * stride[d];
        if (!seen[t]) {
          seen[t] = 1;
          stack.push_back(t);
        }
      }
  }
  return std::count(seen.begin(), seen.end(), 0);
}

struct Extraction {
  NodalDecomposition decomp;
  std::vector<std::set<LatticePoint>> own;
  std::vector<int> domain;        // per assembly node
  std::vector<double> share;
  int root_node = -1;             // graph node of the root's domain
  int outer = -1;                 // enclosing zero-set component
  NestingTree tree;
  std::string failure;
};

Extraction extract(const StructureAssembly& a, const EigenField& u, const Box& box, double h) {
  Extraction e{decompose(sign_grid(u, box, h)), {}, {}, {}, -1, -1, {}, {}};
  const auto& g = e.decomp.grid.grid;
  const int V = static_cast<int>(a.nodes.size());
  std::map<LatticePoint, int> owner;
  for (int v = 0; v < V; ++v) {
    e.own.push_back(own_cubes(a, v));
    for (const auto& c : e.own.back()) owner.emplace(c, v);
  }
  std::vector<std::map<int, long long>> votes(V);
  for (std::int64_t s = 0; s < g.count(); ++s) {
    bool on_plane = false;
    const auto c = containing_cube(g.point(s), on_plane);
    if (on_plane) continue;
    const auto it = owner.find(c);
    if (it != owner.end()) ++votes[it->second][e.decomp.domains.label[s]];
  }
  for (int v = 0; v < V; ++v) {
    long long best = -1, total = 0;
    int label = -1;
    for (const auto& [l, n] : votes[v]) {
      total += n;
      if (n > best) {
        best = n;
        label = l;
      }
    }
    e.domain.push_back(label);
    e.share.push_back(total ? double(best) / double(total) : 0.0);
  }
  if (e.domain[0] < 0) {
    e.failure = "sampling: no samples inside the root's cubes";
    return e;
  }
  e.root_node = e.decomp.node_of_domain[e.domain[0]];
  if (e.root_node == 0) {
    e.failure = "extraction: the root's domain reaches the box boundary";
    return e;
  }
  try {
    e.outer = enclosing_component(e.decomp, e.root_node);
    e.tree = nesting_tree_below(e.decomp, e.root_node);
  } catch (const Error& err) {
    e.failure = std::string("nesting tree: ") + err.what();
  }
  return e;
}

nlohmann::json to_json(const EpsilonChoice& e) {
  return {{"epsilon", e.epsilon}, {"delta", e.delta}, {"f_sup", e.f_sup},
          {"margin", e.margin}, {"checked_points", e.checked_points}};
}

nlohmann::json to_json(const GradientReport& g) {
  return {{"min_gradient", g.min_gradient}, {"required", g.required}, {"margin", g.margin},
          {"points", g.points}, {"ok", g.ok}};
}

}  // namespace

std::vector<float> distance_transform_sq(const GridSpec& g, const std::vector<char>& mask) {
  constexpr float inf = std::numeric_limits<float>::infinity();
  std::vector<float> d(mask.size());
  for (std::size_t s = 0; s < mask.size(); ++s) d[s] = mask[s] ? 0.0f : inf;
  const std::int64_t stride[3] = {1, g.size[0], std::int64_t(g.size[0]) * g.size[1]};
  std::vector<float> in, out;
  std::vector<int> v;
  std::vector<float> z;
  for (int axis = 0; axis < g.dim; ++axis) {
    const int n = g.size[axis];
    in.resize(n);
    out.resize(n);
    for (std::int64_t s = 0; s < g.count(); ++s) {
      if (g.coords(s)[axis] != 0) continue;
      for (int q = 0; q < n; ++q) in[q] = d[s + q * stride[axis]];
      edt_line(in.data(), out.data(), n, v, z);
      for (int q = 0; q < n; ++q) d[s + q * stride[axis]] = out[q];
    }
  }
  return d;
}

Box lattice_aligned_box(const Box& bounds, double h, double margin) {
  const double m = 0.5 / h;
  if (!(h > 0.0) || std::abs(m - std::round(m)) > 1e-9)
    throw DomainError("grid spacing must be 1/(2m) for a lattice-aligned sign grid");
  if (std::abs(margin / h - std::round(margin / h)) > 1e-9)
    throw DomainError("box margin must be a multiple of the grid spacing");
  Box b = bounds;
  b.lo = bounds.lo.array() - margin - 0.5 * h;
  b.hi = bounds.hi.array() + margin + 0.5 * h;
  return b;
}

namespace {

RealizeTreeResult verify_fit(const RootedTree& t, const StructureAssembly& a,
                             const PerturbationSpec& spec, const FitResult& fit,
                             const RealizeTreeParams& p) {
  const EpsilonChoice eps = choose_epsilon(fit.field, spec, p.epsilon_grid_step);

  RealizeTreeResult res{{}, assemble_u_eps(fit.field, eps.epsilon), {}, {}};
  auto& r = res.report;
  r.input_tree = tree_to_string(t);
  r.input_canonical = canonical_tree(t);
  r.fit = fit.report;
  r.epsilon = eps;
  r.gradient = verify_local_gradient(fit.field, spec);
  r.h = p.h;

  const Box box = lattice_aligned_box(spec.bounds, p.h, p.margin);
  Extraction e = extract(a, res.u_eps, box, p.h);
  const auto& d = e.decomp;
  const auto& g = d.grid.grid;
  r.samples = g.count();
  r.domains = d.domains.count();
  r.zero_components = static_cast<int>(d.zero.components.size());
  r.failure = e.failure;

  const int V = static_cast<int>(a.nodes.size());
  r.nodes.resize(V);
  for (int v = 0; v < V; ++v) {
    r.nodes[v].path = a.nodes[v].path;
    r.nodes[v].domain = e.domain[v];
    r.nodes[v].vote_share = e.share[v];
  }
  if (!e.failure.empty()) return res;

  res.extracted = e.tree.tree;
  r.extracted_tree = tree_to_string(e.tree.tree);
  r.extracted_canonical = canonical_tree(e.tree.tree);
  r.pass = r.extracted_canonical == r.input_canonical;
  if (!r.pass) r.failure = "comparison: extracted tree differs from the input";
  r.outer_component = d.zero.components[e.outer].topology;

  // Predicted domains must be distinct tree vertices with matching parents.
  std::map<int, int> tree_parent;  // graph node -> parent graph node
  {
    std::function<void(const RootedTree&, int, std::size_t&)> walk =
        [&](const RootedTree& node, int parent, std::size_t& idx) {
          const int me = e.tree.nodes[idx++];
          tree_parent[me] = parent;
          for (const auto& c : node.children) walk(c, me, idx);
        };
    std::size_t idx = 0;
    walk(e.tree.tree, -1, idx);
  }
  bool consistent = true;
  std::set<int> used;
  for (int v = 0; v < V; ++v) {
    const int node = d.node_of_domain[e.domain[v]];
    const auto it = tree_parent.find(node);
    if (node == 0 || it == tree_parent.end() || !used.insert(node).second) {
      consistent = false;
      continue;
    }
    const int parent = a.nodes[v].parent;
    const int expect = parent < 0 ? -1 : d.node_of_domain[e.domain[parent]];
    if (it->second != expect) consistent = false;
  }
  r.node_map_consistent = consistent && used.size() == tree_parent.size();

  bool domain_ok = r.node_map_consistent;
  for (int v = 0; v < V; ++v) {
    auto& nc = r.nodes[v];
    std::vector<char> omega(std::size_t(g.count()), 0);
    for (std::int64_t s = 0; s < g.count(); ++s) omega[s] = d.domains.label[s] == e.domain[v];
    nc.hausdorff = hausdorff(g, omega, closed_union_mask(g, e.own[v]));
    nc.hausdorff_ok = nc.hausdorff <= 2.0 * p.h + 1e-9;

    const int node = d.node_of_domain[e.domain[v]];
    std::set<int> enclosed;
    if (node != 0) {
      try {
        for (int m : nesting_tree_below(d, node).nodes) enclosed.insert(d.domain_of_node[m]);
      } catch (const Error&) {
        enclosed.clear();
      }
    }
    if (enclosed.empty()) {
      nc.bounded_complement_samples = -1;
    } else {
      std::vector<char> star(std::size_t(g.count()), 0);
      for (std::int64_t s = 0; s < g.count(); ++s) star[s] = enclosed.count(d.domains.label[s]) > 0;
      nc.bounded_complement_samples = bounded_complement(g, star);
    }
    nc.claim_ok = nc.bounded_complement_samples == 0;
    domain_ok = domain_ok && nc.hausdorff_ok && nc.claim_ok;
  }
  r.domain_checks_ok = domain_ok;

  std::vector<int> comps{e.outer};
  for (int m : e.tree.nodes)
    for (int c : d.node_components[m])
      if (d.component_depth[c] > d.node_depth[m]) comps.push_back(c);
  res.mesh = zero_set_geometry(d.grid, d.zero, comps);

  if (p.refine_check) {
    e = Extraction{};
    const Extraction fine = extract(a, res.u_eps, lattice_aligned_box(spec.bounds, p.h / 2, p.margin), p.h / 2);
    r.refined_canonical = fine.failure.empty() ? canonical_tree(fine.tree.tree) : "failed: " + fine.failure;
  }
  return res;
}

}  // namespace

RealizeTreeResult realize_and_verify(const RootedTree& t, const RealizeTreeParams& p) {
  const auto start = std::chrono::steady_clock::now();
  if (p.dim != 3) throw DomainError("tree realization is implemented for n = 3");
  const StructureAssembly a = build_structure(t, p.dim);
  const PerturbationSpec spec = build_h(a);

  std::vector<std::string> attempts;
  auto attempt = [&](bool sign) {
    const FitResult fit = sign ? fit_sign_feasible(spec, p.fit, p.sign_fit) : fit_eigenfunction(spec, p.fit);
    RealizeTreeResult res = verify_fit(t, a, spec, fit, p);
    attempts.push_back(fit.report.solver + ": " + (res.report.pass ? "PASS" : "FAIL"));
    return res;
  };
  RealizeTreeResult res = attempt(p.fit_mode == FitMode::SignFeasible);
  if (p.fit_mode == FitMode::Auto && !res.report.pass) res = attempt(true);
  res.report.attempts = attempts;
  res.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

nlohmann::json to_json(const RealizeTreeReport& r) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : r.nodes)
    nodes.push_back({{"path", n.path},
                     {"domain", n.domain},
                     {"vote_share", n.vote_share},
                     {"hausdorff", n.hausdorff},
                     {"hausdorff_ok", n.hausdorff_ok},
                     {"bounded_complement_samples", n.bounded_complement_samples},
                     {"no_bounded_complement", n.claim_ok}});
  nlohmann::json j{{"input_tree", r.input_tree},
                   {"extracted_tree", r.extracted_tree},
                   {"input_canonical", r.input_canonical},
                   {"extracted_canonical", r.extracted_canonical},
                   {"result", r.pass ? "PASS" : "FAIL"},
                   {"failure", r.failure},
                   {"fit", to_json(r.fit)},
                   {"achieved_delta", r.fit.achieved_sup_c1_error},
                   {"fit_target_met", r.fit.met_target},
                   {"fit_attempts", r.attempts},
                   {"epsilon", to_json(r.epsilon)},
                   {"transversality", to_json(r.gradient)},
                   {"grid", {{"h", r.h}, {"samples", r.samples}}},
                   {"domains", r.domains},
                   {"zero_components", r.zero_components},
                   {"outer_component", to_json(r.outer_component)},
                   {"nodes", nodes},
                   {"node_map_consistent", r.node_map_consistent},
                   {"domain_checks_ok", r.domain_checks_ok}};
  if (!r.refined_canonical.empty()) j["refined_canonical"] = r.refined_canonical;
  return j;
}

}  // namespace wavetopo

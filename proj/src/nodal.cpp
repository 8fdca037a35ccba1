#include "wavetopo/nodal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "wavetopo/errors.hpp"

namespace wavetopo {

namespace {

// Index arithmetic for the sample lattice of a GridSpec.
struct Lattice {
  int dim;
  std::array<int, 3> size;
  std::array<std::int64_t, 3> stride;

  explicit Lattice(const GridSpec& g) : dim(g.dim), size(g.size) {
    stride = {1, std::int64_t(size[0]), std::int64_t(size[0]) * size[1]};
  }
  int masks() const { return 1 << dim; }
  int directions() const { return masks() - 1; }
  std::int64_t offset(int mask) const {
    std::int64_t o = 0;
    for (int d = 0; d < dim; ++d)
      if (mask >> d & 1) o += stride[d];
    return o;
  }
  std::array<int, 3> coords(std::int64_t s) const {
    return {int(s % size[0]), int(s / size[0] % size[1]), int(s / stride[2])};
  }
  // Whether the lattice point s + mask stays inside.
  bool fits(const std::array<int, 3>& c, int mask) const {
    for (int d = 0; d < dim; ++d)
      if ((mask >> d & 1) && c[d] + 1 >= size[d]) return false;
    return true;
  }
};

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Simplices of the Freudenthal split of the cell at the origin, as chains of
// corner masks 0 = m_0 < m_1 < ... < m_n = all ones.
std::vector<std::array<int, 4>> simplex_chains(int dim) {
  std::vector<std::array<int, 4>> out;
  std::array<int, 3> axes{0, 1, 2};
  do {
    if (dim == 2 && axes[2] != 2) continue;
    std::array<int, 4> chain{0, 0, 0, 0};
    for (int k = 0; k < dim; ++k) chain[k + 1] = chain[k] | (1 << axes[k]);
    out.push_back(chain);
  } while (std::next_permutation(axes.begin(), axes.end()));
  return out;
}

// Visits every simplex with a sign change. `emit` receives the vertex ids of
// one output face (3 for a triangle, 2 for a segment; a quad gives two calls).
// `boundary` is called with a crossing vertex id for each sign-changing
// simplex face lying on the grid boundary (n = 3).
template <class Emit, class Boundary>
void for_each_face(const SignGrid& g, const Lattice& L, const std::vector<int>& vid,
                   Emit&& emit, Boundary&& boundary) {
  const int n = L.dim;
  const int D = L.directions();
  const auto chains = simplex_chains(n);
  std::array<std::int64_t, 8> off{};
  for (int m = 0; m < L.masks(); ++m) off[m] = L.offset(m);
  const int kmax = n == 3 ? L.size[2] - 1 : 1;
  for (int k = 0; k < kmax; ++k)
    for (int j = 0; j + 1 < L.size[1]; ++j)
      for (int i = 0; i + 1 < L.size[0]; ++i) {
        const std::int64_t s = i + L.stride[1] * j + L.stride[2] * k;
        std::int8_t sg[8];
        bool mixed = false;
        for (int m = 0; m < L.masks(); ++m) {
          sg[m] = g.signs[s + off[m]];
          mixed |= sg[m] != sg[0];
        }
        if (!mixed) continue;
        const std::array<int, 3> c{i, j, k};
        const bool on_edge_of_grid = [&] {
          for (int d = 0; d < n; ++d)
            if (c[d] == 0 || c[d] + 2 == L.size[d]) return true;
          return false;
        }();
        auto edge = [&](int a, int b) {  // a subset of b
          return vid[(s + off[a]) * D + (b ^ a) - 1];
        };
        for (const auto& ch : chains) {
          const int nv = n + 1;
          int pos = 0;
          for (int q = 0; q < nv; ++q) pos += sg[ch[q]] > 0;
          if (pos == 0 || pos == nv) continue;
          auto e = [&](int p, int q) { return p < q ? edge(ch[p], ch[q]) : edge(ch[q], ch[p]); };
          if (n == 2) {
            int lone = 0;
            for (int q = 0; q < 3; ++q)
              if ((sg[ch[q]] > 0) == (pos == 1)) lone = q;
            int o[2], t = 0;
            for (int q = 0; q < 3; ++q)
              if (q != lone) o[t++] = q;
            emit(std::array<int, 3>{e(lone, o[0]), e(lone, o[1]), -1}, 2);
          } else if (pos == 1 || pos == 3) {
            int lone = 0;
            for (int q = 0; q < 4; ++q)
              if ((sg[ch[q]] > 0) == (pos == 1)) lone = q;
            int o[3], t = 0;
            for (int q = 0; q < 4; ++q)
              if (q != lone) o[t++] = q;
            emit(std::array<int, 3>{e(lone, o[0]), e(lone, o[1]), e(lone, o[2])}, 3);
          } else {
            int p[2], m[2], tp = 0, tm = 0;
            for (int q = 0; q < 4; ++q) (sg[ch[q]] > 0 ? p[tp++] : m[tm++]) = q;
            const int a = e(p[0], m[0]), b = e(p[0], m[1]), cc = e(p[1], m[1]), d = e(p[1], m[0]);
            emit(std::array<int, 3>{a, b, cc}, 3);
            emit(std::array<int, 3>{a, cc, d}, 3);
          }
          if (n == 3 && on_edge_of_grid) {
            // Faces of the tetrahedron: drop one chain vertex.
            for (int drop = 0; drop < 4; ++drop) {
              int vs[3], t = 0;
              for (int q = 0; q < 4; ++q)
                if (q != drop) vs[t++] = q;
              bool face_on_boundary = false;
              for (int d = 0; d < 3 && !face_on_boundary; ++d) {
                const int c0 = c[d] + (ch[vs[0]] >> d & 1);
                if (c0 != 0 && c0 != L.size[d] - 1) continue;
                face_on_boundary = c0 == c[d] + (ch[vs[1]] >> d & 1) &&
                                   c0 == c[d] + (ch[vs[2]] >> d & 1);
              }
              if (!face_on_boundary) continue;
              const auto s0 = sg[ch[vs[0]]], s1 = sg[ch[vs[1]]], s2 = sg[ch[vs[2]]];
              if (s0 == s1 && s1 == s2) continue;
              boundary(s0 != s1 ? e(vs[0], vs[1]) : e(vs[0], vs[2]));
            }
          }
        }
      }
}

// Vertex ids for every grid edge of the simplex split with a sign change.
std::vector<int> crossing_vertices(const SignGrid& g, const Lattice& L,
                                   std::vector<std::int64_t>& vertex_edge) {
  const int D = L.directions();
  const std::int64_t N = g.grid.count();
  if (N * D > std::numeric_limits<int>::max())
    throw DomainError("sign grid too large for zero-set extraction");
  std::vector<int> vid(std::size_t(N * D), -1);
  for (std::int64_t s = 0; s < N; ++s) {
    const auto c = L.coords(s);
    for (int m = 1; m < L.masks(); ++m) {
      if (!L.fits(c, m)) continue;
      if (g.signs[s] != g.signs[s + L.offset(m)]) {
        vid[s * D + m - 1] = static_cast<int>(vertex_edge.size());
        vertex_edge.push_back(s * D + m - 1);
      }
    }
  }
  return vid;
}

std::vector<int> vertex_ids(const SignGrid& g, const ZeroSetMesh& z) {
  std::vector<int> vid(std::size_t(g.grid.count() * z.directions()), -1);
  for (std::size_t v = 0; v < z.vertex_edge.size(); ++v) vid[z.vertex_edge[v]] = int(v);
  return vid;
}

std::pair<std::int64_t, std::int64_t> edge_endpoints(const Lattice& L, std::int64_t edge) {
  const int D = L.directions();
  const std::int64_t s = edge / D;
  return {s, s + L.offset(int(edge % D) + 1)};
}

}  // namespace

SignGrid sign_grid_from_values(const GridSpec& grid, Eigen::VectorXd values) {
  if (values.size() != grid.count()) throw DomainError("sample count does not match grid");
  SignGrid g;
  g.grid = grid;
  const double scale = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  const double tiny = scale > 0.0 ? 1e-14 * scale : 1e-300;
  g.signs.resize(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::abs(values[i]) < tiny) {
      values[i] = tiny;
      ++g.nudged;
    }
    g.signs[i] = values[i] > 0.0 ? 1 : -1;
  }
  g.values = std::move(values);
  return g;
}

SignGrid sign_grid(const EigenField& f, const Box& box, double h) {
  if (box.dim() != f.dim()) throw DomainError("box and field dimensions differ");
  const GridSpec grid = cell_center_grid(box, h);
  return sign_grid_from_values(grid, evaluate_grid(f, grid));
}

int DomainLabels::bounded_count() const {
  return static_cast<int>(std::count(touches_boundary.begin(), touches_boundary.end(), 0));
}

int DomainLabels::merged_count() const {
  return bounded_count() + (bounded_count() < count() ? 1 : 0);
}

DomainLabels label_domains(const SignGrid& g) {
  const Lattice L(g.grid);
  const std::int64_t N = g.grid.count();
  DomainLabels out;
  out.label.assign(std::size_t(N), -1);
  std::vector<std::int64_t> stack;
  for (std::int64_t seed = 0; seed < N; ++seed) {
    if (out.label[seed] >= 0) continue;
    const int id = out.count();
    const std::int8_t sg = g.signs[seed];
    out.sign.push_back(sg);
    out.size.push_back(0);
    out.touches_boundary.push_back(0);
    out.label[seed] = id;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const std::int64_t s = stack.back();
      stack.pop_back();
      ++out.size[id];
      const auto c = L.coords(s);
      for (int d = 0; d < L.dim; ++d) {
        if (c[d] == 0 || c[d] + 1 == L.size[d]) out.touches_boundary[id] = 1;
        for (int dir : {-1, 1}) {
          const int cd = c[d] + dir;
          if (cd < 0 || cd >= L.size[d]) continue;
          const std::int64_t t = s + dir * L.stride[d];
          if (out.label[t] < 0 && g.signs[t] == sg) {
            out.label[t] = id;
            stack.push_back(t);
          }
        }
      }
    }
  }
  return out;
}

nlohmann::json to_json(const TopologyRecord& t) {
  nlohmann::json j{{"euler_characteristic", t.euler_characteristic},
                   {"component_is_compact", t.compact}};
  if (t.genus >= 0) j["genus"] = t.genus;
  return j;
}

ZeroSetMesh zero_set_topology(const SignGrid& g) {
  const Lattice L(g.grid);
  ZeroSetMesh z;
  z.dim = L.dim;
  const auto vid = crossing_vertices(g, L, z.vertex_edge);
  const int V = static_cast<int>(z.vertex_edge.size());
  DisjointSets sets(V);
  std::vector<long long> faces_at(V, 0), boundary_at(V, 0);
  for_each_face(
      g, L, vid,
      [&](const std::array<int, 3>& f, int k) {
        for (int q = 1; q < k; ++q) sets.unite(f[0], f[q]);
        ++faces_at[f[0]];
      },
      [&](int v) { ++boundary_at[v]; });

  std::vector<int> comp_of_root(V, -1);
  z.vertex_component.resize(V);
  std::vector<long long> B;
  std::vector<char> open;
  for (int v = 0; v < V; ++v) {
    const int r = sets.find(v);
    if (comp_of_root[r] < 0) {
      comp_of_root[r] = static_cast<int>(z.components.size());
      z.components.emplace_back();
      B.push_back(0);
      open.push_back(0);
    }
    const int c = comp_of_root[r];
    z.vertex_component[v] = c;
    auto& comp = z.components[c];
    ++comp.vertices;
    comp.faces += faces_at[v];
    B[c] += boundary_at[v];
    // A vertex on a grid edge inside a boundary plane means the surface is cut.
    const auto [a, b] = edge_endpoints(L, z.vertex_edge[v]);
    const auto ca = L.coords(a), cb = L.coords(b);
    double r2 = 0.0;
    for (int d = 0; d < L.dim; ++d) {
      if (ca[d] == cb[d] && (ca[d] == 0 || ca[d] + 1 == L.size[d])) open[c] = 1;
      const double xa = g.grid.origin[d] + g.grid.spacing * ca[d];
      const double xb = g.grid.origin[d] + g.grid.spacing * cb[d];
      r2 += std::max(xa * xa, xb * xb);
    }
    comp.max_radius = std::max(comp.max_radius, std::sqrt(r2));
  }
  for (std::size_t c = 0; c < z.components.size(); ++c) {
    auto& comp = z.components[c];
    auto& t = comp.topology;
    t.compact = !open[c];
    if (L.dim == 2) {
      t.euler_characteristic = static_cast<int>(comp.vertices - comp.faces);
    } else {
      // chi = V - E + F with 2E = 3F + (boundary edges).
      t.euler_characteristic = static_cast<int>(comp.vertices - (comp.faces + B[c]) / 2);
      if (t.compact && t.euler_characteristic % 2 == 0 && t.euler_characteristic <= 2)
        t.genus = (2 - t.euler_characteristic) / 2;
    }
  }
  return z;
}

TriangleMesh zero_set_geometry(const SignGrid& g, const ZeroSetMesh& z,
                               const std::vector<int>& components) {
  const Lattice L(g.grid);
  std::vector<char> want(z.components.size(), components.empty() ? 1 : 0);
  for (int c : components) want.at(c) = 1;
  TriangleMesh m;
  m.dim = L.dim;
  std::vector<int> local(z.vertex_edge.size(), -1);
  auto vertex = [&](int v) {
    if (local[v] < 0) {
      local[v] = static_cast<int>(m.vertices.size());
      const auto [a, b] = edge_endpoints(L, z.vertex_edge[v]);
      const double fa = g.values[a], fb = g.values[b];
      const double t = fa / (fa - fb);
      Eigen::Vector3d p = Eigen::Vector3d::Zero();
      const Eigen::VectorXd pa = g.grid.point(a), pb = g.grid.point(b);
      p.head(L.dim) = pa + t * (pb - pa);
      m.vertices.push_back(p);
    }
    return local[v];
  };
  const auto vid = vertex_ids(g, z);
  for_each_face(
      g, L, vid,
      [&](const std::array<int, 3>& f, int k) {
        const int c = z.vertex_component[f[0]];
        if (!want[c]) return;
        std::array<int, 3> face{vertex(f[0]), vertex(f[1]), k == 3 ? vertex(f[2]) : -1};
        m.faces.push_back(face);
        m.face_component.push_back(c);
      },
      [](int) {});
  return m;
}

void write_obj(std::ostream& os, const TriangleMesh& m) {
  os << "# zero set, " << m.vertices.size() << " vertices\n";
  char buf[96];
  for (const auto& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
    os << buf;
  }
  std::vector<std::size_t> order(m.faces.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return m.face_component[a] < m.face_component[b]; });
  int current = -1;
  for (std::size_t i : order) {
    if (m.face_component[i] != current) {
      current = m.face_component[i];
      os << "o component_" << current << "\n";
    }
    const auto& f = m.faces[i];
    if (f[2] < 0)
      os << "l " << f[0] + 1 << ' ' << f[1] + 1 << "\n";
    else
      os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << "\n";
  }
}

ZeroSetResult extract_zero_set(const EigenField& f, const Box& box, double h, double grad_tol) {
  ZeroSetResult r;
  r.grid = sign_grid(f, box, h);
  r.topology = zero_set_topology(r.grid);
  r.mesh = zero_set_geometry(r.grid, r.topology);
  if (r.mesh.vertices.empty()) return r;
  std::vector<double> g(r.mesh.vertices.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = gradient(f, r.mesh.vertices[i].head(f.dim())).norm();
  std::vector<double> sorted = g;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double lo = *std::min_element(g.begin(), g.end());
  r.min_gradient_ratio = median > 0.0 ? lo / median : 0.0;
  if (grad_tol > 0.0 && r.min_gradient_ratio < grad_tol) {
    std::ostringstream msg;
    msg << "zero set is singular at resolution " << h << ": min |grad f| = " << lo
        << " against median " << median;
    throw DegenerateZeroSet(msg.str());
  }
  return r;
}

NodalDecomposition decompose(SignGrid grid) {
  NodalDecomposition d;
  d.grid = std::move(grid);
  d.domains = label_domains(d.grid);
  d.zero = zero_set_topology(d.grid);
  const Lattice L(d.grid.grid);

  d.node_of_domain.assign(d.domains.count(), 0);
  d.domain_of_node.assign(1, -1);
  for (int i = 0; i < d.domains.count(); ++i) {
    if (d.domains.touches_boundary[i]) continue;
    d.node_of_domain[i] = d.node_count();
    d.domain_of_node.push_back(i);
  }

  const int C = static_cast<int>(d.zero.components.size());
  std::vector<std::pair<int, int>> incidence;  // (component, node)
  incidence.reserve(d.zero.vertex_edge.size() * 2);
  for (std::size_t v = 0; v < d.zero.vertex_edge.size(); ++v) {
    const auto [a, b] = edge_endpoints(L, d.zero.vertex_edge[v]);
    const int c = d.zero.vertex_component[v];
    incidence.emplace_back(c, d.node_of_domain[d.domains.label[a]]);
    incidence.emplace_back(c, d.node_of_domain[d.domains.label[b]]);
  }
  std::sort(incidence.begin(), incidence.end());
  incidence.erase(std::unique(incidence.begin(), incidence.end()), incidence.end());
  d.component_nodes.assign(C, {});
  d.node_components.assign(d.node_count(), {});
  for (const auto& [c, n] : incidence) {
    d.component_nodes[c].push_back(n);
    d.node_components[n].push_back(c);
  }

  d.node_depth.assign(d.node_count(), -1);
  d.component_depth.assign(C, -1);
  std::vector<int> frontier{0};
  d.node_depth[0] = 0;
  for (int depth = 0; !frontier.empty(); depth += 2) {
    std::vector<int> next;
    for (int n : frontier)
      for (int c : d.node_components[n]) {
        if (d.component_depth[c] >= 0) continue;
        d.component_depth[c] = depth + 1;
        for (int m : d.component_nodes[c])
          if (d.node_depth[m] < 0) {
            d.node_depth[m] = depth + 2;
            next.push_back(m);
          }
      }
    frontier = std::move(next);
  }
  return d;
}

int enclosing_component(const NodalDecomposition& d, int node) {
  if (node == 0) return -1;
  int up = -1, count = 0;
  for (int c : d.node_components[node])
    if (d.component_depth[c] >= 0 && d.component_depth[c] < d.node_depth[node]) {
      up = c;
      ++count;
    }
  if (count != 1) {
    std::ostringstream msg;
    msg << "domain " << d.domain_of_node[node] << " borders " << count
        << " zero-set components on its outer side";
    throw NotATree(msg.str());
  }
  return up;
}

int inner_node(const NodalDecomposition& d, int component) {
  if (!d.zero.components.at(component).topology.compact)
    throw OpenComponent("zero-set component " + std::to_string(component) + " touches the box");
  const auto& nodes = d.component_nodes[component];
  if (nodes.size() != 2) {
    std::ostringstream msg;
    msg << "zero-set component " << component << " borders " << nodes.size() << " domains";
    throw NotATree(msg.str());
  }
  const int a = nodes[0], b = nodes[1];
  if (d.node_depth[a] == d.node_depth[b]) {
    std::ostringstream msg;
    msg << "zero-set component " << component << " lies on a cycle of the adjacency graph";
    throw NotATree(msg.str());
  }
  return d.node_depth[a] > d.node_depth[b] ? a : b;
}

namespace {

struct Built {
  RootedTree tree;
  std::vector<int> nodes;
  std::string code;
};

Built build_below(const NodalDecomposition& d, int node, int depth_guard) {
  if (depth_guard > 100000) throw NotATree("nesting depth exceeds the node count");
  std::vector<Built> kids;
  for (int c : d.node_components[node]) {
    if (d.component_depth[c] <= d.node_depth[node]) continue;
    const int child = inner_node(d, c);
    if (child == node) throw NotATree("zero-set component encloses its own outer domain");
    enclosing_component(d, child);  // validates a single outer boundary
    kids.push_back(build_below(d, child, depth_guard + 1));
  }
  std::sort(kids.begin(), kids.end(), [](const Built& a, const Built& b) {
    return a.code != b.code ? a.code < b.code : a.nodes.front() < b.nodes.front();
  });
  Built out;
  out.nodes.push_back(node);
  std::string code = "(";
  for (auto& k : kids) {
    code += k.code;
    out.tree.children.push_back(std::move(k.tree));
    out.nodes.insert(out.nodes.end(), k.nodes.begin(), k.nodes.end());
  }
  out.code = code + ")";
  return out;
}

}  // namespace

NestingTree nesting_tree_below(const NodalDecomposition& d, int node) {
  if (node <= 0 || node >= d.node_count()) throw OpenComponent("domain is not bounded");
  enclosing_component(d, node);
  auto b = build_below(d, node, 0);
  return {std::move(b.tree), std::move(b.nodes)};
}

NestingTree nesting_tree(const NodalDecomposition& d, int component) {
  return nesting_tree_below(d, inner_node(d, component));
}

nlohmann::json tree_to_json(const RootedTree& t) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : t.children) j.push_back(tree_to_json(c));
  return j;
}

std::pair<double, double> wilson_interval(long long successes, long long trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = double(trials), p = double(successes) / n, z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::vector<HistogramBin> make_histogram(const std::vector<std::string>& keys) {
  std::map<std::string, long long> counts;
  for (const auto& k : keys) ++counts[k];
  std::vector<HistogramBin> bins;
  const long long total = static_cast<long long>(keys.size());
  for (const auto& [k, c] : counts) {
    HistogramBin b;
    b.key = k;
    b.count = c;
    b.frequency = double(c) / double(total);
    std::tie(b.ci_low, b.ci_high) = wilson_interval(c, total);
    bins.push_back(b);
  }
  std::stable_sort(bins.begin(), bins.end(),
                   [](const HistogramBin& a, const HistogramBin& b) { return a.count > b.count; });
  return bins;
}

void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& bins) {
  os << "key,count,frequency,ci_low,ci_high\n";
  char buf[128];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof buf, ",%lld,%.12g,%.12g,%.12g\n", b.count, b.frequency, b.ci_low,
                  b.ci_high);
    os << '"' << b.key << '"' << buf;
  }
}

namespace {

struct SampleOutcome {
  std::vector<std::string> topology, trees;
  long long compact = 0, non_loop = 0, tree_failures = 0;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SampleOutcome analyze_sample(const EnsembleParams& p, int index, double h) {
  FieldSampleParams fp;
  fp.n = p.n;
  fp.N = p.waves;
  fp.seed = splitmix64(p.seed * 0x100000001b3ULL + std::uint64_t(index));
  const EigenField f = sample_rpw(fp);
  const auto d = decompose(sign_grid(f, Box::cube(p.n, -p.radius, p.radius), h));
  SampleOutcome out;
  for (std::size_t c = 0; c < d.zero.components.size(); ++c) {
    const auto& comp = d.zero.components[c];
    if (!comp.topology.compact || comp.max_radius >= p.radius) continue;
    ++out.compact;
    if (p.n == 2) {
      if (comp.topology.euler_characteristic != 0) ++out.non_loop;
      out.topology.push_back("loop");
    } else {
      out.topology.push_back(comp.topology.genus >= 0 ? "genus=" + std::to_string(comp.topology.genus)
                                                      : "chi=" + std::to_string(comp.topology.euler_characteristic));
    }
    try {
      out.trees.push_back(canonical_tree(nesting_tree(d, int(c)).tree));
    } catch (const Error&) {
      ++out.tree_failures;
    }
  }
  return out;
}

}  // namespace

EnsembleStats ensemble_stats(const EnsembleParams& p) {
  if (p.n != 2 && p.n != 3) throw DomainError("ensembles support n = 2, 3");
  if (p.samples < 1 || p.radius <= 0.0) throw DomainError("need samples >= 1 and radius > 0");
  const double h = p.h > 0.0 ? p.h : (p.n == 2 ? 0.1 : 0.2);
  std::vector<SampleOutcome> outcomes(p.samples);
  const int jobs = std::max(1, std::min(p.jobs, p.samples));
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < p.samples; i += jobs) {
        try {
          outcomes[i] = analyze_sample(p, i, h);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  EnsembleStats s;
  s.params = p;
  s.params.h = h;
  std::vector<std::string> topo, trees;
  for (const auto& o : outcomes) {
    s.compact_components += o.compact;
    s.non_loop_components += o.non_loop;
    s.tree_failures += o.tree_failures;
    topo.insert(topo.end(), o.topology.begin(), o.topology.end());
    trees.insert(trees.end(), o.trees.begin(), o.trees.end());
  }
  s.topology = make_histogram(topo);
  s.trees = make_histogram(trees);
  return s;
}

nlohmann::json to_json(const EnsembleStats& s) {
  auto bins = [](const std::vector<HistogramBin>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& b : v)
      a.push_back({{"key", b.key}, {"count", b.count}, {"frequency", b.frequency},
                   {"ci_low", b.ci_low}, {"ci_high", b.ci_high}});
    return a;
  };
  return {{"n", s.params.n},
          {"samples", s.params.samples},
          {"radius", s.params.radius},
          {"seed", s.params.seed},
          {"waves", s.params.waves},
          {"h", s.params.h},
          {"compact_components", s.compact_components},
          {"non_loop_components", s.non_loop_components},
          {"tree_failures", s.tree_failures},
          {"topology", bins(s.topology)},
          {"trees", bins(s.trees)}};
}

}  // namespace wavetopo

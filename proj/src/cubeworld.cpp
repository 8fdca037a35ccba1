#include "wavetopo/cubeworld.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace wavetopo {

namespace {

// Calls fn for every offset in {lo..hi}^n.
void for_each_offset(int n, int lo, int hi, const std::function<void(const LatticePoint&)>& fn) {
  LatticePoint d(n, lo);
  while (true) {
    fn(d);
    int i = 0;
    while (i < n && d[i] == hi) d[i++] = lo;
    if (i == n) return;
    ++d[i];
  }
}

LatticePoint add(LatticePoint a, const LatticePoint& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

LatticePoint sub(LatticePoint a, const LatticePoint& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

std::string point_str(const LatticePoint& p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + std::to_string(p[i]);
  return s + ")";
}

// Orders by x_n, then x_{n-1}, ..., then x_1.
bool reverse_lex_less(const LatticePoint& a, const LatticePoint& b) {
  return std::lexicographical_compare(a.rbegin(), a.rend(), b.rbegin(), b.rend());
}

unsigned join_mask(int n) { return n >= 2 ? (1u << (n - 2)) - 1u : 0u; }

void check_dims(const CubeStructure& s) {
  for (const auto& c : s.cubes)
    if (static_cast<int>(c.size()) != s.dim) throw InvalidStructure("cube has wrong dimension");
}

// Closed intersection of two touching unit cubes must lie in the face.
bool contact_within(const LatticePoint& c1, const LatticePoint& c2, const LatticeFace& f) {
  for (std::size_t i = 0; i < c1.size(); ++i) {
    const int d = c2[i] - c1[i];
    if (d == 0) {
      if (!f.is_free(static_cast<int>(i)) || f.base[i] != c1[i]) return false;
    } else {
      const int p = d > 0 ? c1[i] + 1 : c1[i];
      if (f.is_free(static_cast<int>(i))) {
        if (p < f.base[i] || p > f.base[i] + 1) return false;
      } else if (p != f.base[i]) {
        return false;
      }
    }
  }
  return true;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

int cube_sign(const LatticePoint& c) {
  int s = 0;
  for (int v : c) s += v;
  return (s % 2 == 0) ? 1 : -1;
}

std::vector<LatticePoint> LatticeFace::vertices() const {
  std::vector<LatticePoint> out;
  const int n = static_cast<int>(base.size());
  std::vector<int> axes;
  for (int i = 0; i < n; ++i)
    if (is_free(i)) axes.push_back(i);
  for (unsigned bits = 0; bits < (1u << axes.size()); ++bits) {
    LatticePoint p = base;
    for (std::size_t k = 0; k < axes.size(); ++k)
      if ((bits >> k) & 1u) ++p[axes[k]];
    out.push_back(std::move(p));
  }
  return out;
}

CubeStructure single_cube(const LatticePoint& c) {
  CubeStructure s;
  s.dim = static_cast<int>(c.size());
  s.polarity = cube_sign(c) > 0 ? Polarity::Plus : Polarity::Minus;
  s.cubes.insert(c);
  return s;
}

CubeStructure translated(const CubeStructure& s, const LatticePoint& t) {
  CubeStructure out{s.dim, s.polarity, {}};
  for (const auto& c : s.cubes) out.cubes.insert(add(c, t));
  return out;
}

std::vector<LatticePoint> enclosed_cells(const CubeStructure& s) {
  std::vector<LatticePoint> out;
  if (s.cubes.empty()) return out;
  const int n = s.dim;
  check_dims(s);
  // Flood fill of the complement in the bounding box grown by two cells;
  // face adjacency of empty cells is exact for the open complement.
  LatticePoint lo(n, std::numeric_limits<int>::max()), hi(n, std::numeric_limits<int>::min());
  for (const auto& c : s.cubes)
    for (int i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], c[i] - 2);
      hi[i] = std::max(hi[i], c[i] + 2);
    }
  std::vector<long long> stride(n);
  long long total = 1;
  for (int i = 0; i < n; ++i) {
    stride[i] = total;
    total *= (hi[i] - lo[i] + 1);
  }
  auto flat = [&](const LatticePoint& p) {
    long long k = 0;
    for (int i = 0; i < n; ++i) k += (p[i] - lo[i]) * stride[i];
    return k;
  };
  auto unflat = [&](long long k) {
    LatticePoint p(n);
    for (int i = 0; i < n; ++i) {
      p[i] = lo[i] + static_cast<int>(k % (hi[i] - lo[i] + 1));
      k /= (hi[i] - lo[i] + 1);
    }
    return p;
  };
  std::vector<char> state(total, 0);  // 0 empty, 1 cube, 2 reached
  for (const auto& c : s.cubes) state[flat(c)] = 1;
  std::vector<long long> stack{0};
  state[0] = 2;
  while (!stack.empty()) {
    const long long k = stack.back();
    stack.pop_back();
    const LatticePoint p = unflat(k);
    for (int i = 0; i < n; ++i)
      for (int d : {-1, 1}) {
        const int q = p[i] + d;
        if (q < lo[i] || q > hi[i]) continue;
        const long long kk = k + d * stride[i];
        if (state[kk] == 0) {
          state[kk] = 2;
          stack.push_back(kk);
        }
      }
  }
  for (long long k = 0; k < total; ++k)
    if (state[k] == 0) out.push_back(unflat(k));
  return out;
}

ValidationReport validate(const CubeStructure& s) {
  ValidationReport r;
  if (s.cubes.empty()) {
    r.nonempty = false;
    r.witness = "empty structure";
    return r;
  }
  const int n = s.dim;
  check_dims(s);

  // Cubes with a facet on the boundary carry the polarity sign.
  for (const auto& c : s.cubes) {
    for (int i = 0; i < n && r.boundary_signs; ++i)
      for (int d : {-1, 1}) {
        LatticePoint nb = c;
        nb[i] += d;
        if (!s.contains(nb) && cube_sign(c) != sign_of(s.polarity)) {
          r.boundary_signs = false;
          r.witness = "boundary cube " + point_str(c) + " has the wrong sign";
          break;
        }
      }
    if (!r.boundary_signs) break;
  }

  const auto holes = enclosed_cells(s);
  if (!holes.empty()) {
    r.complement_connected = false;
    if (r.witness.empty()) r.witness = "enclosed empty cell " + point_str(holes.front());
  }
  return r;
}

CubeStructure engulf(const CubeStructure& s) {
  const auto in = validate(s);
  if (!in.ok()) throw InvalidStructure("engulf: input invalid: " + in.witness);
  CubeStructure out{s.dim, flipped(s.polarity), s.cubes};
  const int want = -sign_of(s.polarity);
  for (const auto& c : s.cubes)
    for_each_offset(s.dim, -1, 1, [&](const LatticePoint& d) {
      const LatticePoint q = add(c, d);
      if (cube_sign(q) == want) out.cubes.insert(q);
    });
  // Two blocks meeting along an edge leave notches that the new layer can
  // close off; such cells are filled. They are interior, so signs still hold.
  for (const auto& c : enclosed_cells(out)) out.cubes.insert(c);
  const auto res = validate(out);
  if (!res.ok()) throw InvalidStructure("engulf: result invalid: " + res.witness);
  return out;
}

std::pair<LatticePoint, LatticePoint> extremal_vertices(const CubeStructure& s) {
  if (s.cubes.empty()) throw InvalidStructure("extremal_vertices: empty structure");
  LatticePoint vmax, vmin;
  bool first = true;
  for (const auto& c : s.cubes)
    for_each_offset(s.dim, 0, 1, [&](const LatticePoint& d) {
      const LatticePoint v = add(c, d);
      if (first || reverse_lex_less(vmax, v)) vmax = v;
      if (first || reverse_lex_less(v, vmin)) vmin = v;
      first = false;
    });
  return {vmax, vmin};
}

std::pair<LatticeFace, LatticeFace> extremal_edges(const CubeStructure& s) {
  const auto [vp, vm] = extremal_vertices(s);
  const unsigned mask = join_mask(s.dim);
  LatticePoint base = vp;
  for (int k = 0; k + 2 < s.dim; ++k) --base[k];
  return {LatticeFace{base, mask}, LatticeFace{vm, mask}};
}

JoinResult join(const CubeStructure& a, const CubeStructure& b) {
  if (a.dim != b.dim) throw InvalidStructure("join: dimension mismatch");
  if (a.polarity != b.polarity) throw PolarityMismatch("join: structures have different polarity");
  const LatticeFace ep = extremal_edges(a).first;
  const LatticePoint vm = extremal_vertices(b).second;
  const LatticePoint t = sub(ep.base, vm);
  int parity = 0;
  for (int v : t) parity += v;
  if (parity % 2 != 0)
    throw InvalidStructure("join: translation " + point_str(t) + " has odd coordinate sum");

  CubeStructure moved = translated(b, t);
  for (const auto& c1 : a.cubes)
    for_each_offset(a.dim, -1, 1, [&](const LatticePoint& d) {
      const LatticePoint c2 = add(c1, d);
      if (!moved.contains(c2)) return;
      if (std::all_of(d.begin(), d.end(), [](int v) { return v == 0; }))
        throw InvalidStructure("join: translated copy overlaps at " + point_str(c1));
      if (!contact_within(c1, c2, ep))
        throw InvalidStructure("join: cubes " + point_str(c1) + " and " + point_str(c2) +
                               " touch outside the joining face");
    });
  JoinResult r;
  r.joined = a;
  r.joined.cubes.insert(moved.cubes.begin(), moved.cubes.end());
  r.translation = t;
  r.edge = ep;
  const auto res = validate(r.joined);
  if (!res.ok()) throw InvalidStructure("join: result invalid: " + res.witness);
  return r;
}

CubeStructure join_all(const std::vector<CubeStructure>& parts) {
  if (parts.empty()) throw InvalidStructure("join of nothing");
  CubeStructure acc = parts.back();
  for (int j = static_cast<int>(parts.size()) - 2; j >= 0; --j) acc = join(parts[j], acc).joined;
  return acc;
}

namespace {

void shift_node(NodeRecord& r, const LatticePoint& t) {
  r.structure = translated(r.structure, t);
  if (!r.engulfed.cubes.empty()) r.engulfed = translated(r.engulfed, t);
  for (auto& f : r.join_faces) f.base = add(f.base, t);
  r.translation = add(r.translation, t);
}

int assemble(const RootedTree& t, int depth, std::vector<int> path, int parent,
             StructureAssembly& A) {
  const int n = A.dim;
  const int idx = static_cast<int>(A.nodes.size());
  A.nodes.push_back({});
  A.nodes[idx].path = std::move(path);
  A.nodes[idx].parent = parent;
  A.nodes[idx].depth = depth;
  A.nodes[idx].translation.assign(n, 0);

  if (t.is_leaf()) {
    const bool positive = sign_of(A.root_polarity) * (depth % 2 ? -1 : 1) > 0;
    LatticePoint c(n, 0);
    if (!positive) c[0] = 1;
    A.nodes[idx].structure = single_cube(c);
    return idx;
  }

  std::vector<std::pair<int, int>> ranges;  // preorder subtree [begin, end)
  for (std::size_t j = 0; j < t.children.size(); ++j) {
    std::vector<int> cp = A.nodes[idx].path;
    cp.push_back(static_cast<int>(j) + 1);
    const int c = assemble(t.children[j], depth + 1, std::move(cp), idx, A);
    A.nodes[idx].children.push_back(c);
    ranges.push_back({c, static_cast<int>(A.nodes.size())});
    A.nodes[c].engulfed = engulf(A.nodes[c].structure);
  }

  const int N = static_cast<int>(ranges.size());
  CubeStructure acc = A.nodes[ranges[N - 1].first].engulfed;
  int acc_begin = ranges[N - 1].first;
  std::vector<LatticeFace> faces;
  for (int j = N - 2; j >= 0; --j) {
    const JoinResult r = join(A.nodes[ranges[j].first].engulfed, acc);
    for (int k = acc_begin; k < static_cast<int>(A.nodes.size()); ++k)
      shift_node(A.nodes[k], r.translation);
    // Faces from earlier joins sit on the block that just moved.
    for (auto& f : faces) f.base = add(f.base, r.translation);
    faces.push_back(r.edge);
    acc = r.joined;
    acc_begin = ranges[j].first;
  }
  std::reverse(faces.begin(), faces.end());
  A.nodes[idx].join_faces = std::move(faces);
  A.nodes[idx].structure = std::move(acc);
  return idx;
}

struct PointHash {
  std::size_t operator()(const LatticePoint& p) const {
    std::size_t h = 0;
    for (int v : p) h = h * 1000003u ^ static_cast<std::size_t>(v + 0x9e3779b9);
    return h;
  }
};

struct FaceHash {
  std::size_t operator()(const LatticeFace& f) const { return PointHash{}(f.base) * 31u + f.free_mask; }
};

// Calls fn on every codimension-two face of every cube (with repeats).
template <class Fn>
void for_each_cube_edge(const CubeStructure& s, Fn&& fn) {
  const int n = s.dim;
  const unsigned all = (1u << n) - 1u;
  for (const auto& c : s.cubes)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int ai = 0; ai < 2; ++ai)
          for (int aj = 0; aj < 2; ++aj) {
            LatticeFace f{c, all & ~(1u << i) & ~(1u << j)};
            f.base[i] += ai;
            f.base[j] += aj;
            fn(f);
          }
}

// Summed-area table of cube membership over the bounding box, so that any
// axis-aligned window count costs 2^n lookups.
class Occupancy {
 public:
  explicit Occupancy(const std::vector<const CubeStructure*>& parts) {
    for (const auto* part : parts)
      for (const auto& c : part->cubes) {
        if (lo_.empty()) {
          lo_ = hi_ = c;
          continue;
        }
        for (std::size_t i = 0; i < c.size(); ++i) {
          lo_[i] = std::min(lo_[i], c[i]);
          hi_[i] = std::max(hi_[i], c[i]);
        }
      }
    n_ = static_cast<int>(lo_.size());
    if (n_ == 0) return;
    // Table index k_i = c_i - lo_i + 1; row 0 holds zeros.
    stride_.resize(n_);
    long long total = 1;
    for (int i = 0; i < n_; ++i) {
      stride_[i] = total;
      total *= hi_[i] - lo_[i] + 2;
    }
    sum_.assign(total, 0);
    for (const auto* part : parts)
      for (const auto& c : part->cubes) {
        long long k = 0;
        for (int i = 0; i < n_; ++i) k += (c[i] - lo_[i] + 1) * stride_[i];
        sum_[k] = 1;
      }
    for (int i = 0; i < n_; ++i) {
      const long long len = hi_[i] - lo_[i] + 2;
      for (long long k = 0; k < total; ++k)
        if ((k / stride_[i]) % len != 0) sum_[k] += sum_[k - stride_[i]];
    }
  }

  const LatticePoint& lo() const { return lo_; }
  const LatticePoint& hi() const { return hi_; }

  // Number of cubes c with a_i <= c_i <= b_i.
  int count(const int* a, const int* b) const {
    if (n_ == 0) return 0;
    int ka[8], kb[8];
    for (int i = 0; i < n_; ++i) {
      ka[i] = std::max(a[i], lo_[i]) - lo_[i];      // exclusive lower row
      kb[i] = std::min(b[i], hi_[i]) - lo_[i] + 1;  // inclusive upper row
      if (kb[i] <= ka[i]) return 0;
    }
    int total = 0;
    for (unsigned corner = 0; corner < (1u << n_); ++corner) {
      long long k = 0;
      int sign = 1;
      for (int i = 0; i < n_; ++i) {
        if ((corner >> i) & 1u) {
          k += ka[i] * stride_[i];
          sign = -sign;
        } else {
          k += kb[i] * stride_[i];
        }
      }
      total += sign * sum_[k];
    }
    return total;
  }

  // Exact shell test: no cube within open distance one of the face, and a
  // cube whose closed unit dilation covers it. Both are window counts.
  bool shell(const LatticeFace& f) const {
    int a[8], b[8];
    for (int i = 0; i < n_; ++i) {
      a[i] = f.base[i] - 1;
      b[i] = f.base[i] + (f.is_free(i) ? 1 : 0);
    }
    if (count(a, b) > 0) return false;
    for (int i = 0; i < n_; ++i) {
      a[i] = f.base[i] - (f.is_free(i) ? 1 : 2);
      b[i] = f.base[i] + 1;
    }
    return count(a, b) > 0;
  }

 private:
  int n_ = 0;
  LatticePoint lo_, hi_;
  std::vector<long long> stride_;
  std::vector<int> sum_;
};

Occupancy children_occupancy(const StructureAssembly& a, int node) {
  std::vector<const CubeStructure*> parts;
  for (int c : a.nodes[node].children) parts.push_back(&a.nodes[c].structure);
  return Occupancy(parts);
}

// Vertex test against S_ext of a node: the cube's vertices for a leaf, the
// shell of its children otherwise.
bool vertex_on_surface(const StructureAssembly& a, int node, const LatticePoint& v,
                       const Occupancy& children) {
  const auto& rec = a.nodes[node];
  if (rec.children.empty()) {
    const auto& c = *rec.structure.cubes.begin();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] != c[i] && v[i] != c[i] + 1) return false;
    return true;
  }
  return children.shell(LatticeFace{v, 0u});
}

}  // namespace

StructureAssembly build_structure(const RootedTree& t, int dim, Polarity root_polarity) {
  if (dim < 2) throw InvalidStructure("build_structure needs n >= 2");
  StructureAssembly A;
  A.dim = dim;
  A.root_polarity = root_polarity;
  A.tree = t;
  assemble(t, 0, {}, -1, A);
  return A;
}

bool face_in_shell(const LatticeFace& f, const std::set<LatticePoint>& cubes) {
  if (cubes.empty()) return false;
  const CubeStructure tmp{static_cast<int>(f.base.size()), Polarity::Plus, cubes};
  return Occupancy({&tmp}).shell(f);
}

std::set<LatticeFace> structure_edges(const CubeStructure& s) {
  std::unordered_set<LatticeFace, FaceHash> seen;
  for_each_cube_edge(s, [&](const LatticeFace& f) { seen.insert(f); });
  return {seen.begin(), seen.end()};
}

EdgeClasses classify_edges(const StructureAssembly& a, int node) {
  if (node < 0 || node >= static_cast<int>(a.nodes.size()))
    throw InvalidStructure("classify_edges: node index out of range");
  if (a.dim < 3) throw DomainError("edge classes are defined for n >= 3");
  const auto& rec = a.nodes[node];
  EdgeClasses out;
  if (rec.children.empty()) {
    const auto e = structure_edges(rec.structure);
    out.exterior.assign(e.begin(), e.end());
    return out;
  }
  const int n = a.dim;
  const Occupancy U = children_occupancy(a, node);
  const std::set<LatticeFace> joins(rec.join_faces.begin(), rec.join_faces.end());

  const unsigned all = (1u << n) - 1u;
  std::set<LatticeFace> shell;
  // Shell faces have their base in [lo - 1, hi + 2].
  LatticePoint p(n);
  for (int i = 0; i < n; ++i) p[i] = U.lo()[i] - 1;
  while (true) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const LatticeFace f{p, all & ~(1u << i) & ~(1u << j)};
        if (U.shell(f)) shell.insert(f);
      }
    int i = 0;
    while (i < n && p[i] == U.hi()[i] + 2) {
      p[i] = U.lo()[i] - 1;
      ++i;
    }
    if (i == n) break;
    ++p[i];
  }

  for (const auto& f : joins)
    if (!shell.count(f)) throw InvalidStructure("join face is not on the exterior surface");
  for (const auto& f : shell)
    if (!joins.count(f)) out.exterior.push_back(f);
  out.join.assign(rec.join_faces.begin(), rec.join_faces.end());

  std::vector<Occupancy> grand;
  for (int c : rec.children) grand.push_back(children_occupancy(a, c));
  // Per-vertex flags: on the node's shell, on some child's surface.
  std::unordered_map<LatticePoint, std::pair<bool, bool>, PointHash> flags;
  auto vertex_flags = [&](const LatticePoint& v) {
    auto it = flags.find(v);
    if (it != flags.end()) return it->second;
    bool outer = U.shell(LatticeFace{v, 0u}), inner = false;
    for (std::size_t j = 0; j < rec.children.size() && !inner; ++j)
      inner = vertex_on_surface(a, rec.children[j], v, grand[j]);
    return flags.emplace(v, std::make_pair(outer, inner)).first->second;
  };
  std::unordered_set<LatticeFace, FaceHash> shell_hash(shell.begin(), shell.end());
  std::map<LatticeFace, std::vector<LatticePoint>> interior;
  for_each_cube_edge(rec.structure, [&](const LatticeFace& f) {
    if (shell_hash.count(f) || interior.count(f)) return;
    bool outer = false;
    std::vector<LatticePoint> inner;
    for (const auto& v : f.vertices()) {
      // In n >= 4 a vertex can sit on both surfaces; build_h rejects the
      // resulting two-valued h.
      const auto [o, i] = vertex_flags(v);
      outer = outer || o;
      if (i) inner.push_back(v);
    }
    if (outer && !inner.empty()) interior.emplace(f, std::move(inner));
  });
  for (auto& [f, inner] : interior) {
    out.interior.push_back(f);
    out.interior_anchors.push_back(std::move(inner));
  }
  return out;
}

bool faces_connected(const std::vector<LatticeFace>& faces) {
  if (faces.empty()) return true;
  UnionFind uf(static_cast<int>(faces.size()));
  std::map<LatticePoint, int> owner;
  for (int k = 0; k < static_cast<int>(faces.size()); ++k)
    for (const auto& v : faces[k].vertices()) {
      auto [it, inserted] = owner.emplace(v, k);
      if (!inserted) uf.unite(k, it->second);
    }
  // Point faces (n = 2) are linked by unit lattice steps.
  for (int k = 0; k < static_cast<int>(faces.size()); ++k) {
    if (faces[k].free_mask != 0) continue;
    for (std::size_t i = 0; i < faces[k].base.size(); ++i) {
      LatticePoint q = faces[k].base;
      ++q[i];
      auto it = owner.find(q);
      if (it != owner.end() && faces[it->second].free_mask == 0) uf.unite(k, it->second);
    }
  }
  const int root = uf.find(0);
  for (int k = 1; k < static_cast<int>(faces.size()); ++k)
    if (uf.find(k) != root) return false;
  return true;
}

nlohmann::json to_json(const CubeStructure& s) {
  nlohmann::json cubes = nlohmann::json::array();
  for (const auto& c : s.cubes) cubes.push_back(c);
  return {{"polarity", s.polarity == Polarity::Plus ? "plus" : "minus"}, {"cubes", cubes}};
}

CubeStructure structure_from_json(const nlohmann::json& j) {
  try {
    CubeStructure s;
    const std::string pol = j.at("polarity").get<std::string>();
    if (pol != "plus" && pol != "minus") throw ParseError("polarity must be plus or minus");
    s.polarity = pol == "plus" ? Polarity::Plus : Polarity::Minus;
    const auto& cubes = j.at("cubes");
    s.dim = cubes.empty() ? 3 : static_cast<int>(cubes.at(0).size());
    for (const auto& c : cubes) {
      auto p = c.get<LatticePoint>();
      if (static_cast<int>(p.size()) != s.dim) throw ParseError("cubes have mixed dimensions");
      s.cubes.insert(std::move(p));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed structure JSON: ") + e.what());
  }
}

}  // namespace wavetopo

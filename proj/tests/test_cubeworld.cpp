#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "tree_gen.hpp"
#include "wavetopo/cubeworld.hpp"

using namespace wavetopo;
using wavetopo::testing::ordered_trees;

namespace {

CubeStructure make(int dim, Polarity p, std::vector<LatticePoint> cubes) {
  return CubeStructure{dim, p, std::set<LatticePoint>(cubes.begin(), cubes.end())};
}

// Random valid structures: subassemblies of random small trees, moved by a
// random axis permutation, reflections and translation.
std::vector<CubeStructure> random_structures(int count, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<CubeStructure> out;
  std::vector<std::vector<RootedTree>> pool(6);
  for (int k = 1; k <= 5; ++k) pool[k] = ordered_trees(k);
  while (static_cast<int>(out.size()) < count) {
    const int n = 2 + static_cast<int>(rng() % 2);
    const int k = 1 + static_cast<int>(rng() % 5);
    const auto& t = pool[k][rng() % pool[k].size()];
    const auto a = build_structure(t, n, rng() % 2 ? Polarity::Plus : Polarity::Minus);
    const auto& base = a.nodes[rng() % a.nodes.size()].structure;
    if (base.cubes.size() > 40) continue;

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> flip(n), shift(n);
    for (int i = 0; i < n; ++i) {
      flip[i] = static_cast<int>(rng() % 2);
      shift[i] = static_cast<int>(rng() % 7) - 3;
    }
    CubeStructure s{n, base.polarity, {}};
    for (const auto& c : base.cubes) {
      LatticePoint q(n);
      for (int i = 0; i < n; ++i) q[i] = (flip[i] ? -c[perm[i]] - 1 : c[perm[i]]) + shift[i];
      s.cubes.insert(q);
    }
    // The motion may flip every sign; polarity follows.
    const auto& c0 = *base.cubes.begin();
    LatticePoint q0(n);
    for (int i = 0; i < n; ++i) q0[i] = (flip[i] ? -c0[perm[i]] - 1 : c0[perm[i]]) + shift[i];
    if (cube_sign(q0) != cube_sign(c0)) s.polarity = flipped(s.polarity);
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t brute_engulf_count(int n) {
  std::size_t odd = 0;
  std::vector<int> d(n, -1);
  while (true) {
    int w = 0;
    for (int v : d) w += v != 0;
    odd += w % 2;
    int i = 0;
    while (i < n && d[i] == 1) d[i++] = -1;
    if (i == n) break;
    ++d[i];
  }
  return 1 + odd;
}

}  // namespace

TEST_CASE("cube signs") {
  CHECK(cube_sign({0, 0, 0}) == 1);
  CHECK(cube_sign({1, 0, 0}) == -1);
  CHECK(cube_sign({1, 1, 0}) == 1);
  CHECK(cube_sign({-1, 0, 0}) == -1);
  CHECK(cube_sign({-3, 1}) == 1);
}

TEST_CASE("validation examples") {
  CHECK(validate(single_cube({0, 0, 0})).ok());
  CHECK(validate(make(3, Polarity::Plus, {{0, 0, 0}, {1, 1, 0}})).ok());

  CubeStructure hollow{3, Polarity::Plus, {}};
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      for (int z = 0; z < 3; ++z)
        if (!(x == 1 && y == 1 && z == 1)) hollow.cubes.insert({x, y, z});
  const auto r = validate(hollow);
  CHECK_FALSE(r.complement_connected);
  CHECK_FALSE(r.ok());
  CHECK_FALSE(r.witness.empty());

  // A negative cube with an exposed facet breaks a plus structure.
  CHECK_FALSE(validate(make(3, Polarity::Plus, {{0, 0, 0}, {1, 0, 0}})).boundary_signs);
  CHECK_FALSE(validate(CubeStructure{3, Polarity::Plus, {}}).ok());
}

TEST_CASE("engulf counts") {
  CHECK(engulf(single_cube({0, 0, 0})).cubes.size() == 15);
  CHECK(engulf(single_cube({0, 0})).cubes.size() == 5);
  for (int n = 2; n <= 5; ++n) {
    const auto e = engulf(single_cube(LatticePoint(n, 0)));
    CHECK(e.cubes.size() == brute_engulf_count(n));
    std::size_t formula = 1;
    for (int k = 1; k <= n; k += 2) {
      std::size_t binom = 1;
      for (int i = 0; i < k; ++i) binom = binom * (n - i) / (i + 1);
      formula += binom << k;
    }
    CHECK(e.cubes.size() == formula);
    CHECK(e.polarity == Polarity::Minus);
  }
  const auto ee = engulf(engulf(single_cube({0, 0, 0})));
  CHECK(validate(ee).complement_connected);
  CHECK(ee.polarity == Polarity::Plus);
  CHECK_THROWS_AS(engulf(make(3, Polarity::Minus, {{0, 0, 0}})), InvalidStructure);
}

TEST_CASE("extremal vertices and edges") {
  const auto c = single_cube({0, 0, 0});
  const auto [vp, vm] = extremal_vertices(c);
  CHECK(vp == LatticePoint{1, 1, 1});
  CHECK(vm == LatticePoint{0, 0, 0});
  const auto [ep, em] = extremal_edges(c);
  CHECK(ep.base == LatticePoint{0, 1, 1});
  CHECK(ep.free_mask == 1u);
  CHECK(em.base == LatticePoint{0, 0, 0});
  CHECK(extremal_vertices(engulf(c)).first == LatticePoint{2, 2, 2});
  CHECK(extremal_vertices(engulf(c)).second == LatticePoint{-1, -1, -1});
}

TEST_CASE("join examples") {
  const auto c = single_cube({0, 0, 0});
  const auto r = join(c, c);
  CHECK(r.translation == LatticePoint{0, 1, 1});
  CHECK(r.joined.cubes == std::set<LatticePoint>{{0, 0, 0}, {0, 1, 1}});
  CHECK(validate(r.joined).ok());
  CHECK(join_all({c}) == c);
  CHECK_THROWS_AS(join(c, single_cube({1, 0, 0})), PolarityMismatch);
}

TEST_CASE("random structures: engulf validity and join parity") {
  const auto structures = random_structures(200, 7);
  int joins = 0;
  for (std::size_t i = 0; i < structures.size(); ++i) {
    const auto& s = structures[i];
    REQUIRE(validate(s).ok());
    CubeStructure e;
    REQUIRE_NOTHROW(e = engulf(s));
    CHECK(validate(e).ok());
    CHECK(e.polarity == flipped(s.polarity));
    for (const auto& c : s.cubes) CHECK(e.contains(c));

    const auto& o = structures[(i * 37 + 11) % structures.size()];
    if (o.dim != s.dim || o.polarity != s.polarity) continue;
    // Parity from the extremal data alone, independent of join().
    auto t = extremal_edges(s).first.base;
    const auto vm = extremal_vertices(o).second;
    int sum = 0;
    for (std::size_t k = 0; k < t.size(); ++k) sum += t[k] - vm[k];
    CHECK(sum % 2 == 0);
    JoinResult r;
    REQUIRE_NOTHROW(r = join(s, o));
    CHECK(validate(r.joined).ok());
    ++joins;
  }
  CHECK(joins > 20);
}

TEST_CASE("engulf fills cells closed off by the new layer") {
  // Valid plus structure whose engulf closes a ring of odd cubes around (3,1).
  const auto s = make(2, Polarity::Plus, {{0, 4}, {2, 0}, {2, 2}, {2, 4}, {4, 0}, {4, 2}});
  REQUIRE(validate(s).ok());
  auto plain = s;
  for (const auto& c : s.cubes)
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        if (cube_sign({c[0] + dx, c[1] + dy}) < 0) plain.cubes.insert({c[0] + dx, c[1] + dy});
  plain.polarity = Polarity::Minus;
  const auto holes = enclosed_cells(plain);
  CHECK(std::find(holes.begin(), holes.end(), LatticePoint{3, 1}) != holes.end());
  CHECK_FALSE(validate(plain).ok());
  const auto e = engulf(s);
  CHECK(validate(e).ok());
  CHECK(e.cubes.size() == plain.cubes.size() + holes.size());
  for (const auto& h : holes) CHECK(e.contains(h));

  // Same situation in three dimensions: two joined blocks.
  const auto block = engulf(single_cube({0, 0, 0}));
  const auto joined = join(block, block).joined;
  const auto ee = engulf(joined);
  CHECK(validate(ee).ok());
  CHECK(ee.contains({0, 2, 1}));
}

TEST_CASE("tree assembly examples") {
  const auto single = build_structure(parse_tree("[]"), 3);
  CHECK(single.root_structure().cubes.size() == 1);

  const auto ex1 = build_structure(parse_tree("[[]]"), 3);
  CHECK(ex1.nodes.size() == 2);
  CHECK(ex1.root_structure().cubes.size() == 15);
  CHECK(ex1.root_structure() == engulf(ex1.nodes[1].structure));
  // Leaf at depth one under a minus root is positive.
  CHECK(cube_sign(*ex1.nodes[1].structure.cubes.begin()) == 1);

  const auto ex2 = build_structure(parse_tree("[[],[]]"), 3);
  CHECK(ex2.root_structure().cubes.size() == 30);
  CHECK(ex2.nodes[0].join_faces.size() == 1);

  const auto again = build_structure(parse_tree("[[],[]]"), 3);
  CHECK(again.root_structure() == ex2.root_structure());
  CHECK(again.nodes[2].translation == ex2.nodes[2].translation);
}

TEST_CASE("edge classes: leaf and the engulfed cube") {
  const auto ex1 = build_structure(parse_tree("[[]]"), 3);
  const auto leaf = classify_edges(ex1, 1);
  CHECK(leaf.exterior.size() == 12);
  CHECK(leaf.interior.empty());
  CHECK(leaf.join.empty());

  const auto root = classify_edges(ex1, 0);
  CHECK(root.exterior.size() == 108);
  CHECK(root.join.empty());
  CHECK(root.interior.size() == 24);
  // Every exterior edge lies on the surface of the box [-1,2]^3.
  for (const auto& f : root.exterior) {
    bool on_surface = false;
    for (const auto& v : f.vertices())
      for (int x : v) on_surface = on_surface || x == -1 || x == 2;
    bool all_on = true;
    for (int i = 0; i < 3; ++i) {
      if (f.is_free(i)) continue;
      (void)i;
    }
    int fixed_on_face = 0;
    for (int i = 0; i < 3; ++i)
      if (!f.is_free(i) && (f.base[i] == -1 || f.base[i] == 2)) ++fixed_on_face;
    all_on = fixed_on_face >= 1;
    CHECK(all_on);
    CHECK(on_surface);
  }
}

TEST_CASE("edge classes: two children joined") {
  const auto ex2 = build_structure(parse_tree("[[],[]]"), 3);
  const auto root = classify_edges(ex2, 0);
  REQUIRE(root.join.size() == 1);
  const auto& j = root.join[0];
  // Endpoints of the open join edge belong to exterior edges of the root.
  std::set<LatticePoint> ext_vertices;
  for (const auto& f : root.exterior)
    for (const auto& v : f.vertices()) ext_vertices.insert(v);
  for (const auto& v : j.vertices()) CHECK(ext_vertices.count(v) == 1);
  CHECK(std::find(root.exterior.begin(), root.exterior.end(), j) == root.exterior.end());
  CHECK(faces_connected(root.exterior));
}

TEST_CASE("assemblies of small trees: connectivity and full labelling") {
  for (int n : {3, 4}) {
    const int max_nodes = n == 3 ? 8 : 5;
    for (int k = 1; k <= max_nodes; ++k)
      for (const auto& t : ordered_trees(k)) {
        INFO("n=" << n << " tree " << tree_to_string(t));
        StructureAssembly a;
        REQUIRE_NOTHROW(a = build_structure(t, n));
        CHECK(validate(a.root_structure()).ok());
        std::map<LatticeFace, int> labels;
        std::vector<std::vector<LatticeFace>> ext(a.nodes.size());
        for (int v = 0; v < static_cast<int>(a.nodes.size()); ++v) {
          const auto cls = classify_edges(a, v);
          CHECK(faces_connected(cls.exterior));
          ext[v] = cls.exterior;
          for (const auto* set : {&cls.exterior, &cls.interior, &cls.join})
            for (const auto& f : *set) ++labels[f];
        }
        long shared = 0;
        for (int v = 1; v < static_cast<int>(a.nodes.size()); ++v) {
          const std::set<LatticeFace> mine(ext[v].begin(), ext[v].end());
          for (const auto& f : ext[a.nodes[v].parent]) shared += mine.count(f);
        }
        CHECK(shared == 0);
        long unlabeled = 0;
        for (const auto& f : structure_edges(a.root_structure()))
          if (!labels.count(f)) ++unlabeled;
        CHECK(unlabeled == 0);
      }
  }
}

TEST_CASE("in n = 4 a depth-two root shell touches the child's exterior surface") {
  for (int n : {3, 4}) {
    const auto a = build_structure(parse_tree("[[[]]]"), n);
    std::set<LatticePoint> child_ext;
    for (const auto& f : classify_edges(a, 1).exterior)
      for (const auto& v : f.vertices()) child_ext.insert(v);
    long touching = 0;
    for (const auto& f : structure_edges(a.root_structure()))
      if (face_in_shell(f, a.nodes[1].structure.cubes))
        for (const auto& v : f.vertices()) touching += child_ext.count(v);
    INFO("n=" << n);
    CHECK((touching > 0) == (n == 4));
  }
}

TEST_CASE("edge classes need n >= 3") {
  const auto a = build_structure(parse_tree("[[]]"), 2);
  CHECK(a.root_structure().cubes.size() == 5);
  CHECK_THROWS_AS(classify_edges(a, 0), DomainError);
}

TEST_CASE("structure JSON round trip") {
  const auto s = engulf(single_cube({0, 0, 0}));
  CHECK(structure_from_json(to_json(s)) == s);
  CHECK_THROWS_AS(structure_from_json(nlohmann::json::parse(R"({"polarity":"up","cubes":[]})")),
                  ParseError);
  CHECK_THROWS_AS(structure_from_json(nlohmann::json::parse(R"({"cubes":[[0,0]]})")), ParseError);
}

// Command-line front end: realize-tree, realize-surface, sample, analyze, stats.
//
// Exit codes: 0 success, 1 usage / parse / I/O error, 2 verification failure,
// 3 fit failure (singular fit, or a missed C^1 target under --strict-fit).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "wavetopo/eigenfield.hpp"
#include "wavetopo/errors.hpp"
#include "wavetopo/nodal.hpp"
#include "wavetopo/realize.hpp"
#include "wavetopo/realize_tree.hpp"
#include "wavetopo/tree.hpp"

namespace fs = std::filesystem;
using namespace wavetopo;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  return dir;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  w(out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file(path, [&](std::ostream& os) { os << j.dump(2) << "\n"; });
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

RootedTree read_tree(const std::string& inline_tree, const std::string& file) {
  std::string text = file.empty() ? inline_tree : read_file(file);
  if (!file.empty()) text = parse_json(text, file).dump();
  text.erase(std::remove_if(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }),
             text.end());
  return parse_tree(text);
}

// "lo:hi" for every axis, or comma-separated per-axis ranges.
Box parse_box(const std::string& spec, int dim) {
  std::vector<std::pair<double, double>> ranges;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto colon = part.find(':', part[0] == '-' ? 1 : 0);
    if (colon == std::string::npos) throw ParseError("box range needs lo:hi, got " + part);
    try {
      ranges.emplace_back(std::stod(part.substr(0, colon)), std::stod(part.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ParseError("bad box range " + part);
    }
  }
  if (ranges.size() == 1) ranges.resize(dim, ranges.front());
  if (static_cast<int>(ranges.size()) != dim)
    throw ParseError("box has " + std::to_string(ranges.size()) + " ranges for a " +
                     std::to_string(dim) + "-dimensional field");
  Box b{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  for (int d = 0; d < dim; ++d) {
    b.lo[d] = ranges[d].first;
    b.hi[d] = ranges[d].second;
    if (!(b.hi[d] > b.lo[d])) throw DomainError("box range must have lo < hi");
  }
  return b;
}

nlohmann::json histogram_json(const std::vector<HistogramBin>& bins) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& b : bins) a.push_back({{"key", b.key}, {"count", b.count}, {"frequency", b.frequency}});
  return a;
}

// ---- realize-tree ----------------------------------------------------------

struct RealizeTreeArgs {
  std::string tree, tree_file, out = "realize_tree_out", fit = "auto";
  RealizeTreeParams p;
  bool strict_fit = false;
};

int run_realize_tree(const RealizeTreeArgs& a) {
  const RootedTree t = read_tree(a.tree, a.tree_file);
  RealizeTreeParams p = a.p;
  if (a.fit == "lsq") p.fit_mode = FitMode::LeastSquares;
  else if (a.fit == "sign") p.fit_mode = FitMode::SignFeasible;
  else p.fit_mode = FitMode::Auto;
  const fs::path dir = output_dir(a.out);

  const RealizeTreeResult r = realize_and_verify(t, p);
  const auto& rep = r.report;
  write_json(dir / "fit_report.json", to_json(rep));
  write_json(dir / "u_eps.json", to_json(r.u_eps));
  write_file(dir / "zero_set.obj", [&](std::ostream& os) { write_obj(os, r.mesh); });
  write_json(dir / "extracted_tree.json",
             {{"tree", rep.extracted_tree.empty() ? nlohmann::json() : tree_to_json(r.extracted)},
              {"canonical", rep.extracted_canonical},
              {"input", rep.input_tree},
              {"isomorphic", rep.pass}});

  std::printf("%s input %s extracted %s  fit C1 error %.4g (target %.4g, %s)  %.1fs\n",
              rep.pass ? "PASS" : "FAIL", rep.input_tree.c_str(),
              rep.extracted_tree.empty() ? "-" : rep.extracted_tree.c_str(),
              rep.fit.achieved_sup_c1_error, rep.fit.target,
              rep.fit.met_target ? "met" : "missed", rep.seconds);
  if (!rep.pass) {
    std::fprintf(stderr, "verification failed: %s\n", rep.failure.c_str());
    return 2;
  }
  if (a.strict_fit && !rep.fit_target_met()) return 3;
  return 0;
}

// ---- realize-surface ---------------------------------------------------------

struct RealizeSurfaceArgs {
  std::string shape = "torus", domain_file, out = "realize_surface_out";
  double radius = 1.0, major = 2.0, minor = 0.8, exponent = 4.0;
  std::vector<double> axes{1.0, 1.0, 1.0};
  RealizeSurfaceParams p;
  bool strict_fit = false;
};

int run_realize_surface(const RealizeSurfaceArgs& a) {
  Shape s;
  if (!a.domain_file.empty()) {
    s = shape_from_json(parse_json(read_file(a.domain_file), a.domain_file));
  } else {
    nlohmann::json j = {{"shape", a.shape}};
    if (a.shape == "ball") j["radius"] = a.radius;
    if (a.shape == "torus") j.update({{"R", a.major}, {"r", a.minor}});
    if (a.shape == "superellipsoid") j.update({{"axes", a.axes}, {"p", a.exponent}});
    s = shape_from_json(j);
  }
  const fs::path dir = output_dir(a.out);
  const RealizeSurfaceResult r = realize_component(s, a.p);
  nlohmann::json j = to_json(r.report);
  j["domain"] = to_json(s);
  write_json(dir / "surface_report.json", j);
  write_json(dir / "field.json", to_json(r.field));
  write_file(dir / "surface.obj", [&](std::ostream& os) { write_obj(os, r.mesh); });
  std::printf("genus %d (refined %d, %s)  lambda %.6f  hausdorff %.4g  fit C1 error %.4g (%s)\n",
              r.topology.genus, r.report.refined_genus,
              r.report.genus_stable ? "stable" : "unstable", r.report.lambda, r.report.hausdorff,
              r.report.fit.achieved_sup_c1_error, r.report.fit.met_target ? "met" : "missed");
  if (!r.report.genus_stable) return 2;
  if (a.strict_fit && !r.report.fit.met_target) return 3;
  return 0;
}

// ---- sample ------------------------------------------------------------------

struct SampleArgs {
  FieldSampleParams p;
  std::string out = "field.json";
};

int run_sample(const SampleArgs& a) {
  const EigenField f = sample_rpw(a.p);
  if (auto parent = fs::path(a.out).parent_path(); !parent.empty()) output_dir(parent.string());
  write_json(a.out, to_json(f));
  return 0;
}

// ---- analyze -----------------------------------------------------------------

struct AnalyzeArgs {
  std::string field, box = "-10:10", out = "analyze_out";
  double res = 0.1, grad_tol = 0.0;
};

int run_analyze(const AnalyzeArgs& a) {
  const EigenField f = field_from_json(parse_json(read_file(a.field), a.field));
  const Box box = parse_box(a.box, f.dim());
  const fs::path dir = output_dir(a.out);

  ZeroSetResult z = extract_zero_set(f, box, a.res, a.grad_tol);
  const NodalDecomposition d = decompose(z.grid);

  std::vector<std::string> topo, trees;
  long long failures = 0;
  for (int c = 0; c < static_cast<int>(d.zero.components.size()); ++c) {
    const auto& comp = d.zero.components[c];
    if (!comp.topology.compact) continue;
    topo.push_back(f.dim() == 2 ? "chi=" + std::to_string(comp.topology.euler_characteristic)
                                : "genus=" + std::to_string(comp.topology.genus));
    try {
      trees.push_back(canonical_tree(nesting_tree(d, c).tree));
    } catch (const NotATree&) {
      ++failures;
    } catch (const OpenComponent&) {
      ++failures;
    }
  }
  int positive = 0;
  for (int s : d.domains.sign) positive += s > 0;
  nlohmann::json j = {
      {"dim", f.dim()},
      {"box", {{"lo", std::vector<double>(box.lo.data(), box.lo.data() + box.dim())},
               {"hi", std::vector<double>(box.hi.data(), box.hi.data() + box.dim())}}},
      {"resolution", a.res},
      {"samples", z.grid.grid.count()},
      {"nudged_samples", z.grid.nudged},
      {"domains", d.domains.count()},
      {"positive_domains", positive},
      {"bounded_domains", d.domains.bounded_count()},
      {"domains_with_boundary_merged", d.domains.merged_count()},
      {"zero_components", d.zero.components.size()},
      {"compact_components", topo.size()},
      {"min_gradient_ratio", z.min_gradient_ratio},
      {"topology", histogram_json(make_histogram(topo))},
      {"nesting_trees", histogram_json(make_histogram(trees))},
      {"nesting_failures", failures}};
  write_json(dir / "analysis.json", j);
  write_file(dir / "zero_set.obj", [&](std::ostream& os) { write_obj(os, z.mesh); });
  std::printf("%d domains (%d bounded), %zu zero-set components (%zu compact)\n",
              d.domains.count(), d.domains.bounded_count(), d.zero.components.size(), topo.size());
  return 0;
}

// ---- stats -------------------------------------------------------------------

struct StatsArgs {
  EnsembleParams p;
  double radius = 0.0;  // 0: 50 for n = 2, 20 for n = 3
  std::string out = "stats_out";
};

int run_stats(const StatsArgs& a) {
  EnsembleParams p = a.p;
  p.radius = a.radius > 0 ? a.radius : (p.n == 2 ? 50.0 : 20.0);
  const fs::path dir = output_dir(a.out);
  const EnsembleStats s = ensemble_stats(p);
  write_file(dir / "trees.csv", [&](std::ostream& os) { write_histogram_csv(os, s.trees); });
  write_file(dir / "topology.csv", [&](std::ostream& os) { write_histogram_csv(os, s.topology); });
  write_json(dir / "stats.json", to_json(s));
  std::printf("%lld compact components, %zu tree classes, %lld nesting failures\n",
              s.compact_components, s.trees.size(), s.tree_failures);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nodal topology of Helmholtz eigenfunctions"};
  app.set_config("--config", "", "key=value file; keys use the subcommand prefix, e.g. stats.samples=50");
  app.require_subcommand(1);

  RealizeTreeArgs rt;
  auto* c_rt = app.add_subcommand("realize-tree", "Realize a rooted tree as a nesting tree of u_eps");
  c_rt->add_option("--tree", rt.tree, "Tree as nested brackets, e.g. \"[[],[]]\"");
  c_rt->add_option("--tree-file", rt.tree_file, "JSON file with the tree");
  c_rt->add_option("--dim", rt.p.dim, "Dimension")->capture_default_str();
  c_rt->add_option("--spacing", rt.p.h, "Sample spacing, 1/(2m)")->capture_default_str();
  c_rt->add_option("--margin", rt.p.margin, "Padding around the root structure")->capture_default_str();
  c_rt->add_option("--basis", rt.p.fit.basis_size, "Plane-wave direction pairs")->capture_default_str();
  c_rt->add_option("--svd-cutoff", rt.p.fit.svd_cutoff, "Relative singular-value cutoff")->capture_default_str();
  c_rt->add_option("--target", rt.p.fit.target, "C^1 fit target")->capture_default_str();
  c_rt->add_option("--fit", rt.fit, "lsq, sign or auto (lsq, then sign if extraction fails)")
      ->check(CLI::IsMember({"lsq", "sign", "auto"}))
      ->capture_default_str();
  c_rt->add_flag("--refine", rt.p.refine_check, "Repeat the extraction at h/2");
  c_rt->add_flag("--strict-fit", rt.strict_fit, "Exit 3 when the C^1 target is missed");
  c_rt->add_option("-o,--out", rt.out, "Output directory")->capture_default_str();

  RealizeSurfaceArgs rs;
  auto* c_rs = app.add_subcommand("realize-surface", "Realize a domain boundary as a zero-set component");
  c_rs->add_option("--shape", rs.shape, "ball, torus, superellipsoid or cube")
      ->check(CLI::IsMember({"ball", "torus", "superellipsoid", "cube"}))
      ->capture_default_str();
  c_rs->add_option("--domain", rs.domain_file, "JSON file with the domain, e.g. {\"shape\":\"ball\",\"radius\":1} (overrides --shape)");
  c_rs->add_option("--radius", rs.radius, "Ball radius")->capture_default_str();
  c_rs->add_option("--major", rs.major, "Torus major radius")->capture_default_str();
  c_rs->add_option("--minor", rs.minor, "Torus minor radius")->capture_default_str();
  c_rs->add_option("--axes", rs.axes, "Superellipsoid semi-axes")->expected(3);
  c_rs->add_option("--p", rs.exponent, "Superellipsoid exponent")->capture_default_str();
  c_rs->add_option("--spacing", rs.p.h, "Eigenproblem spacing")->capture_default_str();
  c_rs->add_option("--shell", rs.p.shell, "Fitting shell half-width (rescaled)")->capture_default_str();
  c_rs->add_option("--extract-h", rs.p.extract_h, "Zero-set resolution (rescaled)")->capture_default_str();
  c_rs->add_option("--basis", rs.p.fit.basis_size, "Plane-wave direction pairs")->capture_default_str();
  c_rs->add_option("--target", rs.p.fit.target, "C^1 fit target")->capture_default_str();
  c_rs->add_flag("--strict-fit", rs.strict_fit, "Exit 3 when the C^1 target is missed");
  c_rs->add_option("-o,--out", rs.out, "Output directory")->capture_default_str();

  SampleArgs sa;
  auto* c_sa = app.add_subcommand("sample", "Sample a random plane-wave field");
  c_sa->add_option("--dim", sa.p.n, "Dimension")->capture_default_str();
  c_sa->add_option("--waves", sa.p.N, "Number of plane waves")->capture_default_str();
  c_sa->add_option("--alpha", sa.p.alpha, "Frequencies in [alpha, 1]")->capture_default_str();
  c_sa->add_option("--seed", sa.p.seed, "Seed")->capture_default_str();
  c_sa->add_option("-o,--out", sa.out, "Output JSON")->capture_default_str();

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Nodal domains, zero-set topology and nesting trees of a field");
  c_an->add_option("field", an.field, "Field JSON")->required();
  c_an->add_option("--box", an.box, "lo:hi, or per-axis lo:hi,lo:hi,...")->capture_default_str();
  c_an->add_option("--res", an.res, "Grid spacing")->capture_default_str();
  c_an->add_option("--grad-tol", an.grad_tol, "Reject zero sets with min/median |grad| below this")
      ->capture_default_str();
  c_an->add_option("-o,--out", an.out, "Output directory")->capture_default_str();

  StatsArgs st;
  auto* c_st = app.add_subcommand("stats", "Ensemble histograms of zero-set topology and nesting trees");
  c_st->add_option("--dim", st.p.n, "Dimension")->check(CLI::IsMember({2, 3}))->capture_default_str();
  c_st->add_option("--samples", st.p.samples, "Fields")->capture_default_str();
  c_st->add_option("--radius", st.radius, "Half-width of the box (default 50 in 2D, 20 in 3D)");
  c_st->add_option("--waves", st.p.waves, "Plane waves per field")->capture_default_str();
  c_st->add_option("--spacing", st.p.h, "Grid spacing (0: 0.1 in 2D, 0.2 in 3D)")->capture_default_str();
  c_st->add_option("--seed", st.p.seed, "Seed")->capture_default_str();
  c_st->add_option("--jobs", st.p.jobs, "Worker threads")->capture_default_str();
  c_st->add_option("-o,--out", st.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_rt) {
      if (rt.tree.empty() == rt.tree_file.empty())
        throw ParseError("give exactly one of --tree and --tree-file");
      return run_realize_tree(rt);
    }
    if (*c_rs) return run_realize_surface(rs);
    if (*c_sa) return run_sample(sa);
    if (*c_an) return run_analyze(an);
    if (*c_st) return run_stats(st);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 1;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 1;
  } catch (const SingularFit& e) {
    std::fprintf(stderr, "fit failed: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "verification failed: %s\n", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 1;
  }
  return 1;
}

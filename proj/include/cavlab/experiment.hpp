#pragma once

/// \file
/// Experiment configuration, named scenarios and presets, and the pipeline
/// that runs requested analyses and writes grid dumps, CSV reports and
/// summary.json (schema: docs/summary.schema.json).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavlab/analysis.hpp"
#include "cavlab/blowup.hpp"
#include "cavlab/grid.hpp"
#include "cavlab/solver.hpp"
#include "cavlab/weights.hpp"
#include "cavlab/weights_json.hpp"

namespace cavlab {

using json = nlohmann::json;

/// Exit statuses of the experiment runner.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2, kExitNonConvergence = 3 };

struct BoundaryScenario {
  std::string name;
  std::string description;
  double default_level;
};

/// "constant": f = level. "ramp": f = level * max(x_1, 0).
inline const std::vector<BoundaryScenario>& boundary_scenarios() {
  static const std::vector<BoundaryScenario> s{
      {"constant", "f = level on the whole boundary", 0.1},
      {"ramp", "f = level * max(x_1, 0); free boundary crosses the origin", 1.0},
  };
  return s;
}

inline BoundaryData make_boundary(const Grid& g, const std::string& scenario, double level) {
  if (!(level >= 0.0) || !std::isfinite(level)) throw InvalidSpec("boundary level must be finite and nonnegative");
  if (scenario == "constant") return BoundaryData::constant(g, level);
  if (scenario == "ramp") return BoundaryData::from_function(g, [level](const Point& x) { return level * std::max(x[0], 0.0); });
  throw InvalidSpec("unknown boundary scenario '" + scenario + "'");
}

inline const std::vector<std::string>& analysis_names() {
  static const std::vector<std::string> names{"growth", "a2",      "nondeg",  "blowup",
                                              "replace", "harnack", "density", "holder"};
  return names;
}

struct ClosenessOptions {
  std::optional<Point> center;
  double radius = 0.4;
};

struct HarnackOptions {
  std::vector<double> radii{0.05, 0.1, 0.2};
  /// Nodes per R along each axis of the refined box [-5R, 5R]^d.
  int nodes_per_radius = 8;
  double tolerance = 0.05;
};

struct BlowupOptions {
  std::vector<double> lambdas{0.5, 0.25, 0.125, 0.0625};
  double identity_lambda = 0.5;
  double identity_tolerance = 0.02;
};

struct HolderOptions {
  std::optional<Box> subdomain;
  /// Half side of the default box around the growth center.
  double half_side = 0.125;
  double min_exponent = 0.2;
};

struct ExperimentConfig {
  std::string name = "experiment";
  WeightSpec weight = WeightSpec::constant(2, 1.0);
  json weight_json;
  int n = 129;
  double lo = -1.0;
  double hi = 1.0;
  std::string scenario = "constant";
  double level = 0.1;
  SolveConfig solver;
  int multistart = 0;
  std::vector<std::string> analyses;
  int k_min = 1;
  int k_max = 7;
  int decay_k_max = 4;
  double decay_rho = 1.0;
  double density_threshold = 0.1;
  double eccentricity_threshold = 50.0;
  int a2_resolution = 16;
  std::vector<double> homogenization_lambdas{1e-1, 1e-2, 1e-3};
  ClosenessOptions closeness;
  HarnackOptions harnack;
  BlowupOptions blowup;
  HolderOptions holder;
  std::uint64_t seed = 0;
  std::string output_dir;

  int dim() const { return weight.dim(); }
  Grid grid() const { return Grid::cube(dim(), n, lo, hi); }
  bool wants(const std::string& a) const { return std::find(analyses.begin(), analyses.end(), a) != analyses.end(); }
  /// Analyses that need a solve on the configured grid.
  bool needs_solve() const {
    return wants("growth") || wants("nondeg") || wants("density") || wants("holder") || wants("replace") || wants("blowup");
  }
};

struct Preset {
  std::string name;
  std::string description;
  json config;
};

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> p{
      {"ac-classical", "omega = 1, f = 0.1, eps = 1, n = 257; classical Alt-Caffarelli control",
       {{"weight", {{"kind", "constant"}, {"dim", 2}, {"value", 1.0}}},
        {"grid", {{"n", 257}}},
        {"boundary", {{"scenario", "constant"}, {"level", 0.1}}},
        {"solver", {{"epsilon", 1.0}}},
        {"analyses", {"growth", "nondeg", "density"}}}},
      {"singular-line", "omega = |x_1|^(-1/2), f = 0.1, eps = 1, n = 257; sharp growth 1.25 at the singular line",
       {{"weight", {{"kind", "power_subspace"}, {"dim", 2}, {"codim", 1}, {"alpha", -0.5}}},
        {"grid", {{"n", 257}}},
        {"boundary", {{"scenario", "constant"}, {"level", 0.1}}},
        {"solver", {{"epsilon", 1.0}}},
        {"analyses", {"growth", "nondeg", "holder"}}}},
      {"anisotropic", "omega = |x_1|^(-1/4) |x_2|^(-1/4); A2 estimate and density",
       {{"weight", {{"kind", "anisotropic_product"}, {"dim", 2}, {"per_axis_exponents", {-0.25, -0.25}}}},
        {"grid", {{"n", 129}}},
        {"boundary", {{"scenario", "constant"}, {"level", 0.1}}},
        {"solver", {{"epsilon", 1.0}}},
        {"analyses", {"a2", "density"}}}},
      {"two-cone", "omega = |x_1|^(-1/2) |x_2 x_3|^(-1/4) in d = 3; A2 estimate",
       {{"weight", {{"kind", "two_cone"}, {"dim", 3}, {"codim", 1}, {"cone_exponents", {-0.5, -0.25}}}},
        {"grid", {{"n", 33}}},
        {"boundary", {{"scenario", "constant"}, {"level", 0.1}}},
        {"solver", {{"epsilon", 1.0}}},
        {"analyses", {"a2"}}}},
      {"perturbed-blowup", "omega = |x|^(-1/2) + |x|^(-1/4), ramp data; homogenization and blow-up",
       {{"weight",
         {{"kind", "perturbed"},
          {"dim", 2},
          {"base", {{"kind", "power_subspace"}, {"dim", 2}, {"codim", 2}, {"alpha", -0.5}}},
          {"perturbation", {{"g_coefficient", 1.0}, {"g_exponent", -0.25}}}}},
        {"grid", {{"n", 129}}},
        {"boundary", {{"scenario", "ramp"}, {"level", 1.0}}},
        {"solver", {{"epsilon", 1.0}, {"tol", 1e-12}}},
        {"analyses", {"a2", "blowup"}}}},
  };
  return p;
}

inline const Preset* find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return &p;
  return nullptr;
}

inline std::string list_scenarios_text() {
  std::ostringstream os;
  os << "boundary scenarios:\n";
  for (const auto& s : boundary_scenarios())
    os << "  " << std::left << std::setw(18) << s.name << s.description << " (default level " << s.default_level << ")\n";
  os << "presets:\n";
  for (const auto& p : presets()) os << "  " << std::left << std::setw(18) << p.name << p.description << "\n";
  os << "analyses:\n  ";
  for (const auto& a : analysis_names()) os << a << ' ';
  os << "\n";
  return os.str();
}

namespace detail {

inline Point point_from_json(const json& j, int d) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != d) throw InvalidSpec("point has the wrong number of coordinates");
  Point p{};
  for (int a = 0; a < d; ++a) p[a] = v[a];
  return p;
}

inline json point_to_json(const Point& p, int d) { return std::vector<double>(p.begin(), p.begin() + d); }

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidSpec(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw InvalidSpec("unknown key '" + k + "' in " + where);
}

inline std::vector<double> positive_list(const json& j, const std::string& what) {
  auto v = j.get<std::vector<double>>();
  if (v.empty()) throw InvalidSpec(what + " must not be empty");
  for (double x : v)
    if (!(x > 0.0)) throw InvalidSpec(what + " must be positive");
  return v;
}

}  // namespace detail

/// Builds a configuration. A "preset" key seeds every field, explicit keys override it.
inline ExperimentConfig parse_config(const json& raw) {
  try {
    if (!raw.is_object()) throw InvalidSpec("config must be a JSON object");
    json j = raw;
    if (raw.contains("preset")) {
      const Preset* p = find_preset(raw.at("preset").get<std::string>());
      if (!p) throw InvalidSpec("unknown preset '" + raw.at("preset").get<std::string>() + "'");
      j = p->config;
      j.merge_patch(raw);
      j.erase("preset");
    }
    detail::check_keys(j, {"name", "weight", "grid", "boundary", "solver", "analyses", "options", "seed", "output_dir"},
                       "config");
    ExperimentConfig c;
    c.name = j.value("name", raw.value("preset", std::string("experiment")));
    if (!j.contains("weight")) throw InvalidSpec("config needs a weight");
    c.weight_json = j.at("weight");
    c.weight = weight_from_json(c.weight_json);

    if (j.contains("grid")) {
      const json& g = j.at("grid");
      detail::check_keys(g, {"dim", "n", "lo", "hi"}, "grid");
      if (g.contains("dim") && g.at("dim").get<int>() != c.weight.dim())
        throw InvalidSpec("grid dimension differs from the weight dimension");
      c.n = g.value("n", c.n);
      c.lo = g.value("lo", c.lo);
      c.hi = g.value("hi", c.hi);
    }
    if (c.n < 3) throw InvalidSpec("grid needs at least 3 nodes per axis");
    if (!(c.hi > c.lo)) throw InvalidSpec("grid box is degenerate");

    if (j.contains("boundary")) {
      const json& b = j.at("boundary");
      detail::check_keys(b, {"scenario", "level"}, "boundary");
      c.scenario = b.value("scenario", c.scenario);
      const auto it = std::find_if(boundary_scenarios().begin(), boundary_scenarios().end(),
                                   [&](const BoundaryScenario& s) { return s.name == c.scenario; });
      if (it == boundary_scenarios().end()) throw InvalidSpec("unknown boundary scenario '" + c.scenario + "'");
      c.level = b.value("level", it->default_level);
      if (!(c.level >= 0.0)) throw InvalidSpec("boundary level must be nonnegative");
    }

    if (j.contains("solver")) {
      const json& s = j.at("solver");
      detail::check_keys(s, {"epsilon", "tol", "residual_tol", "max_sweeps", "ordering", "init", "threads", "multistart"},
                         "solver");
      c.solver.epsilon = s.value("epsilon", c.solver.epsilon);
      c.solver.tol = s.value("tol", c.solver.tol);
      c.solver.residual_tol = s.value("residual_tol", c.solver.residual_tol);
      c.solver.max_sweeps = s.value("max_sweeps", c.solver.max_sweeps);
      c.solver.threads = s.value("threads", c.solver.threads);
      c.multistart = s.value("multistart", 0);
      const std::string ord = s.value("ordering", std::string("lexicographic"));
      if (ord == "lexicographic") c.solver.ordering = Ordering::Lexicographic;
      else if (ord == "red_black") c.solver.ordering = Ordering::RedBlack;
      else throw InvalidSpec("ordering must be lexicographic or red_black");
      const std::string init = s.value("init", std::string("zero_interior"));
      if (init == "zero_interior") c.solver.init = Initialization::ZeroInterior;
      else if (init == "boundary_blend") c.solver.init = Initialization::BoundaryBlend;
      else throw InvalidSpec("init must be zero_interior or boundary_blend");
      if (c.multistart < 0) throw InvalidSpec("multistart must be nonnegative");
    }
    c.solver.validate();

    if (!j.contains("analyses")) throw InvalidSpec("config needs an analyses list");
    c.analyses = j.at("analyses").get<std::vector<std::string>>();
    for (const auto& a : c.analyses)
      if (std::find(analysis_names().begin(), analysis_names().end(), a) == analysis_names().end())
        throw InvalidSpec("unknown analysis '" + a + "'");

    if (j.contains("options")) {
      const json& o = j.at("options");
      detail::check_keys(o,
                         {"radii_k", "decay_k_max", "decay_rho", "density_threshold", "eccentricity_threshold",
                          "a2_resolution", "homogenization_lambdas", "closeness", "harnack", "blowup", "holder"},
                         "options");
      if (o.contains("radii_k")) {
        const auto k = o.at("radii_k").get<std::vector<int>>();
        if (k.size() != 2 || k[0] > k[1]) throw InvalidSpec("radii_k must be [k_min, k_max] with k_min <= k_max");
        c.k_min = k[0];
        c.k_max = k[1];
      }
      c.decay_k_max = o.value("decay_k_max", c.decay_k_max);
      c.decay_rho = o.value("decay_rho", c.decay_rho);
      c.density_threshold = o.value("density_threshold", c.density_threshold);
      c.eccentricity_threshold = o.value("eccentricity_threshold", c.eccentricity_threshold);
      c.a2_resolution = o.value("a2_resolution", c.a2_resolution);
      if (c.a2_resolution < 8) throw InvalidSpec("a2_resolution must be at least 8");
      if (o.contains("homogenization_lambdas"))
        c.homogenization_lambdas = detail::positive_list(o.at("homogenization_lambdas"), "homogenization_lambdas");
      if (o.contains("closeness")) {
        const json& cl = o.at("closeness");
        detail::check_keys(cl, {"center", "radius"}, "options.closeness");
        if (cl.contains("center")) c.closeness.center = detail::point_from_json(cl.at("center"), c.dim());
        c.closeness.radius = cl.value("radius", c.closeness.radius);
      }
      if (o.contains("harnack")) {
        const json& h = o.at("harnack");
        detail::check_keys(h, {"radii", "nodes_per_radius", "tolerance"}, "options.harnack");
        if (h.contains("radii")) c.harnack.radii = detail::positive_list(h.at("radii"), "harnack radii");
        c.harnack.nodes_per_radius = h.value("nodes_per_radius", c.harnack.nodes_per_radius);
        c.harnack.tolerance = h.value("tolerance", c.harnack.tolerance);
        if (c.harnack.nodes_per_radius < 2) throw InvalidSpec("harnack nodes_per_radius must be at least 2");
      }
      if (o.contains("blowup")) {
        const json& b = o.at("blowup");
        detail::check_keys(b, {"lambdas", "identity_lambda", "identity_tolerance"}, "options.blowup");
        if (b.contains("lambdas")) c.blowup.lambdas = detail::positive_list(b.at("lambdas"), "blow-up lambdas");
        c.blowup.identity_lambda = b.value("identity_lambda", c.blowup.identity_lambda);
        c.blowup.identity_tolerance = b.value("identity_tolerance", c.blowup.identity_tolerance);
      }
      if (o.contains("holder")) {
        const json& h = o.at("holder");
        detail::check_keys(h, {"subdomain", "half_side", "min_exponent"}, "options.holder");
        if (h.contains("subdomain")) {
          Box b;
          b.dim = c.dim();
          b.lo = detail::point_from_json(h.at("subdomain").at("lo"), c.dim());
          b.hi = detail::point_from_json(h.at("subdomain").at("hi"), c.dim());
          c.holder.subdomain = b;
        }
        c.holder.half_side = h.value("half_side", c.holder.half_side);
        c.holder.min_exponent = h.value("min_exponent", c.holder.min_exponent);
      }
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.output_dir = j.value("output_dir", std::string());
    return c;
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("malformed config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

inline json to_json(const CheckResult& c) {
  return {{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}, {"detail", c.detail}};
}

inline constexpr double kDescentSlack = 1e-12;
inline constexpr double kMeasureTolerance = 1e-8;

struct StructureReport {
  bool energy_nonincreasing = true;
  double max_energy_increase = 0.0;
  bool maximum_principle = true;
  double min_divergence = 0.0;
  double max_abs_divergence_positive = 0.0;
  bool measure_sign = true;
  bool measure_support = true;
  bool pass() const { return energy_nonincreasing && maximum_principle && measure_sign && measure_support; }
};

/// Energy descent, 0 <= u <= sup f, div(w grad u) >= -1e-8 everywhere and
/// |div(w grad u)| <= 1e-8 at nodes whose axis neighborhood is strictly positive.
inline StructureReport check_structure(const SolveResult& r, const FaceWeightField& w, const BoundaryData& f) {
  StructureReport s;
  for (std::size_t k = 1; k < r.energy_history.size(); ++k) {
    const double inc = r.energy_history[k].total - r.energy_history[k - 1].total;
    s.max_energy_increase = std::max(s.max_energy_increase, inc);
    if (inc > kDescentSlack) s.energy_nonincreasing = false;
  }
  const ScalarField& u = r.field;
  const Grid& g = u.grid();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(u[i] >= 0.0 && u[i] <= f.sup_norm())) s.maximum_principle = false;
  const ScalarField div = discrete_flux_divergence(u, w);
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.min_divergence = std::min(s.min_divergence, div[i]);
    if (g.on_boundary(i) || !(u[i] > 0.0)) continue;
    bool full = true;
    for (int a = 0; a < g.dim() && full; ++a) full = u[i - g.stride(a)] > 0.0 && u[i + g.stride(a)] > 0.0;
    if (full) s.max_abs_divergence_positive = std::max(s.max_abs_divergence_positive, std::abs(div[i]));
  }
  s.measure_sign = s.min_divergence >= -kMeasureTolerance;
  s.measure_support = s.max_abs_divergence_positive <= kMeasureTolerance;
  return s;
}

inline json to_json(const StructureReport& s) {
  return {{"energy_nonincreasing", s.energy_nonincreasing}, {"max_energy_increase", s.max_energy_increase},
          {"maximum_principle", s.maximum_principle},       {"min_divergence", s.min_divergence},
          {"max_abs_divergence_positive", s.max_abs_divergence_positive},
          {"measure_sign", s.measure_sign},                 {"measure_support", s.measure_support}};
}

inline json to_json(const EnergyBreakdown& e) {
  return {{"dirichlet", e.dirichlet}, {"volume", e.volume}, {"total", e.total}, {"epsilon", e.epsilon}};
}

namespace detail {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& p, const std::string& header) : out_(p) {
    if (!out_) throw std::runtime_error("cannot write " + p.string());
    out_.precision(17);
    out_ << header << '\n';
  }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((out_ << (first ? "" : ",") << v, first = false), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_dump_file(const std::filesystem::path& p, const ScalarField& u) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  write_dump(out, u);
}

}  // namespace detail

struct ExperimentOutcome {
  json summary;
  int exit_code = kExitOk;
};

namespace detail {

inline std::vector<double> growth_radii(const ExperimentConfig& c) { return dyadic_radii(c.k_min, c.k_max); }

/// Closeness ball center: the configured point, else the free boundary node
/// nearest the origin pulled radially into the closed ball of radius 1/2.
inline Point closeness_center(const ExperimentConfig& c, const ScalarField& u) {
  if (c.closeness.center) return *c.closeness.center;
  const Grid& g = u.grid();
  if (free_boundary_nodes(u).empty()) return Point{};
  Point y = g.position(nearest_free_boundary_node(u, Point{}));
  const double r = norm(y, g.dim());
  if (r > 0.5) y = g.position(g.nearest_node(scaled(y, 0.5 / r)));
  if (norm(y, g.dim()) > 0.5) y = scaled(y, 0.5 / norm(y, g.dim()));
  return y;
}

}  // namespace detail

/// Runs every requested analysis. Output files go to `out_dir` when it is nonempty.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const bool write = !out_dir.empty();
  const fs::path dir(out_dir);
  if (write) fs::create_directories(dir);

  ExperimentOutcome out;
  json& s = out.summary;
  s["schema_version"] = 1;
  s["name"] = c.name;
  s["seed"] = c.seed;
  s["weight"] = to_json(c.weight);
  s["analyses"] = c.analyses;
  std::vector<CheckResult> checks;
  json results = json::object();
  auto add = [&](CheckResult r) { checks.push_back(std::move(r)); };
  auto finish = [&](int code) {
    json jc = json::array();
    for (const auto& k : checks) jc.push_back(to_json(k));
    s["checks"] = jc;
    s["results"] = results;
    bool all = std::all_of(checks.begin(), checks.end(), [](const CheckResult& k) { return k.pass; });
    if (code == kExitOk && !all) code = kExitCheckFailed;
    s["status"] = code == kExitOk ? "pass" : code == kExitCheckFailed ? "fail" : "nonconvergence";
    s["exit_code"] = code;
    out.exit_code = code;
    if (write) {
      std::ofstream js(dir / "summary.json");
      js << s.dump(2) << '\n';
    }
    return out;
  };

  const Grid g = c.grid();
  s["grid"] = {{"dim", g.dim()}, {"n", c.n}, {"lo", c.lo}, {"hi", c.hi}, {"h", g.h()}};
  s["boundary"] = {{"scenario", c.scenario}, {"level", c.level}};
  s["solve"] = nullptr;
  const int d = g.dim();
  const double alpha = c.weight.alpha();

  if (c.wants("a2")) {
    const A2Report a2 = a2_constant(c.weight, g.box(), c.a2_resolution);
    const double min_product =
        a2.per_ball_products.empty() ? 1.0 : *std::min_element(a2.per_ball_products.begin(), a2.per_ball_products.end());
    const SingularityBounds sb = singularity_bounds(c.weight, dyadic_radii(1, 6));
    json ja = {{"c1_estimate", a2.c1_estimate},
               {"balls", a2.ball_family.size()},
               {"skipped", a2.skipped},
               {"min_product", min_product},
               {"quadrature_resolution", a2.quadrature_resolution},
               {"tau_star", sb.tau_star},
               {"L_bound", sb.L_bound}};
    add({"a2_products_at_least_one", min_product >= 1.0, min_product, 1.0, "Cauchy-Schwarz lower bound"});
    if (!c.weight.homogeneous()) {
      const HomogenizationLimit hl = homogenized_limit(c.weight, c.homogenization_lambdas);
      ja["homogenization"] = {{"lambdas", hl.lambda_sequence}, {"l1_residuals", hl.l1_residuals}, {"converging", hl.converging},
                              {"limit", to_json(hl.limit_spec)}};
      add({"homogenization_residuals_decrease", hl.converging, hl.l1_residuals.back(), hl.l1_residuals.front(),
           "L1(B_1) residual of the rescaled weight against its homogeneous part"});
    }
    results["a2"] = ja;
    if (write) {
      detail::CsvWriter csv(dir / "a2.csv", "center,radius,product");
      for (std::size_t b = 0; b < a2.per_ball_products.size(); ++b) {
        std::ostringstream ctr;
        ctr.precision(17);
        for (int a = 0; a < d; ++a) ctr << (a ? " " : "") << a2.ball_family[b].center[a];
        csv.row(ctr.str(), a2.ball_family[b].radius, a2.per_ball_products[b]);
      }
    }
  }

  if (c.wants("harnack")) {
    if (!c.weight.homogeneous()) throw InvalidSpec("harnack analysis needs a homogeneous weight");
    json jr = json::array();
    double lo_ratio = kInfinite, hi_ratio = 0.0;
    for (double R : c.harnack.radii) {
      const int n = 10 * c.harnack.nodes_per_radius + 1;
      const Grid hg = Grid::cube(d, n, -5.0 * R, 5.0 * R);
      const FaceWeightField hw = sample_face_weights(c.weight, hg);
      const double ratio = harnack_ratio(hw, Point{}, R, [R](const Point& x) { return std::max(0.0, 1.0 + x[0] / (4.0 * R)); });
      jr.push_back({{"R", R}, {"n", n}, {"ratio", ratio}});
      lo_ratio = std::min(lo_ratio, ratio);
      hi_ratio = std::max(hi_ratio, ratio);
    }
    const double spread = (hi_ratio - lo_ratio) / lo_ratio;
    results["harnack"] = {{"radii", jr}, {"relative_spread", spread}};
    add({"harnack_scale_invariance", spread <= c.harnack.tolerance, spread, c.harnack.tolerance,
         "relative spread of sup/inf over B_R across R"});
  }

  if (!c.needs_solve()) return finish(kExitOk);

  const BoundaryData f = make_boundary(g, c.scenario, c.level);
  const FaceWeightField w = sample_face_weights(c.weight, g);
  const SolveResult r = minimize_cavitation(w, f, JumpProfile::cavitation(), c.solver);
  std::size_t zeros = 0;
  for (double v : r.field.values()) zeros += v == 0.0;
  s["solve"] = {{"converged", r.converged},
                {"sweeps", r.sweeps},
                {"last_update", r.last_update},
                {"last_residual", r.last_residual},
                {"phase_flips_last_sweep", r.phase_flips_last_sweep},
                {"zero_nodes", zeros},
                {"energy", to_json(r.energy_history.back())}};
  if (write) {
    detail::write_dump_file(dir / "u.dump", r.field);
    std::ofstream e(dir / "energy.csv");
    write_energy_csv(e, r);
  }
  if (!r.converged) return finish(kExitNonConvergence);

  const StructureReport st = check_structure(r, w, f);
  s["solve"]["structure"] = to_json(st);
  add({"solve_structure", st.pass(), st.min_divergence, -kMeasureTolerance,
       "energy descent, maximum principle, sign and support of div(w grad u)"});

  if (c.multistart > 0) {
    const MultiStartReport ms = multistart(w, f, JumpProfile::cavitation(), c.solver, c.multistart, c.seed);
    s["solve"]["multistart"] = {{"starts", c.multistart}, {"reference_energy", ms.reference_energy}, {"max_gap", ms.max_gap}};
    add({"multistart_energy_gap", ms.max_gap <= 1e-6, ms.max_gap, 1e-6, "energy gap across randomized starts"});
  }

  const FreeBoundarySet fb = extract_free_boundary(r.field);
  const bool has_fb = !free_boundary_nodes(r.field).empty();
  s["free_boundary"] = {{"cells", fb.size()}};
  std::optional<std::size_t> z0;
  if (has_fb) {
    z0 = canonical_free_boundary_node(r.field, c.weight);
    s["free_boundary"]["z0"] = detail::point_to_json(g.position(*z0), d);
  }
  auto need_fb = [&](const std::string& what) {
    if (z0) return true;
    add({what, false, 0.0, 0.0, "the solve has no free boundary node"});
    return false;
  };

  std::optional<GrowthReport> growth;
  if ((c.wants("growth") || c.wants("nondeg")) && need_fb(c.wants("growth") ? "growth_exponent" : "nondegeneracy")) {
    growth = growth_function(r.field, *z0, detail::growth_radii(c));
    if (write) {
      detail::CsvWriter gc(dir / "growth.csv", "radius,S,usable,nondeg_ratio");
      const double p = growth_exponent(alpha);
      for (std::size_t j = 0; j < growth->radii.size(); ++j)
        gc.row(growth->radii[j], growth->S_values[j], static_cast<int>(growth->usable[j]),
               growth->S_values[j] / std::pow(growth->radii[j], p));
    }
    if (growth->usable_count() < 4) {
      add({"growth_window", false, static_cast<double>(growth->usable_count()), 4.0, "fewer than 4 usable radii"});
      growth.reset();
    } else {
      fit_growth_exponent(*growth);
    }
  }

  if (c.wants("growth") && growth) {
    const double p = growth_exponent(alpha);
    const RegularityCheck reg = check_optimal_regularity(*growth, alpha);
    add({"growth_exponent", std::abs(growth->fitted_exponent - p) <= kExponentSlack, growth->fitted_exponent, p,
         "fitted exponent within 0.15 of 1 + |alpha|/2"});
    add({"optimal_regularity", reg.pass, reg.min_small_scale_slope, p - kExponentSlack,
         "inferred C finite and small-scale local slopes >= exponent - 0.15"});
    const ScalarField ut = normalized_rescaling(r.field, *z0, c.decay_rho);
    const DyadicDecayReport dec = dyadic_decay_check(ut, alpha, c.decay_k_max);
    json lv = json::array();
    for (const auto& l : dec.levels)
      lv.push_back({{"k", l.k}, {"radius", l.radius}, {"sup", l.sup}, {"bound", l.bound}, {"pass", l.pass}});
    add({"dyadic_decay", dec.pass, static_cast<double>(dec.levels.size()), kDyadicSlack,
         dec.truncated ? dec.note : "all requested levels checked"});
    results["growth"] = {{"center", detail::point_to_json(growth->center, d)},
                         {"expected_exponent", p},
                         {"fitted_exponent", growth->fitted_exponent},
                         {"fitted_constant", growth->fitted_constant},
                         {"local_slopes", growth->local_slopes},
                         {"inferred_C", reg.inferred_C},
                         {"regularity_pass", reg.pass},
                         {"decay", lv},
                         {"decay_truncated", dec.truncated}};
    if (write) {
      detail::CsvWriter dc(dir / "decay.csv", "k,radius,sup,bound,pass");
      for (const auto& l : dec.levels) dc.row(l.k, l.radius, l.sup, l.bound, l.pass ? 1 : 0);
    }
  }

  if (c.wants("nondeg") && growth) {
    const SingularityBounds sb = singularity_bounds(c.weight, usable_radii(g, growth->radii), 256, growth->center);
    const NondegeneracyCheck nd = check_nondegeneracy(*growth, alpha, sb.L_bound, d);
    results["nondeg"] = {{"min_ratio", nd.min_ratio},
                         {"paper_constant", nd.paper_constant},
                         {"threshold", nd.threshold},
                         {"L_bound", sb.L_bound},
                         {"tau_star", sb.tau_star}};
    add({"nondegeneracy", nd.pass, nd.min_ratio, nd.threshold, "min S(r)/r^(1+|alpha|/2) >= 0.5 * explicit constant"});
  }

  if (c.wants("density") && need_fb("positive_density")) {
    const auto radii = usable_radii(g, detail::growth_radii(c));
    if (radii.empty()) {
      add({"positive_density", false, 0.0, c.density_threshold, "no usable radii"});
    } else {
      const DensityReport dr = positive_density(r.field, *z0, radii);
      add({"positive_density", dr.min_fraction >= c.density_threshold, dr.min_fraction, c.density_threshold,
           "min fraction of {u > 0} in B_r(z0) over usable radii"});
      const auto samples = comparability_samples(r.field, fb);
      json jd = {{"radii", dr.radii}, {"fractions", dr.fractions}, {"min_fraction", dr.min_fraction}};
      if (samples.empty()) {
        add({"comparability", false, 0.0, c.eccentricity_threshold, "no positive nodes at distance >= 2h"});
      } else {
        const ComparabilityReport cr = distance_comparability(r.field, alpha, fb, samples);
        jd["comparability"] = {{"c_lower", cr.c_lower}, {"c_upper", cr.c_upper}, {"samples", cr.samples}};
        add({"comparability", cr.eccentricity() <= c.eccentricity_threshold, cr.eccentricity(), c.eccentricity_threshold,
             "c_upper / c_lower"});
      }
      results["density"] = jd;
      if (write) {
        detail::CsvWriter dc(dir / "density.csv", "radius,fraction");
        for (std::size_t j = 0; j < dr.radii.size(); ++j) dc.row(dr.radii[j], dr.fractions[j]);
      }
    }
  }

  if (c.wants("holder")) {
    Box sub;
    if (c.holder.subdomain) {
      sub = *c.holder.subdomain;
    } else {
      const Point ctr = z0 ? g.position(*z0) : Point{};
      sub.dim = d;
      for (int a = 0; a < d; ++a) {
        sub.lo[a] = std::max(ctr[a] - c.holder.half_side, c.lo + g.h());
        sub.hi[a] = std::min(ctr[a] + c.holder.half_side, c.hi - g.h());
      }
    }
    std::optional<HolderReport> hr;
    try {
      hr = holder_modulus(r.field, sub);
    } catch (const PreconditionError& e) {
      add({"holder_exponent", false, 0.0, c.holder.min_exponent, e.what()});
    }
    if (hr) {
      results["holder"] = {{"radii", hr->radii},       {"oscillations", hr->oscillations}, {"tau_hat", hr->tau_hat},
                           {"seminorm", hr->seminorm}, {"constant", hr->constant},         {"pairs", hr->pairs},
                           {"subdomain_lo", detail::point_to_json(sub.lo, d)},
                           {"subdomain_hi", detail::point_to_json(sub.hi, d)}};
      add({"holder_exponent", !hr->constant && hr->tau_hat >= c.holder.min_exponent, hr->tau_hat, c.holder.min_exponent,
           hr->constant ? "field is constant on the subdomain" : "empirical Hoelder exponent"});
      if (write) {
        detail::CsvWriter hc(dir / "holder.csv", "rho,oscillation");
        for (std::size_t j = 0; j < hr->radii.size(); ++j) hc.row(hr->radii[j], hr->oscillations[j]);
      }
    }
  }

  if (c.wants("replace")) {
    const Point y = detail::closeness_center(c, r.field);
    const ScalarField h = harmonic_replacement(r.field, w, y, c.closeness.radius);
    const ClosenessGap gap = closeness_gap(r.field, h, w, y, c.closeness.radius, c.solver.epsilon);
    const double eu = energy(r.field, w, c.solver.epsilon).total;
    const double eh = energy(h, w, c.solver.epsilon).total;
    results["replace"] = {{"center", detail::point_to_json(y, d)}, {"radius", c.closeness.radius}, {"lhs", gap.lhs},
                          {"rhs", gap.rhs},                         {"energy_u", eu},                {"energy_h", eh}};
    add({"closeness", gap.pass, gap.lhs, kClosenessSlack * gap.rhs, "weighted Dirichlet gap <= 1.1 eps R^d"});
    if (write) detail::write_dump_file(dir / "replacement.dump", h);
  }

  if (c.wants("blowup")) {
    const ScalingIdentity si = scaling_energy_identity(r.field, c.weight, c.blowup.identity_lambda, c.solver.epsilon);
    add({"scaling_identity", si.rel_error <= c.blowup.identity_tolerance, si.rel_error, c.blowup.identity_tolerance,
         "relative gap between J(w, u, lambda box) and lambda^d J(w_lambda, u_lambda, box)"});
    json jb = {{"identity", {{"lambda", c.blowup.identity_lambda}, {"lhs", si.lhs}, {"rhs", si.rhs}, {"rel_error", si.rel_error}}}};
    try {
      const BlowupSequence seq = blowup_convergence(c.weight, f, c.blowup.lambdas, c.solver);
      jb["beta"] = seq.beta;
      jb["lambdas"] = seq.lambdas;
      jb["successive_sup_distances"] = seq.successive_sup_distances;
      json pairs = json::array();
      for (const auto& [a, b] : seq.energy_pairs) pairs.push_back({a, b});
      jb["energy_pairs"] = pairs;
      jb["truncated"] = seq.truncated;
      jb["diagnostic"] = seq.diagnostic;
      add({"blowup_distances_decrease", !seq.truncated && seq.distances_decreasing(),
           seq.successive_sup_distances.empty() ? 0.0 : seq.successive_sup_distances.back(),
           seq.successive_sup_distances.empty() ? 0.0 : seq.successive_sup_distances.front(),
           seq.truncated ? seq.diagnostic : "successive sup distances over B_1/2"});
      if (write) {
        detail::CsvWriter bc(dir / "blowup.csv", "lambda,sup_distance,energy_lhs,energy_rhs");
        for (std::size_t k = 0; k < seq.lambdas.size(); ++k) {
          const double dist = k == 0 ? 0.0 : seq.successive_sup_distances[k - 1];
          bc.row(seq.lambdas[k], dist, seq.energy_pairs[k].first, seq.energy_pairs[k].second);
          detail::write_dump_file(dir / ("blowup_" + std::to_string(k) + ".dump"), seq.rescaled_fields[k]);
        }
      }
    } catch (const PreconditionError& e) {
      jb["diagnostic"] = e.what();
      add({"blowup_distances_decrease", false, 0.0, 0.0, e.what()});
    } catch (const ConvergenceError& e) {
      jb["diagnostic"] = e.what();
      results["blowup"] = jb;
      return finish(kExitNonConvergence);
    }
    results["blowup"] = jb;
  }

  return finish(kExitOk);
}

}  // namespace cavlab

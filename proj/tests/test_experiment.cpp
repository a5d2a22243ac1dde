#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cavlab/experiment.hpp"

using namespace cavlab;
namespace fs = std::filesystem;

namespace {

json small_config() {
  return json::parse(R"({
    "name": "small",
    "weight": {"kind": "power_subspace", "dim": 2, "codim": 1, "alpha": -0.5},
    "grid": {"n": 33},
    "boundary": {"scenario": "constant", "level": 0.1},
    "solver": {"epsilon": 1.0},
    "analyses": ["a2", "density", "replace", "holder"],
    "options": {"radii_k": [1, 3], "a2_resolution": 8, "closeness": {"radius": 0.25}, "holder": {"subdomain": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5]}}}
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cavlab_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(ParseConfig, ReadsEveryField) {
  const auto c = parse_config(small_config());
  EXPECT_EQ(c.name, "small");
  EXPECT_EQ(c.n, 33);
  EXPECT_EQ(c.weight.kind(), WeightKind::PowerSubspace);
  EXPECT_EQ(c.k_min, 1);
  EXPECT_EQ(c.k_max, 3);
  EXPECT_EQ(c.a2_resolution, 8);
  EXPECT_DOUBLE_EQ(c.closeness.radius, 0.25);
  EXPECT_EQ(c.solver.init, Initialization::ZeroInterior);
  EXPECT_EQ(c.solver.ordering, Ordering::Lexicographic);
}

TEST(ParseConfig, RejectsInvalidInput) {
  auto bad = [](auto mutate) {
    json j = small_config();
    mutate(j);
    EXPECT_THROW(parse_config(j), InvalidSpec) << j.dump();
  };
  bad([](json& j) { j["bogus"] = 1; });
  bad([](json& j) { j["grid"]["m"] = 3; });
  bad([](json& j) { j["grid"]["n"] = 2; });
  bad([](json& j) { j["grid"]["dim"] = 3; });
  bad([](json& j) { j["analyses"] = {"growth", "nope"}; });
  bad([](json& j) { j.erase("analyses"); });
  bad([](json& j) { j.erase("weight"); });
  bad([](json& j) { j["boundary"]["scenario"] = "wave"; });
  bad([](json& j) { j["boundary"]["level"] = -1.0; });
  bad([](json& j) { j["solver"]["ordering"] = "random"; });
  bad([](json& j) { j["solver"]["tol"] = 0.0; });
  bad([](json& j) { j["solver"]["epsilon"] = "one"; });
  bad([](json& j) { j["options"]["radii_k"] = {3, 1}; });
  bad([](json& j) { j["weight"]["alpha"] = -1.5; });
  bad([](json& j) { j["preset"] = "missing"; });
  EXPECT_THROW(parse_config(json::array()), InvalidSpec);
}

TEST(ParseConfig, LoadConfigRejectsMalformedFiles) {
  const fs::path dir = scratch("malformed");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"weight\": ";
  EXPECT_THROW(load_config((dir / "bad.json").string()), InvalidSpec);
  EXPECT_THROW(load_config((dir / "absent.json").string()), InvalidSpec);
}

TEST(Presets, AllParseAndOverride) {
  ASSERT_EQ(presets().size(), 5u);
  for (const auto& p : presets()) {
    const auto c = parse_config({{"preset", p.name}});
    EXPECT_EQ(c.name, p.name);
    EXPECT_FALSE(c.analyses.empty());
  }
  const auto c = parse_config({{"preset", "singular-line"}, {"grid", {{"n", 65}}}});
  EXPECT_EQ(c.n, 65);
  EXPECT_DOUBLE_EQ(c.weight.alpha(), -0.5);
  const std::string text = list_scenarios_text();
  for (const auto& p : presets()) EXPECT_NE(text.find(p.name), std::string::npos);
  for (const auto& s : boundary_scenarios()) EXPECT_NE(text.find(s.name), std::string::npos);
}

TEST(Boundary, RampAndConstant) {
  const Grid g = Grid::cube(2, 5);
  const auto r = make_boundary(g, "ramp", 2.0);
  EXPECT_EQ(r[g.index({4, 0, 0})], 2.0);
  EXPECT_EQ(r[g.index({0, 4, 0})], 0.0);
  EXPECT_EQ(make_boundary(g, "constant", 0.3)[0], 0.3);
  EXPECT_THROW(make_boundary(g, "nope", 1.0), InvalidSpec);
}

TEST(RunExperiment, WritesReportsAndRerunsBitIdentically) {
  const auto c = parse_config(small_config());
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  const auto oa = run_experiment(c, a.string());
  const auto ob = run_experiment(c, b.string());
  for (const char* f : {"summary.json", "u.dump", "energy.csv", "a2.csv", "density.csv", "holder.csv", "replacement.dump"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(oa.exit_code, ob.exit_code);
  const json s = json::parse(slurp(a / "summary.json"));
  EXPECT_EQ(s.at("schema_version"), 1);
  EXPECT_EQ(s.at("exit_code"), oa.exit_code);
  EXPECT_TRUE(s.at("solve").at("converged").get<bool>());
  for (const auto& k : s.at("checks")) {
    EXPECT_TRUE(k.contains("name"));
    EXPECT_TRUE(k.contains("pass"));
  }
  // The dump written to disk reads back to the solved field.
  std::ifstream in(a / "u.dump");
  const auto u = read_dump(in);
  EXPECT_EQ(u.grid().n(0), 33);
}

TEST(RunExperiment, NonConvergenceExitsThree) {
  json j = small_config();
  j["solver"]["max_sweeps"] = 2;
  const auto o = run_experiment(parse_config(j), "");
  EXPECT_EQ(o.exit_code, kExitNonConvergence);
  EXPECT_EQ(o.summary.at("status"), "nonconvergence");
}

TEST(RunExperiment, A2OnlySkipsTheSolve) {
  json j = small_config();
  j["weight"] = {{"kind", "constant"}, {"dim", 2}, {"value", 1.0}};
  j["analyses"] = {"a2"};
  const auto o = run_experiment(parse_config(j), "");
  EXPECT_EQ(o.exit_code, kExitOk);
  EXPECT_TRUE(o.summary.at("solve").is_null());
  EXPECT_DOUBLE_EQ(o.summary.at("results").at("a2").at("c1_estimate").get<double>(), 1.0);
}

TEST(RunExperiment, SeedChangesOnlyRandomizedRestarts) {
  json j = small_config();
  j["analyses"] = {"density"};
  j["solver"]["multistart"] = 2;
  j["seed"] = 1;
  const auto o1 = run_experiment(parse_config(j), "");
  j["seed"] = 2;
  const auto o2 = run_experiment(parse_config(j), "");
  EXPECT_EQ(o1.summary.at("solve").at("energy"), o2.summary.at("solve").at("energy"));
  EXPECT_LE(o1.summary.at("solve").at("multistart").at("max_gap").get<double>(), 1e-6);
}

TEST(CheckStructure, DetectsViolations) {
  const Grid g = Grid::cube(2, 17);
  const auto w = sample_face_weights(WeightSpec::constant(2, 1.0), g);
  const auto f = BoundaryData::constant(g, 0.1);
  SolveResult r = minimize_cavitation(w, f, JumpProfile::cavitation(), SolveConfig{});
  EXPECT_TRUE(check_structure(r, w, f).pass());
  SolveResult up = r;
  up.energy_history.push_back(up.energy_history.back());
  up.energy_history.back().total += 1e-6;
  EXPECT_FALSE(check_structure(up, w, f).energy_nonincreasing);
  SolveResult hot = r;
  hot.field[g.index({8, 8, 0})] = 0.2;
  const auto s = check_structure(hot, w, f);
  EXPECT_FALSE(s.maximum_principle);
  EXPECT_FALSE(s.measure_sign);
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <unistd.h>

#include "msddp/error.hpp"
#include "msddp/harness.hpp"

using namespace msddp;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("msddp_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

double num(const std::string& s) { return s == "inf" ? HUGE_VAL : std::stod(s); }

Json example_doc() { return instance_to_json(describe(example_convex_nonlipschitz(0.01))); }

}  // namespace

TEST_SUITE("instance files") {
  TEST_CASE("round trip of the built-in examples") {
    for (const Instance& inst : {example_convex_nonlipschitz(1e-3), example_milp_discontinuous(1e-3),
                                 finite_state_instance(3, 4, 2, 2), lipschitz_chain(3, 2, 1.0, 1.0, 0.1, 0.1)}) {
      const InstanceDescription desc = describe(inst);
      const std::string text = emit_instance(desc);
      const InstanceDescription back = parse_instance(text);
      CHECK(same_description(desc, back));
      CHECK(emit_instance(back) == text);
    }
  }

  TEST_CASE("quadratic cap file matches the generator") {
    Json doc = example_doc();
    const InstanceDescription parsed = instance_from_json(doc);
    const Instance gen = example_convex_nonlipschitz(0.01);
    REQUIRE(parsed.instance.tree->nodes().size() == gen.tree->nodes().size());
    for (std::size_t n = 0; n < gen.tree->nodes().size(); ++n) {
      CHECK(same_data(parsed.instance.tree->nodes()[n].data, gen.tree->nodes()[n].data));
    }
    CHECK(parsed.oracle.kind == "grid");

    InstanceDescription analytic = describe(gen);
    analytic.oracle.kind = "analytic";
    analytic.oracle.analytic = gen.meta.extra.at("analytic_oracle").get<std::string>();
    const Json adoc = instance_to_json(analytic);
    CHECK(adoc["oracle"]["kind"] == "analytic:convex_cap");
    CHECK(parse_instance(adoc.dump()).oracle.analytic == "convex_cap");
  }

  TEST_CASE("schema errors name the field") {
    Json doc = example_doc();
    const std::string key = doc["node_data"].begin().key();
    doc["node_data"][key]["penalty"].erase("sigma");
    const std::string msg = error_text([&] { instance_from_json(doc); });
    CHECK(msg.find("SchemaError") != std::string::npos);
    CHECK(msg.find("node_data." + key + ".penalty.sigma") != std::string::npos);

    Json extra = example_doc();
    extra["meta"]["colour"] = "blue";
    CHECK(error_text([&] { instance_from_json(extra); }).find("meta.colour") != std::string::npos);

    Json version = example_doc();
    version["version"] = 2;
    CHECK(code_of([&] { instance_from_json(version); }) == ErrorCode::VersionMismatch);

    Json family = example_doc();
    family["node_data"][key]["cost"]["family"] = "cubic";
    CHECK(code_of([&] { instance_from_json(family); }) == ErrorCode::UnknownCostFamily);

    CHECK(code_of([] { parse_instance("{not json"); }) == ErrorCode::SchemaError);
    Json noversion = example_doc();
    noversion.erase("version");
    CHECK(code_of([&] { instance_from_json(noversion); }) == ErrorCode::SchemaError);
  }

  TEST_CASE("atomic writes create directories") {
    const fs::path dir = scratch("io");
    const std::string path = (dir / "a" / "b.txt").string();
    write_file_atomic(path, "hello");
    CHECK(read_file(path) == "hello");
    write_file_atomic(path, "again");
    CHECK(read_file(path) == "again");
    CHECK(code_of([&] { read_file((dir / "missing").string()); }) == ErrorCode::IoError);
  }
}

TEST_SUITE("run") {
  TEST_CASE("convex example converges with nested decomposition") {
    const fs::path dir = scratch("run1");
    RunOptions opt;
    opt.eps = 1e-3;
    opt.trace_path = (dir / "trace.csv").string();
    opt.result_path = (dir / "result.json").string();
    std::ostringstream diag;
    const RunOutcome out = run(describe(example_convex_nonlipschitz(1e-3)), opt, diag);
    CHECK(out.exit_code == 0);
    CHECK(diag.str().empty());
    const Json result = Json::parse(read_file(opt.result_path));
    CHECK(result["status"] == "Converged");
    CHECK(result["gap"].get<double>() <= 1e-3);
    CHECK(std::abs(result["objective_unshifted"].get<double>()) <= 1e-3);

    const auto rows = read_csv(opt.trace_path);
    REQUIRE(rows.size() >= 2);
    std::string header;
    for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
    CHECK(header == kTraceHeader);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(std::stoi(rows[i][0]) == static_cast<int>(i));
      if (i > 1) {
        CHECK(num(rows[i][1]) >= num(rows[i - 1][1]));
        CHECK(num(rows[i][2]) <= num(rows[i - 1][2]));
      }
    }
    const auto& last = rows.back();
    CHECK(num(last[3]) == doctest::Approx(num(last[2]) - num(last[1])));
  }

  TEST_CASE("mixed-integer example reports unshifted objective") {
    RunOptions opt;
    opt.algorithm = Algorithm::DdpDet;
    std::ostringstream diag;
    const RunOutcome out = run(describe(example_milp_discontinuous(1e-3, 2.0)), opt, diag);
    CHECK(out.exit_code == 0);
    CHECK(out.result_doc["objective"].get<double>() == doctest::Approx(1.0));
    CHECK(out.result_doc["objective_unshifted"].get<double>() == doctest::Approx(0.0));
    CHECK(out.result_doc["x"][0].get<double>() == doctest::Approx(1.0));
  }

  TEST_CASE("stochastic runs are reproducible without timing") {
    const fs::path dir = scratch("run2");
    const InstanceDescription desc = describe(finite_state_instance(3, 4, 3, 2));
    std::string traces[2];
    for (int k = 0; k < 2; ++k) {
      RunOptions opt;
      opt.algorithm = Algorithm::DdpStoch;
      opt.seed = 7;
      opt.samples = 1;
      opt.timing = false;
      opt.trace_path = (dir / ("t" + std::to_string(k) + ".csv")).string();
      std::ostringstream diag;
      CHECK(run(desc, opt, diag).exit_code == 0);
      traces[k] = read_file(opt.trace_path);
    }
    CHECK(traces[0] == traces[1]);
    CHECK_FALSE(traces[0].empty());
  }

  TEST_CASE("iteration cap and errors map to exit codes") {
    RunOptions opt;
    opt.algorithm = Algorithm::DdpDet;
    opt.max_iters = 1;
    opt.eps = 1e-9;
    std::ostringstream diag;
    CHECK(run(describe(lipschitz_chain(3, 1, 1.0, 1.0, 0.1, 0.05)), opt, diag).exit_code == 2);

    // same class under different parents with different data
    std::vector<NodeSpec> specs = finite_state_instance(2, 3, 1, 2).specs;
    for (auto& s : specs) {
      if (s.id == "n01") s.data.cost = make_cost("table", s.data.cost->params());
      if (s.id == "n11") s.data.cost = make_cost("constant", {{"value", 3.0}});
    }
    InstanceMeta meta;
    meta.name = "general";
    std::ostringstream diag2;
    const RunOutcome bad = run(describe(make_instance(specs, meta)), opt, diag2);
    CHECK(bad.exit_code == 1);
    CHECK(diag2.str().find("NotStagewiseIndependent") != std::string::npos);
  }
}

TEST_SUITE("bounds") {
  TEST_CASE("spot values") {
    BoundParams p;
    p.T = 2;
    p.L = 1.0;
    p.D = 1.0;
    p.d = 1;
    p.eps = 0.5;
    CHECK(evaluate_bounds(p).horizon_bound.value() == 18.0L);
    p.T = 4;
    CHECK(evaluate_bounds(p).lipschitz_lower_bound.value() == 2.0L);
    p.N = 3;
    p.M = 1;
    CHECK(evaluate_bounds(p).nu == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    p.K = 5;
    CHECK(evaluate_bounds(p).finite_bound.value() == 20.0L);
  }

  TEST_CASE("large values move to log10") {
    BoundParams p;
    p.d = 40;
    p.T = 10;
    p.eps = 1e-3;
    const BoundReport r = evaluate_bounds(p);
    const Json j = r.to_json();
    CHECK(j["horizon_bound"].is_object());
    CHECK(j["horizon_bound"]["log10"].get<double>() ==
          doctest::Approx(1.0 + 40.0 * std::log10(1.0 + 2.0 * 10.0 / 1e-3)));
    CHECK(j["convex_lower_bound"].is_object());
  }

  TEST_CASE("monotone on a parameter lattice") {
    const int Ts[3] = {1, 2, 4};
    const double Ds[3] = {0.5, 1.0, 2.0};
    const double Ls[3] = {0.5, 1.0, 3.0};
    const int ds[3] = {1, 2, 3};
    const double epss[3] = {0.5, 0.1, 0.01};  // decreasing
    auto value = [](int T, double D, double L, int d, double eps) {
      BoundParams p;
      p.T = T;
      p.D = D;
      p.L = L;
      p.d = d;
      p.eps = eps;
      return evaluate_bounds(p).horizon_bound.log10;
    };
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c)
          for (int e = 0; e < 3; ++e) {
            const long double base = value(Ts[a], Ds[b], Ls[c], ds[e], 0.1);
            if (a < 2) CHECK(value(Ts[a + 1], Ds[b], Ls[c], ds[e], 0.1) >= base);
            if (b < 2) CHECK(value(Ts[a], Ds[b + 1], Ls[c], ds[e], 0.1) >= base);
            if (c < 2) CHECK(value(Ts[a], Ds[b], Ls[c + 1], ds[e], 0.1) >= base);
            if (e < 2) CHECK(value(Ts[a], Ds[b], Ls[c], ds[e + 1], 0.1) >= base);
            for (int k = 0; k < 2; ++k) {
              CHECK(value(Ts[a], Ds[b], Ls[c], ds[e], epss[k + 1]) >= value(Ts[a], Ds[b], Ls[c], ds[e], epss[k]));
            }
          }
  }

  TEST_CASE("invalid parameters") {
    BoundParams p;
    p.eps = 0.0;
    CHECK(code_of([&] { evaluate_bounds(p); }) == ErrorCode::BadParams);
    p.eps = 0.1;
    p.kappa = 1.0;
    CHECK(code_of([&] { evaluate_bounds(p); }) == ErrorCode::BadParams);
  }

  TEST_CASE("instance parameters") {
    const BoundParams p = bound_params_for(describe(finite_state_instance(3, 4, 1, 4)), 0.1, 2);
    CHECK(p.T == 3);
    CHECK(p.K == 4);
    CHECK(p.N == 4);
    CHECK(p.M == 2);
  }
}

TEST_SUITE("sweep") {
  TEST_CASE("adversarial chains need at least 2.5 T iterations") {
    const fs::path dir = scratch("sweep_chain");
    const SweepConfig cfg = sweep_config_from_json(Json::parse(R"({
      "family": "lipschitz_chain",
      "grid": {"T": [2, 4, 8], "d": [1], "D": [1], "L": [1]},
      "eps": [0.1], "h": 0.01
    })"));
    const auto rows = run_sweep(cfg, dir.string(), false);
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
      CHECK(row.status == "Converged");
      CHECK(row.iterations >= std::ceil(row.params.at("T") / 0.4));
      CHECK(static_cast<double>(row.iterations) >= static_cast<double>(row.lower_formula.value()));
      CHECK(static_cast<double>(row.iterations) <= static_cast<double>(row.upper_formula.value()));
    }
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "cell_0.csv"));
    const auto summary = read_csv(dir / "summary.csv");
    CHECK(summary.size() == 4);
  }

  TEST_CASE("finite-state cells stay within T K") {
    const fs::path dir = scratch("sweep_finite");
    const SweepConfig cfg = sweep_config_from_json(Json::parse(R"({
      "family": "finite_state",
      "grid": {"T": [2, 3, 4], "K": [5], "seed": [1]},
      "eps": [0]
    })"));
    const auto rows = run_sweep(cfg, dir.string(), false);
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
      CHECK(row.status == "Converged");
      CHECK(row.iterations <= 5 * row.params.at("T"));
    }
  }

  TEST_CASE("empty grid gives an empty table") {
    const fs::path dir = scratch("sweep_empty");
    const SweepConfig cfg = sweep_config_from_json(Json::parse(R"({
      "family": "finite_state", "grid": {"T": [], "K": [3], "seed": [1]}, "eps": [0]
    })"));
    CHECK(run_sweep(cfg, dir.string(), false).empty());
    const auto summary = read_csv(dir / "summary.csv");
    CHECK(summary.size() == 1);
  }

  TEST_CASE("failing cells are marked and the sweep continues") {
    const fs::path dir = scratch("sweep_fail");
    const SweepConfig cfg = sweep_config_from_json(Json::parse(R"({
      "family": "lipschitz_chain", "grid": {"T": [2], "d": [1], "D": [1, -1], "L": [1]}, "eps": [0.1]
    })"));
    const auto rows = run_sweep(cfg, dir.string(), false);
    REQUIRE(rows.size() == 2);
    int errors = 0, ok = 0;
    for (const auto& row : rows) (row.status == "error" ? errors : ok)++;
    CHECK(errors == 1);
    CHECK(ok == 1);
  }

  TEST_CASE("config errors") {
    CHECK(code_of([] { sweep_config_from_json(Json::parse(R"({"family": "x", "grid": {}, "eps": []})")); }) ==
          ErrorCode::SchemaError);
    CHECK(code_of([] {
            sweep_config_from_json(Json::parse(R"({"family": "finite_state", "grid": {}, "eps": [], "bogus": 1})"));
          }) == ErrorCode::SchemaError);
  }
}

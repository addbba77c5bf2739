#include "msddp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "msddp/error.hpp"

namespace msddp {

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

int exit_code_for(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
    case SolveStatus::Stopped:
      return 0;
    case SolveStatus::IterationCap:
      return 2;
    case SolveStatus::OracleError:
      return 1;
  }
  return 1;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r' || c == ',') c = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Nbd:
      return "nbd";
    case Algorithm::DdpDet:
      return "ddp-det";
    case Algorithm::DdpStoch:
      return "ddp-stoch";
  }
  return "?";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "nbd") return Algorithm::Nbd;
  if (name == "ddp-det") return Algorithm::DdpDet;
  if (name == "ddp-stoch") return Algorithm::DdpStoch;
  throw Error(ErrorCode::InvalidConfig, "unknown algorithm '" + std::string(name) + "'");
}

std::string format_trace_row(const TraceRow& row, bool timing) {
  std::string out = std::to_string(row.iter);
  out += ',' + fmt(row.lb) + ',' + fmt(row.ub) + ',' + fmt(row.gap) + ',' + std::to_string(row.cuts) + ',';
  out += timing ? fmt(row.ms) : std::string("0");
  out += ',' + std::to_string(row.oracle_calls);
  return out;
}

RunOutcome run(const InstanceDescription& desc, const RunOptions& options, std::ostream& diag) {
  RunOutcome out;
  std::string trace = std::string(kTraceHeader) + "\n";
  try {
    const Instance& inst = desc.instance;
    const double eps = options.eps_per_stage ? inst.tree->horizon() * *options.eps_per_stage : options.eps;
    const OracleSet oracles = make_oracles(desc, options.adversarial);
    auto sink = [&](const TraceRow& row) { trace += format_trace_row(row, options.timing) + "\n"; };

    switch (options.algorithm) {
      case Algorithm::Nbd: {
        SolveConfig cfg;
        cfg.eps = eps;
        cfg.max_iters = options.max_iters;
        cfg.trace_sink = sink;
        out.result = nested_decomposition(*inst.tree, oracles, cfg);
        break;
      }
      case Algorithm::DdpDet: {
        const RecombiningTree rtree = recombine(inst.tree);
        SolveConfig cfg;
        cfg.eps = eps;
        cfg.max_iters = options.max_iters;
        cfg.trace_sink = sink;
        out.result = ddp_deterministic(rtree, oracles, cfg);
        break;
      }
      case Algorithm::DdpStoch: {
        const RecombiningTree rtree = recombine(inst.tree);
        StochasticConfig cfg;
        cfg.samples = options.samples;
        cfg.seed = options.seed.value_or(desc.oracle.seed);
        cfg.max_iters = options.max_iters;
        cfg.trace_sink = sink;
        out.result = ddp_stochastic(rtree, oracles, cfg);
        break;
      }
    }

    const SolveResult& r = out.result;
    const double objective = std::isfinite(r.upper_bound) ? r.upper_bound : r.lower_bound;
    Json doc;
    doc["status"] = to_string(r.status);
    doc["algorithm"] = to_string(options.algorithm);
    doc["eps"] = eps;
    doc["iterations"] = r.iterations;
    doc["lower_bound"] = r.lower_bound;
    doc["upper_bound"] = finite_or_null(r.upper_bound);
    doc["gap"] = finite_or_null(r.upper_bound - r.lower_bound);
    doc["objective"] = objective;
    doc["objective_unshifted"] = objective - inst.meta.shift;
    doc["shift"] = inst.meta.shift;
    doc["x"] = r.x_star;
    doc["y"] = r.y_star;
    doc["oracle_calls"] = r.oracle_calls;
    doc["sigma_certified"] = inst.meta.certified_sigma ? Json(*inst.meta.certified_sigma) : Json(nullptr);
    if (!r.message.empty()) doc["message"] = r.message;
    out.result_doc = std::move(doc);
    out.exit_code = exit_code_for(r.status);
    if (r.status == SolveStatus::OracleError) diag << "error: " << r.message << "\n";
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << "\n";
    out.exit_code = 1;
    out.result_doc = {{"status", "error"}, {"message", e.what()}};
  }
  try {
    if (!options.trace_path.empty()) write_file_atomic(options.trace_path, trace);
    if (!options.result_path.empty()) write_file_atomic(options.result_path, out.result_doc.dump(2) + "\n");
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << "\n";
    out.exit_code = 1;
  }
  return out;
}

BoundParams bound_params_for(const InstanceDescription& desc, double eps, int samples) {
  const ScenarioTree& tree = *desc.instance.tree;
  BoundParams p;
  p.eps = eps;
  p.T = std::max(1, tree.horizon());
  p.M = samples;
  std::size_t dim = 1, finite_max = 0;
  bool all_finite = true;
  double diam = 0.0, sigma = 0.0;
  for (const auto& node : tree.nodes()) {
    const StateSpace& s = node.data.state_space;
    dim = std::max(dim, s.dim());
    diam = std::max(diam, s.diameter());
    if (node.parent >= 0) sigma = std::max(sigma, node.data.penalty.sigma);
    if (s.kind() == SetKind::Finite) {
      finite_max = std::max(finite_max, s.points().size());
    } else if (s.kind() != SetKind::None) {
      all_finite = false;
    }
  }
  p.d = static_cast<int>(dim);
  p.D = diam > 0.0 ? diam : 1.0;
  p.L = sigma > 0.0 ? sigma : 1.0;
  if (all_finite && finite_max > 0) p.K = static_cast<int>(finite_max);
  int N = 1;
  try {
    const RecombiningTree rt = recombine(desc.instance.tree);
    for (int t = 1; t <= rt.horizon(); ++t) N = std::max(N, static_cast<int>(rt.templates(t).size()));
  } catch (const Error&) {
    for (const auto& node : tree.nodes()) N = std::max(N, static_cast<int>(node.children.size()));
  }
  p.N = N;
  return p;
}

int worker_threads() {
  if (const char* env = std::getenv("MSDDP_THREADS")) {
    int v = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepConfig sweep_config_from_json(const Json& doc) {
  auto bad = [](const std::string& path, const std::string& what) {
    throw Error(ErrorCode::SchemaError, path + ": " + what);
  };
  if (!doc.is_object()) bad("sweep", "expected an object");
  SweepConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "family") {
      if (!value.is_string()) bad(key, "expected a string");
      cfg.family = value.get<std::string>();
    } else if (key == "grid") {
      if (!value.is_object()) bad(key, "expected an object");
      for (const auto& [name, list] : value.items()) {
        if (!list.is_array()) bad("grid." + name, "expected an array of numbers");
        std::vector<double> values;
        for (const auto& v : list) {
          if (!v.is_number()) bad("grid." + name, "expected an array of numbers");
          values.push_back(v.get<double>());
        }
        cfg.grid[name] = std::move(values);
      }
    } else if (key == "eps") {
      if (!value.is_array()) bad(key, "expected an array of numbers");
      for (const auto& v : value) {
        if (!v.is_number()) bad(key, "expected an array of numbers");
        cfg.eps.push_back(v.get<double>());
      }
    } else if (key == "algorithm") {
      if (!value.is_string()) bad(key, "expected a string");
      cfg.algorithm = algorithm_from_string(value.get<std::string>());
    } else if (key == "max_iters") {
      if (!value.is_number_integer()) bad(key, "expected an integer");
      cfg.max_iters = value.get<int>();
    } else if (key == "h") {
      if (!value.is_number()) bad(key, "expected a number");
      cfg.h = value.get<double>();
    } else if (key == "seed") {
      if (!value.is_number_integer()) bad(key, "expected an integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "samples") {
      if (!value.is_number_integer()) bad(key, "expected an integer");
      cfg.samples = value.get<int>();
    } else {
      bad(key, "unknown field");
    }
  }
  std::vector<std::string> allowed;
  if (cfg.family == "lipschitz_chain" || cfg.family == "convex_worstcase") {
    allowed = {"T", "d", "D", "L"};
  } else if (cfg.family == "finite_state") {
    allowed = {"T", "K", "seed", "branching"};
  } else {
    bad("family", "expected lipschitz_chain, convex_worstcase or finite_state");
  }
  for (const auto& [name, list] : cfg.grid) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) bad("grid." + name, "unknown parameter");
  }
  return cfg;
}

namespace {

std::vector<std::map<std::string, double>> expand(const std::map<std::string, std::vector<double>>& grid) {
  std::vector<std::map<std::string, double>> cells;
  if (grid.empty()) return cells;
  cells.emplace_back();
  for (const auto& [name, values] : grid) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& cell : cells) {
      for (double v : values) {
        auto c = cell;
        c[name] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

void run_cell(const SweepConfig& cfg, SweepRow& row, const std::string& out_dir, bool timing) {
  const auto& p = row.params;
  const int T = static_cast<int>(param(p, "T", 2));
  const int d = static_cast<int>(param(p, "d", 1));
  const double D = param(p, "D", 1.0), L = param(p, "L", 1.0);
  BoundParams bp;
  bp.eps = row.eps;
  bp.T = T;
  bp.d = d;
  bp.D = D;
  bp.L = L;

  Instance inst;
  bool adversarial = false;
  if (cfg.family == "lipschitz_chain") {
    inst = lipschitz_chain(T, d, D, L, row.eps, cfg.h);
    adversarial = true;
    const BoundReport rep = evaluate_bounds(bp);
    row.upper_formula = rep.horizon_bound;
    row.lower_formula = rep.lipschitz_lower_bound;
  } else if (cfg.family == "convex_worstcase") {
    inst = convex_worstcase(T, d, D, L, row.eps, cfg.seed, cfg.h).instance;
    const BoundReport rep = evaluate_bounds(bp);
    row.upper_formula = rep.horizon_bound;
    row.lower_formula = rep.convex_lower_bound;
  } else {
    const int K = static_cast<int>(param(p, "K", 3));
    const auto seed = static_cast<std::uint64_t>(param(p, "seed", static_cast<double>(cfg.seed)));
    inst = finite_state_instance(T, K, seed, static_cast<int>(param(p, "branching", 1)));
    row.upper_formula = FormulaValue::from_value(static_cast<long double>(T) * K);
  }

  RunOptions opt;
  opt.algorithm = cfg.algorithm;
  opt.eps = row.eps;
  opt.max_iters = cfg.max_iters;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  opt.adversarial = adversarial;
  opt.timing = timing;
  opt.trace_path = (std::filesystem::path(out_dir) / ("cell_" + std::to_string(row.cell) + ".csv")).string();
  std::ostringstream diag;
  const RunOutcome outcome = run(describe(std::move(inst)), opt, diag);
  if (outcome.exit_code == 1) {
    row.status = "error";
    row.error = one_line(diag.str());
    return;
  }
  row.status = std::string(to_string(outcome.result.status));
  row.iterations = outcome.result.iterations;
  row.lb = outcome.result.lower_bound;
  row.ub = outcome.result.upper_bound;
}

std::string formula_cell(const FormulaValue& f) {
  if (!f.available) return "";
  if (f.log10 > 15.0L) return "1e" + fmt(static_cast<double>(f.log10));
  return fmt(static_cast<double>(f.value()));
}

std::string ratio_cell(int iterations, const FormulaValue& f) {
  if (!f.available) return "";
  return fmt(static_cast<double>(static_cast<long double>(iterations) / f.value()));
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& config, const std::string& out_dir, bool timing) {
  std::vector<SweepRow> rows;
  std::size_t index = 0;
  for (const auto& cell : expand(config.grid)) {
    for (double eps : config.eps) {
      SweepRow row;
      row.cell = index++;
      row.params = cell;
      row.eps = eps;
      rows.push_back(std::move(row));
    }
  }
  std::filesystem::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      try {
        run_cell(config, rows[i], out_dir, timing);
      } catch (const std::exception& e) {
        rows[i].status = "error";
        rows[i].error = one_line(e.what());
      }
    }
  };
  const int threads = std::min<int>(worker_threads(), static_cast<int>(std::max<std::size_t>(rows.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  write_file_atomic((std::filesystem::path(out_dir) / "summary.csv").string(), format_summary(config, rows));
  return rows;
}

std::string format_summary(const SweepConfig& config, const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& row : rows) {
    auto col = [&](const char* key) {
      const auto it = row.params.find(key);
      return it == row.params.end() ? std::string() : fmt(it->second);
    };
    const bool ok = row.status != "error";
    out += std::to_string(row.cell) + ',' + config.family + ',' + col("T") + ',' + col("d") + ',' + col("K") + ',' +
           col("D") + ',' + col("L") + ',' + fmt(row.eps) + ',' + row.status + ',' +
           (ok ? std::to_string(row.iterations) : std::string()) + ',' + (ok ? fmt(row.lb) : std::string()) + ',' +
           (ok ? fmt(row.ub) : std::string()) + ',' + formula_cell(row.upper_formula) + ',' +
           formula_cell(row.lower_formula) + ',' + (ok ? ratio_cell(row.iterations, row.upper_formula) : "") + ',' +
           (ok ? ratio_cell(row.iterations, row.lower_formula) : "") + ',' + row.error + "\n";
  }
  return out;
}

}  // namespace msddp

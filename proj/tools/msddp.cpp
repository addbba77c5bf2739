// Command-line front end: solve, bounds, sweep, generate.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "msddp/error.hpp"
#include "msddp/harness.hpp"

using namespace msddp;

namespace {

struct SolveArgs {
  std::string instance;
  std::string algorithm = "nbd";
  double eps = 1e-3;
  std::optional<double> eps_per_stage;
  std::optional<std::uint64_t> seed;
  int max_iters = 10000;
  int samples = 1;
  std::string trace, result;
  bool adversarial = false;
  bool bounds_only = false;
  bool no_timing = false;
};

struct BoundArgs {
  BoundParams p;
  std::optional<int> K;
};

struct GenerateArgs {
  std::string family;
  std::string output;
  int T = 2, d = 1, K = 3, branching = 1;
  double D = 1.0, L = 1.0, eps = 0.1, h = 0.01;
  std::optional<double> sigma;
  std::uint64_t seed = 1;
  bool finite_root = false;
};

int do_solve(const SolveArgs& a) {
  const InstanceDescription desc = parse_instance(read_file(a.instance));
  if (a.bounds_only) {
    const double eps = a.eps_per_stage ? *a.eps_per_stage : a.eps;
    std::cout << evaluate_bounds(bound_params_for(desc, eps, a.samples)).to_json().dump(2) << "\n";
    return 0;
  }
  RunOptions opt;
  opt.algorithm = algorithm_from_string(a.algorithm);
  opt.eps = a.eps;
  opt.eps_per_stage = a.eps_per_stage;
  opt.seed = a.seed;
  opt.max_iters = a.max_iters;
  opt.samples = a.samples;
  opt.adversarial = a.adversarial;
  opt.trace_path = a.trace;
  opt.result_path = a.result;
  opt.timing = !a.no_timing;
  const RunOutcome out = run(desc, opt, std::cerr);
  if (a.result.empty()) std::cout << out.result_doc.dump(2) << "\n";
  return out.exit_code;
}

int do_generate(const GenerateArgs& a) {
  Instance inst;
  if (a.family == "convex_nonlipschitz") {
    inst = example_convex_nonlipschitz(a.h, a.sigma.value_or(4.0 / 3.0));
  } else if (a.family == "milp_discontinuous") {
    inst = example_milp_discontinuous(a.h, a.sigma.value_or(5.0), a.finite_root);
  } else if (a.family == "lipschitz_chain") {
    inst = lipschitz_chain(a.T, a.d, a.D, a.L, a.eps, a.h);
  } else if (a.family == "convex_worstcase") {
    inst = convex_worstcase(a.T, a.d, a.D, a.L, a.eps, a.seed, a.h).instance;
  } else if (a.family == "finite_state") {
    inst = finite_state_instance(a.T, a.K, a.seed, a.branching);
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown family '" + a.family + "'");
  }
  const std::string text = emit_instance(describe(std::move(inst)));
  if (a.output.empty() || a.output == "-") {
    std::cout << text;
  } else {
    write_file_atomic(a.output, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual dynamic programming solvers for multistage stochastic programs"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Solve an instance file");
  s->add_option("instance", solve.instance, "Instance file")->required();
  s->add_option("--algorithm", solve.algorithm, "nbd, ddp-det or ddp-stoch")
      ->check(CLI::IsMember({"nbd", "ddp-det", "ddp-stoch"}));
  s->add_option("--eps", solve.eps, "Termination gap");
  s->add_option("--eps-per-stage", solve.eps_per_stage, "Per-stage accuracy; the gap threshold becomes T times it");
  s->add_option("--seed", solve.seed, "Sampling seed (overrides the instance)");
  s->add_option("--max-iters", solve.max_iters, "Iteration cap");
  s->add_option("--samples", solve.samples, "Sampled paths per iteration (ddp-stoch)");
  s->add_option("--trace", solve.trace, "Trace CSV path");
  s->add_option("--result", solve.result, "Result JSON path (stdout otherwise)");
  s->add_flag("--adversarial", solve.adversarial, "Farthest-point tie-breaking in grid oracles");
  s->add_flag("--bounds-only", solve.bounds_only, "Print complexity bounds for the instance and exit");
  s->add_flag("--no-timing", solve.no_timing, "Write 0 in the ms trace column");

  BoundArgs bounds;
  auto* b = app.add_subcommand("bounds", "Evaluate iteration complexity bounds");
  b->add_option("--eps", bounds.p.eps, "Optimality gap");
  b->add_option("--T", bounds.p.T, "Stages");
  b->add_option("--d", bounds.p.d, "State dimension");
  b->add_option("--D", bounds.p.D, "State space diameter");
  b->add_option("--L", bounds.p.L, "Lipschitz constant");
  b->add_option("--K", bounds.K, "Largest finite state set");
  b->add_option("--M", bounds.p.M, "Sampled paths per iteration");
  b->add_option("--N", bounds.p.N, "Largest number of nodes per stage");
  b->add_option("--kappa", bounds.p.kappa, "Tail parameter (> 1)");
  b->add_option("--delta", bounds.p.delta, "Per-stage accuracies");

  std::string sweep_config, sweep_out;
  bool sweep_no_timing = false;
  auto* w = app.add_subcommand("sweep", "Run a complexity experiment sweep");
  w->add_option("config", sweep_config, "Sweep config (JSON)")->required();
  w->add_option("--out", sweep_out, "Output directory")->required();
  w->add_flag("--no-timing", sweep_no_timing, "Write 0 in the ms trace column");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a built-in instance file");
  g->add_option("family", gen.family,
                "convex_nonlipschitz, milp_discontinuous, lipschitz_chain, convex_worstcase or finite_state")
      ->required();
  g->add_option("-o,--output", gen.output, "Output path (stdout otherwise)");
  g->add_option("--T", gen.T);
  g->add_option("--d", gen.d);
  g->add_option("--D", gen.D);
  g->add_option("--L", gen.L);
  g->add_option("--K", gen.K);
  g->add_option("--eps", gen.eps);
  g->add_option("--grid-h", gen.h, "Grid resolution");
  g->add_option("--sigma", gen.sigma);
  g->add_option("--seed", gen.seed);
  g->add_option("--branching", gen.branching);
  g->add_flag("--finite-root", gen.finite_root);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) return do_solve(solve);
    if (*b) {
      bounds.p.K = bounds.K;
      std::cout << evaluate_bounds(bounds.p).to_json().dump(2) << "\n";
      return 0;
    }
    if (*w) {
      const SweepConfig cfg = sweep_config_from_json(Json::parse(read_file(sweep_config)));
      const auto rows = run_sweep(cfg, sweep_out, !sweep_no_timing);
      std::cout << format_summary(cfg, rows);
      return 0;
    }
    if (*g) return do_generate(gen);
  } catch (const Json::parse_error& e) {
    std::cerr << "error: SchemaError: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

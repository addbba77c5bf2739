#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "msddp/algorithms.hpp"
#include "msddp/bounds.hpp"
#include "msddp/instance_io.hpp"

namespace msddp {

enum class Algorithm { Nbd, DdpDet, DdpStoch };

std::string_view to_string(Algorithm a);
/// "nbd", "ddp-det" or "ddp-stoch"; throws InvalidConfig otherwise.
Algorithm algorithm_from_string(std::string_view name);

struct RunOptions {
  Algorithm algorithm = Algorithm::Nbd;
  double eps = 1e-3;
  /// When set, the termination threshold becomes T times this value.
  std::optional<double> eps_per_stage;
  std::optional<std::uint64_t> seed;  // overrides the instance's oracle seed
  int max_iters = 10000;
  int samples = 1;
  bool adversarial = false;
  std::string trace_path;
  std::string result_path;
  bool timing = true;  // false writes 0 in the ms column
};

struct RunOutcome {
  int exit_code = 1;
  SolveResult result;
  Json result_doc;
};

/// Trace header; the trailing oracle_calls column counts oracle invocations.
inline constexpr std::string_view kTraceHeader = "iter,lb,ub,gap,cuts,ms,oracle_calls";

std::string format_trace_row(const TraceRow& row, bool timing);

/// Exit codes: 0 converged (or stopped by the sampling stop rule),
/// 2 iteration cap, 1 error. Errors are reported on `diag`.
RunOutcome run(const InstanceDescription& desc, const RunOptions& options, std::ostream& diag);

/// Parameters implied by an instance: T, largest state dimension and
/// diameter, largest sigma, largest finite state set, templates per stage.
BoundParams bound_params_for(const InstanceDescription& desc, double eps, int samples);

struct SweepConfig {
  std::string family;  // lipschitz_chain, convex_worstcase or finite_state
  /// Lists per parameter (T, d, D, L for the Lipschitz families; T, K, seed
  /// for finite_state). Cells are the cartesian product with `eps`.
  std::map<std::string, std::vector<double>> grid;
  std::vector<double> eps;
  Algorithm algorithm = Algorithm::DdpDet;
  int max_iters = 10000;
  double h = 0.01;
  std::uint64_t seed = 1;
  int samples = 1;
};

/// Throws SchemaError for malformed configs.
SweepConfig sweep_config_from_json(const Json& doc);

struct SweepRow {
  std::size_t cell = 0;
  std::map<std::string, double> params;
  double eps = 0.0;
  std::string status;  // solve status, or "error"
  int iterations = 0;
  double lb = 0.0, ub = 0.0;
  FormulaValue upper_formula, lower_formula;
  std::string error;
};

inline constexpr std::string_view kSummaryHeader =
    "cell,family,T,d,K,D,L,eps,status,iterations,lb,ub,upper_formula,lower_formula,iter_over_upper,iter_over_lower,error";

/// Runs every cell (on MSDDP_THREADS workers, default hardware concurrency),
/// writing `cell_<i>.csv` traces and `summary.csv` atomically into `out_dir`.
/// Failing cells become rows with status "error"; the sweep continues.
std::vector<SweepRow> run_sweep(const SweepConfig& config, const std::string& out_dir, bool timing = true);

std::string format_summary(const SweepConfig& config, const std::vector<SweepRow>& rows);

/// Positive integer from MSDDP_THREADS, or the hardware concurrency.
int worker_threads();

}  // namespace msddp

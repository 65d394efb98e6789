#pragma once

// Monte Carlo coverage studies for the shipped simulation pairs and the
// running-mean ("B-sweep") curve of a multi-split estimate on a fixed dataset.

#include "splitee/model_zoo.hpp"
#include "splitee/split_engine.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace splitee {

enum class PairModel { Mean, Linear, Logistic };

const char* to_string(PairModel model);
/// Throws InvalidArgument listing the known names.
PairModel parse_pair_model(const std::string& name);
std::vector<std::string> pair_model_names();

TwoStageSystem make_pair_system(PairModel model);
Dataset simulate_pair(PairModel model, Index n, std::uint64_t seed);
/// Generating value of (theta, beta) for a shipped pair.
Vector pair_truth(PairModel model);

struct CoverageConfig {
  PairModel model = PairModel::Linear;
  std::vector<Index> n_list{50, 100, 250, 500, 1000};
  std::vector<Index> B_list{1, 25};
  double pi = 0.5;
  Index replications = 2000;
  double level = 0.95;
  std::uint64_t master_seed = 0;
  std::string target;  // coordinate name; empty selects the first beta coordinate
  bool include_stacked = false;
  int threads = 0;  // <= 0: runtime default
  SolverConfig solver;

  void validate() const;
};

struct ReplicationRecord {
  Index n = 0;
  Index B = 0;
  Index rep = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t split_seed = 0;
  bool failed = false;
  std::string failure;
  Index failed_splits = 0;
  double estimate = 0.0;
  double se = 0.0;
  Interval interval;
  bool hit = false;
  // Full-data stacked interval on the same dataset, when requested.
  bool stacked_failed = false;
  double stacked_estimate = 0.0;
  Interval stacked_interval;
  bool stacked_hit = false;
};

struct CoverageCell {
  Index n = 0;
  Index B = 0;
  Index successes = 0;
  Index failures = 0;
  Index hits = 0;
  double coverage = 0.0;  // percent of successful replications
  double mc_se = 0.0;     // percentage points
  double mean_width = 0.0;
  bool unstable = false;
  Index stacked_successes = 0;
  Index stacked_hits = 0;
  double stacked_coverage = 0.0;
};

struct CoverageReport {
  CoverageConfig config;
  Index target_index = 0;
  double truth = 0.0;
  std::vector<CoverageCell> cells;          // n-major, B-minor
  std::vector<ReplicationRecord> records;   // cell order, then replication

  const CoverageCell& cell(Index n, Index B) const;
};

/// Child seeds: data from (master, n, rep), shared by every B at that n;
/// splits from (master, n, rep, B).
std::uint64_t coverage_data_seed(std::uint64_t master, Index n, Index rep);
std::uint64_t coverage_split_seed(std::uint64_t master, Index n, Index rep, Index B);

/// Runs every (n, B, replication) item; per-replication solver failures are
/// recorded, never thrown. The report does not depend on `threads`.
CoverageReport run_coverage(const CoverageConfig& config);

/// Summary statistics recomputed from records of one cell.
CoverageCell summarize_cell(const CoverageReport& report, Index n, Index B);

void write_replications_csv(std::ostream& out, const CoverageReport& report);
void write_summary_csv(std::ostream& out, const CoverageReport& report);
void write_summary_text(std::ostream& out, const CoverageReport& report);

struct BSweepRow {
  Index B = 0;
  double running_mean = 0.0;
  double se = 0.0;
  Interval interval;
};

struct BSweepReport {
  Index target_index = 0;
  std::string target_name;
  double level = 0.95;
  SplitAssignment splits;
  std::vector<SplitEstimate> per_split;
  std::vector<BSweepRow> rows;
  double final_mean = 0.0;
};

/// Per-split fits on one dataset and, for every prefix 1..B_max, the running
/// mean of the target coordinate with its averaged-influence interval. A split
/// that fails to converge raises its error.
BSweepReport run_b_sweep(const TwoStageSystem& system, const Dataset& data, Index B_max, double pi,
                         std::uint64_t seed, double level, Index target_index,
                         const SolverConfig& config = {}, int threads = 1);

void write_b_sweep_csv(std::ostream& out, const BSweepReport& report);
/// One row per split: b, then every theta and beta coordinate.
void write_per_split_csv(std::ostream& out, const TwoStageSystem& system,
                         const std::vector<SplitEstimate>& per_split);

/// Index of `name` among system.theta_names then system.beta_names.
Index coordinate_index(const TwoStageSystem& system, const std::string& name);
std::string coordinate_name(const TwoStageSystem& system, Index index);

}  // namespace splitee

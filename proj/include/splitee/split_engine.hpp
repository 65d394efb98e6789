#pragma once

// Sample-splitting estimation: Bernoulli(pi) split generation, per-split
// two-stage fits, mean aggregation over B splits, per-observation influence
// rows and the influence-based sandwich covariance.

#include "splitee/system.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace splitee {

using IndicatorMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct SplitAssignment {
  IndicatorMatrix indicators;  // n x B, entry 1 => observation is in the first-stage part
  double pi = 0.5;
  std::uint64_t seed = 0;
  Index regenerated = 0;  // columns redrawn because they failed the size rule

  Index n() const { return indicators.rows(); }
  Index B() const { return indicators.cols(); }
  Vector column(Index b) const { return indicators.col(b).cast<double>(); }

  /// Wraps a user-supplied indicator matrix (entries must be 0 or 1).
  static SplitAssignment from_indicators(IndicatorMatrix indicators);
};

/// Minimum number of first-stage (ones) and second-stage (zeros) rows a
/// generated column must contain.
struct SplitRule {
  Index min_ones = 0;
  Index min_zeros = 0;
};

/// max(dim_theta, floor) ones and max(dim_beta, floor) zeros.
SplitRule default_split_rule(Index dim_theta, Index dim_beta, Index floor = 5);

bool column_satisfies(const SplitAssignment& splits, Index b, const SplitRule& rule);

/// Raw i.i.d. Bernoulli(pi) matrix from a seeded 64-bit Mersenne Twister,
/// filled column by column.
SplitAssignment generate_splits(Index n, Index B, double pi, std::uint64_t seed);

/// As generate_splits, but a column failing `rule` is replaced by the next n
/// draws of the same stream until it passes (at most `max_attempts` redraws
/// per column, else InvalidArgument).
SplitAssignment generate_valid_splits(Index n, Index B, double pi, std::uint64_t seed,
                                      const SplitRule& rule, Index max_attempts = 1000);

struct SplitEstimate {
  Index b = 0;
  Vector theta_hat;
  Vector beta_hat;
  ParamEstimate theta_diag;
  ParamEstimate beta_diag;
  bool failed = false;
  std::string failure;
};

/// Fits one split: theta solves the delta-weighted first-stage equation, then
/// beta solves the (1 - delta)-weighted second-stage equation with theta held
/// at its estimate. Solver exceptions propagate tagged with stage and split;
/// non-convergence marks the split failed.
SplitEstimate fit_single_split(const TwoStageSystem& system, const Dataset& data,
                               const Vector& delta, const SolverConfig& config = {}, Index b = 0);

struct AggregatedEstimate {
  Vector theta_bar;
  Vector beta_bar;
  Index B_used = 0;
  std::vector<SplitEstimate> per_split;

  std::vector<Index> failed_splits() const;
};

/// Per-split fits and their means over the non-failed splits. Splits may run
/// in parallel (`threads` <= 0 uses the runtime default); results are merged
/// by split index. Throws AllSplitsFailed.
AggregatedEstimate fit_multi_split(const TwoStageSystem& system, const Dataset& data,
                                   const SplitAssignment& splits, const SolverConfig& config = {},
                                   int threads = 1);

/// Influence rows for a single split, n x (dim theta + dim beta).
Matrix influence_rows_single(const TwoStageSystem& system, const Dataset& data,
                             const Vector& delta, const Vector& theta_hat, const Vector& beta_hat,
                             const SolverConfig& config = {});

/// Entrywise mean of per-split influence rows.
Matrix influence_rows_multi(std::span<const Matrix> per_split_rows);

struct SandwichCovariance {
  Matrix cov;
  Matrix influence_rows;
  Index n = 0;

  Vector standard_errors() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// n^-1 times the sample covariance (divisor n - 1) of the influence rows.
SandwichCovariance sandwich_covariance(const Matrix& rows);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double value) const { return lower <= value && value <= upper; }
  double width() const { return upper - lower; }
};

/// Standard normal quantile.
double normal_quantile(double p);

/// estimate +/- z_{(1+level)/2} sqrt(variance). Throws NegativeVariance.
Interval wald_interval(double estimate, double variance, double level);

/// Multi-split estimate together with the covariance of the averaged
/// estimator, built from influence rows averaged over the non-failed splits.
struct SplitSampleFit {
  AggregatedEstimate estimate;
  SandwichCovariance covariance;

  Vector stacked_estimate() const;
  std::vector<Interval> intervals(double level) const;
};

SplitSampleFit fit_split_sample(const TwoStageSystem& system, const Dataset& data,
                                const SplitAssignment& splits, const SolverConfig& config = {},
                                int threads = 1);

/// Running sum of influence rows for prefix covariances.
class InfluenceAccumulator {
 public:
  InfluenceAccumulator(Index n, Index dim) : sum_(Matrix::Zero(n, dim)) {}
  void add(const Matrix& rows);
  Index count() const { return count_; }
  Matrix mean() const;

 private:
  Matrix sum_;
  Index count_ = 0;
};

}  // namespace splitee

#pragma once

// Physical-activity score model.
//
// First stage: a binary regression whose logit is a sum of marginal models,
// one per activity component,
//
//   aerobic j = 1..5   d_j - d_j / (1 + (x / c_j)^b_j)      (3-parameter logistic)
//   sitting, TV        theta x                              (linear)
//   sleep              theta_1 s + theta_2 s^2              (quadratic)
//
// plus Z'theta_z for covariates (intercept first). The fitted marginals are
// offset so each is nonnegative over the observed data and rescaled so their
// maxima sum to 100; that score then enters a second-stage logistic risk
// model as a regressor next to Z.
//
// Internally the aerobic shape and half-saturation parameters are carried on
// the log scale, so the first-stage parameter vector is
//
//   [d_1, log b_1, log c_1, ..., d_5, log b_5, log c_5,
//    theta_sit, theta_tv, theta_sleep1, theta_sleep2, intercept, z_1, ...]

#include "splitee/system.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace splitee::activity {

inline constexpr Index kAerobic = 5;
inline constexpr Index kComponents = 8;
inline constexpr Index kSitting = 5;
inline constexpr Index kTv = 6;
inline constexpr Index kSleep = 7;
inline constexpr Index kShapeParams = 3 * kAerobic + 4;  // everything before the covariate block

/// Activity column names in table order.
const std::array<std::string, kComponents>& component_names();

struct ActivityScoreParams {
  std::array<double, kAerobic> b{};  // shape
  std::array<double, kAerobic> c{};  // half-saturation, MET-hrs/wk
  std::array<double, kAerobic> d{};  // asymptote on the logit scale
  double theta_sit = 0.0;
  double theta_tv = 0.0;
  double theta_sleep1 = 0.0;
  double theta_sleep2 = 0.0;
  Vector z_coef;  // intercept first

  void validate() const;
  Vector to_theta() const;
  static ActivityScoreParams from_theta(const Vector& theta);
};

using ActivityRecord = std::array<double, kComponents>;

/// Throws DomainError for negative activity or sleep outside [0, 24].
void validate_record(const ActivityRecord& x);

/// Value of marginal model k at x.
double marginal(Index k, double x, const ActivityScoreParams& params);

/// Logit of the first-stage model; `z` carries the intercept entry explicitly
/// and has the length of params.z_coef.
double activity_logit(const ActivityRecord& x, const ActivityScoreParams& params,
                      std::span<const double> z);

/// Sorted distinct observed values of each component.
struct ObservedRanges {
  std::array<std::vector<double>, kComponents> values;

  static ObservedRanges from_dataset(const Dataset& data);
  double min(Index k) const { return values[k].front(); }
  double max(Index k) const { return values[k].back(); }
};

struct ScoreScaling {
  std::array<double, kComponents> offset{};   // added to marginal k
  std::array<double, kComponents> maximum{};  // max of the offset marginal
  std::array<double, kComponents> x_min{};
  std::array<double, kComponents> x_max{};
  std::array<double, kComponents> argmin{};
  std::array<double, kComponents> argmax{};
  double total = 0.0;   // T: sum of offset maxima
  double factor = 0.0;  // 100 / T
};

/// Offsets and T from the marginals evaluated over the observed values.
/// Throws DegenerateRange when T is zero.
ScoreScaling build_score_scaling(const ActivityScoreParams& params, const ObservedRanges& ranges);

/// Per-component contributions to the score (each in [0, 100 * maximum_k / T]).
std::array<double, kComponents> score_contributions(const ActivityRecord& x,
                                                    const ActivityScoreParams& params,
                                                    const ScoreScaling& scaling);

/// 0-100 score; covariates take no part.
double score(const ActivityRecord& x, const ActivityScoreParams& params,
             const ScoreScaling& scaling);

/// The record holding each component at its observed optimum.
ActivityRecord optimal_record(const ScoreScaling& scaling);

/// Score as a function of the first-stage parameter vector, with the scaling
/// recomputed from `ranges` at each theta, and its gradient in theta.
struct ScaledScore {
  double value = 0.0;
  Vector gradient;
};
ScaledScore scaled_score(const ActivityRecord& x, const Vector& theta, const ObservedRanges& ranges,
                         bool with_gradient);

/// First-stage logistic score equation with analytic Jacobian. Observation
/// layout: W, Y, 8 components, then `n_covariates` covariates.
EstimatingFunction make_score_model(Index n_covariates);

/// Second-stage logistic risk model pr(Y = 1) = H(beta0 f + beta_int + Z'beta_z)
/// with regressors (f, 1, Z). `response` and `covariates` index the observation.
struct RiskLayout {
  Index response = 1;
  std::vector<Index> covariates;
};
PlugInFunction make_risk_system(ScoreTransform f, Index dim_theta, RiskLayout layout);

/// Full two-stage score-then-risk system on `data` (W, Y, components,
/// covariates). Score scaling is computed over the observed values in `data`.
TwoStageSystem make_activity_system(const Dataset& data, std::vector<std::string> covariate_names);

/// Data-driven starting value: shapes fixed at b = 1 and c at the weighted
/// median of positive values, remaining coefficients from the resulting
/// logistic regression.
Vector warm_start(const Dataset& data, const Vector& weights, Index n_covariates,
                  const SolverConfig& config);

struct ActivitySimSpec {
  ActivityScoreParams truth;
  double beta0 = -0.03;
  Vector beta_rest;  // intercept, sex, age in the risk model

  static ActivitySimSpec defaults();
};

/// Synthetic cohort: W, Y, the 8 components, then covariates sex and age.
Dataset simulate_activity(const ActivitySimSpec& spec, Index n, std::uint64_t seed);

inline const std::vector<std::string>& simulated_covariates() {
  static const std::vector<std::string> names{"sex", "age"};
  return names;
}

struct ShapeReport {
  std::array<bool, kAerobic> aerobic_nondecreasing{};
  std::array<bool, kAerobic> aerobic_concave_checked{};  // only when b <= 1
  std::array<bool, kAerobic> aerobic_concave{};
  bool sitting_decreasing = false;
  bool tv_decreasing = false;
  bool sleep_concave = false;
  std::vector<std::string> warnings;
};

/// Grid checks of each marginal over [0, max observed] (`grid` points).
ShapeReport check_shapes(const ActivityScoreParams& params, const ObservedRanges& ranges,
                         Index grid = 1000);

}  // namespace splitee::activity

#pragma once

// Full-data stacked estimating equations (Psi, K) = 0 and the comparison of
// multi-split estimates against them.

#include "splitee/split_engine.hpp"

namespace splitee {

struct PhiBlocks {
  Matrix phi11;  // n^-1 sum dPsi/dtheta
  Matrix phi12;  // structurally zero: Psi does not involve beta
  Matrix phi21;  // n^-1 sum dK/dtheta
  Matrix phi22;  // n^-1 sum dK/dbeta
};

struct StackedEstimate {
  Vector theta_hat;
  Vector beta_hat;
  ParamEstimate theta_diag;
  ParamEstimate beta_diag;
  PhiBlocks phi;
  Matrix influence_rows;  // n x (p + q)
  Matrix cov;

  Vector estimate() const;
  Vector standard_errors() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }
  std::vector<Interval> intervals(double level) const;
};

/// Solves the full-sample system sequentially (theta, then beta at theta-hat),
/// which is exact because the stacked system is block lower-triangular.
/// Throws InsufficientData unless n > dim theta + dim beta, SingularJacobian,
/// and InvalidArgument when either stage fails to converge.
StackedEstimate fit_stacked(const TwoStageSystem& system, const Dataset& data,
                            const SolverConfig& config = {});

/// Full Newton on the joint (theta, beta) system from `init`; used to confirm
/// the sequential solution.
ParamEstimate fit_stacked_joint(const TwoStageSystem& system, const Dataset& data,
                                const Vector& init, const SolverConfig& config = {});

struct EquivalenceReport {
  double gap_theta = 0.0;
  double gap_beta = 0.0;
  double gap_relative_to_se = 0.0;  // gap_beta / sqrt(trace of stacked beta covariance)
  Index B = 0;
  Index n = 0;
  double pi = 0.0;
};

EquivalenceReport equivalence_gap(const AggregatedEstimate& split, const StackedEstimate& stacked,
                                  double pi);

/// Stacked-vs-stacked comparison (zero gaps); B is reported as 0.
EquivalenceReport equivalence_gap(const StackedEstimate& a, const StackedEstimate& b);

}  // namespace splitee

#include "splitee/stacked.hpp"

#include "influence.hpp"
#include "splitee/errors.hpp"

namespace splitee {

Vector StackedEstimate::estimate() const {
  Vector out(theta_hat.size() + beta_hat.size());
  out << theta_hat, beta_hat;
  return out;
}

std::vector<Interval> StackedEstimate::intervals(double level) const {
  const Vector est = estimate();
  std::vector<Interval> out;
  for (Index j = 0; j < est.size(); ++j) out.push_back(wald_interval(est[j], cov(j, j), level));
  return out;
}

StackedEstimate fit_stacked(const TwoStageSystem& system, const Dataset& data,
                            const SolverConfig& config) {
  const Index n = data.rows();
  if (n <= system.dim_total()) {
    fail(ErrorKind::InsufficientData, "stacked fit needs n > " + std::to_string(system.dim_total()));
  }
  const Vector ones = Vector::Ones(n);

  StackedEstimate out;
  try {
    out.theta_diag =
        solve_weighted(system.stage1, data, ones, system.stage1_start(data, ones, config), config);
  } catch (const Error& e) {
    throw e.with_context(1, std::nullopt);
  }
  if (!out.theta_diag.converged) {
    fail(ErrorKind::InvalidArgument, "stacked stage-1 solve did not converge");
  }
  out.theta_hat = out.theta_diag.value;

  try {
    const Vector start =
        system.beta_init.size() == system.dim_beta() ? system.beta_init : Vector::Zero(system.dim_beta());
    out.beta_diag =
        solve_weighted(freeze_theta(system.stage2, out.theta_hat), data, ones, start, config);
  } catch (const Error& e) {
    throw e.with_context(2, std::nullopt);
  }
  if (!out.beta_diag.converged) {
    fail(ErrorKind::InvalidArgument, "stacked stage-2 solve did not converge");
  }
  out.beta_hat = out.beta_diag.value;

  auto pieces =
      detail::weighted_influence(system, data, ones, ones, out.theta_hat, out.beta_hat, config);
  out.phi.phi11 = std::move(pieces.omega);
  out.phi.phi12 = Matrix::Zero(system.dim_theta(), system.dim_beta());
  out.phi.phi21 = std::move(pieces.delta);
  out.phi.phi22 = std::move(pieces.lambda);
  out.influence_rows = std::move(pieces.rows);
  out.cov = sandwich_covariance(out.influence_rows).cov;
  return out;
}

ParamEstimate fit_stacked_joint(const TwoStageSystem& system, const Dataset& data,
                                const Vector& init, const SolverConfig& config) {
  return solve_weighted(stacked_function(system, config), data, Vector::Ones(data.rows()), init,
                        config);
}

namespace {

double beta_se(const StackedEstimate& stacked) {
  const Index q = stacked.beta_hat.size();
  return std::sqrt(std::max(0.0, stacked.cov.bottomRightCorner(q, q).trace()));
}

}  // namespace

EquivalenceReport equivalence_gap(const AggregatedEstimate& split, const StackedEstimate& stacked,
                                  double pi) {
  if (split.theta_bar.size() != stacked.theta_hat.size() ||
      split.beta_bar.size() != stacked.beta_hat.size()) {
    fail(ErrorKind::InvalidArgument, "split and stacked estimates come from different systems");
  }
  EquivalenceReport out;
  out.gap_theta = (split.theta_bar - stacked.theta_hat).norm();
  out.gap_beta = (split.beta_bar - stacked.beta_hat).norm();
  const double se = beta_se(stacked);
  out.gap_relative_to_se = se > 0.0 ? out.gap_beta / se : (out.gap_beta == 0.0 ? 0.0 : INFINITY);
  out.B = split.B_used;
  out.n = stacked.influence_rows.rows();
  out.pi = pi;
  return out;
}

EquivalenceReport equivalence_gap(const StackedEstimate& a, const StackedEstimate& b) {
  AggregatedEstimate as_split;
  as_split.theta_bar = a.theta_hat;
  as_split.beta_bar = a.beta_hat;
  as_split.B_used = 0;
  return equivalence_gap(as_split, b, 1.0);
}

}  // namespace splitee

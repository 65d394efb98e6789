#include "splitee/split_engine.hpp"

#include "influence.hpp"
#include "splitee/errors.hpp"
#include "splitee/seeding.hpp"

#include <boost/math/distributions/normal.hpp>

#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace splitee {

SplitAssignment SplitAssignment::from_indicators(IndicatorMatrix indicators) {
  if (indicators.size() == 0) fail(ErrorKind::InvalidArgument, "empty split assignment");
  for (Index k = 0; k < indicators.size(); ++k) {
    if (indicators.data()[k] > 1) fail(ErrorKind::InvalidArgument, "split indicators must be 0 or 1");
  }
  SplitAssignment out;
  out.pi = static_cast<double>(indicators.cast<double>().mean());
  out.indicators = std::move(indicators);
  return out;
}

SplitRule default_split_rule(Index dim_theta, Index dim_beta, Index floor) {
  return {std::max(dim_theta, floor), std::max(dim_beta, floor)};
}

bool column_satisfies(const SplitAssignment& splits, Index b, const SplitRule& rule) {
  const Index ones = splits.indicators.col(b).cast<Index>().sum();
  const Index zeros = splits.n() - ones;
  return ones >= rule.min_ones && zeros >= rule.min_zeros;
}

namespace {

void check_split_args(Index n, Index B, double pi) {
  if (n < 2) fail(ErrorKind::InvalidArgument, "need n >= 2");
  if (B < 1) fail(ErrorKind::InvalidArgument, "need B >= 1");
  if (!(pi > 0.0 && pi < 1.0)) fail(ErrorKind::InvalidArgument, "pi must lie in (0, 1)");
}

void draw_column(std::mt19937_64& engine, double pi, IndicatorMatrix& m, Index b) {
  for (Index i = 0; i < m.rows(); ++i) m(i, b) = uniform01(engine) < pi ? 1 : 0;
}

}  // namespace

SplitAssignment generate_splits(Index n, Index B, double pi, std::uint64_t seed) {
  check_split_args(n, B, pi);
  SplitAssignment out;
  out.pi = pi;
  out.seed = seed;
  out.indicators.resize(n, B);
  std::mt19937_64 engine(seed);
  for (Index b = 0; b < B; ++b) draw_column(engine, pi, out.indicators, b);
  return out;
}

SplitAssignment generate_valid_splits(Index n, Index B, double pi, std::uint64_t seed,
                                      const SplitRule& rule, Index max_attempts) {
  check_split_args(n, B, pi);
  if (rule.min_ones + rule.min_zeros > n) {
    fail(ErrorKind::InvalidArgument, "n = " + std::to_string(n) + " cannot hold " +
                                         std::to_string(rule.min_ones) + " ones and " +
                                         std::to_string(rule.min_zeros) + " zeros per split");
  }
  SplitAssignment out;
  out.pi = pi;
  out.seed = seed;
  out.indicators.resize(n, B);
  std::mt19937_64 engine(seed);
  for (Index b = 0; b < B; ++b) {
    draw_column(engine, pi, out.indicators, b);
    Index attempts = 0;
    while (!column_satisfies(out, b, rule)) {
      if (++attempts > max_attempts) {
        fail(ErrorKind::InvalidArgument,
             "could not draw a valid split column in " + std::to_string(max_attempts) + " attempts");
      }
      draw_column(engine, pi, out.indicators, b);
      ++out.regenerated;
    }
  }
  return out;
}

SplitEstimate fit_single_split(const TwoStageSystem& system, const Dataset& data,
                               const Vector& delta, const SolverConfig& config, Index b) {
  if (delta.size() != data.rows()) {
    fail(ErrorKind::InvalidArgument, "split column length differs from row count");
  }
  if (((delta.array() != 0.0) && (delta.array() != 1.0)).any()) {
    fail(ErrorKind::InvalidArgument, "split column entries must be 0 or 1");
  }
  const Vector in_weights = delta;
  const Vector out_weights = Vector::Ones(delta.size()) - delta;

  SplitEstimate est;
  est.b = b;
  try {
    const Vector start = system.stage1_start(data, in_weights, config);
    est.theta_diag = solve_weighted(system.stage1, data, in_weights, start, config);
  } catch (const Error& e) {
    throw e.with_context(1, b);
  }
  est.theta_hat = est.theta_diag.value;
  if (!est.theta_diag.converged) {
    est.failed = true;
    est.failure = "stage-1 did not converge (residual " +
                  std::to_string(est.theta_diag.residual_norm) + ")";
    return est;
  }

  try {
    const EstimatingFunction second = freeze_theta(system.stage2, est.theta_hat);
    const Vector start = system.beta_init.size() == system.dim_beta()
                             ? system.beta_init
                             : Vector::Zero(system.dim_beta());
    est.beta_diag = solve_weighted(second, data, out_weights, start, config);
  } catch (const Error& e) {
    throw e.with_context(2, b);
  }
  est.beta_hat = est.beta_diag.value;
  if (!est.beta_diag.converged) {
    est.failed = true;
    est.failure = "stage-2 did not converge (residual " +
                  std::to_string(est.beta_diag.residual_norm) + ")";
  }
  return est;
}

std::vector<Index> AggregatedEstimate::failed_splits() const {
  std::vector<Index> out;
  for (const auto& s : per_split) {
    if (s.failed) out.push_back(s.b);
  }
  return out;
}

AggregatedEstimate fit_multi_split(const TwoStageSystem& system, const Dataset& data,
                                   const SplitAssignment& splits, const SolverConfig& config,
                                   int threads) {
  if (splits.n() != data.rows()) {
    fail(ErrorKind::InvalidArgument, "split assignment has " + std::to_string(splits.n()) +
                                         " rows, data has " + std::to_string(data.rows()));
  }
  const Index B = splits.B();
  AggregatedEstimate out;
  out.per_split.resize(static_cast<std::size_t>(B));

#ifdef _OPENMP
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#endif
  for (Index b = 0; b < B; ++b) {
    SplitEstimate est;
    try {
      est = fit_single_split(system, data, splits.column(b), config, b);
    } catch (const std::exception& e) {
      est = SplitEstimate{};
      est.b = b;
      est.failed = true;
      est.failure = e.what();
    }
    out.per_split[static_cast<std::size_t>(b)] = std::move(est);
  }
  (void)threads;

  out.theta_bar = Vector::Zero(system.dim_theta());
  out.beta_bar = Vector::Zero(system.dim_beta());
  for (const auto& s : out.per_split) {
    if (s.failed) continue;
    out.theta_bar += s.theta_hat;
    out.beta_bar += s.beta_hat;
    ++out.B_used;
  }
  if (out.B_used == 0) {
    std::string first = out.per_split.empty() ? "" : out.per_split.front().failure;
    fail(ErrorKind::AllSplitsFailed,
         "all " + std::to_string(B) + " splits failed; first failure: " + first);
  }
  out.theta_bar /= static_cast<double>(out.B_used);
  out.beta_bar /= static_cast<double>(out.B_used);
  return out;
}

namespace detail {

namespace {

Eigen::PartialPivLU<Matrix> checked_lu(const Matrix& m, const char* label, double rcond_floor) {
  Eigen::PartialPivLU<Matrix> lu(m);
  if (!(lu.rcond() > rcond_floor)) {
    fail(ErrorKind::SingularJacobian, std::string(label) + " is singular");
  }
  return lu;
}

}  // namespace

InfluencePieces weighted_influence(const TwoStageSystem& system, const Dataset& data,
                                   const Vector& w1, const Vector& w2, const Vector& theta,
                                   const Vector& beta, const SolverConfig& config) {
  const Index n = data.rows();
  const Index p = system.dim_theta();
  const Index q = system.dim_beta();
  const auto& k = system.stage2;

  InfluencePieces out;
  out.omega = average_jacobian(system.stage1, data, w1, theta, config);
  out.lambda = Matrix::Zero(q, q);
  out.delta = Matrix::Zero(q, p);
  Matrix psi = Matrix::Zero(p, n);  // columns are w1_i Psi_i
  Matrix kap = Matrix::Zero(q, n);  // columns are w2_i K_i
  for (Index i = 0; i < n; ++i) {
    const Observation obs = data.row(i);
    if (w1[i] != 0.0) psi.col(i) = w1[i] * system.stage1.evaluate(obs, theta);
    if (w2[i] != 0.0) {
      kap.col(i) = w2[i] * k.evaluate(obs, beta, theta);
      out.lambda.noalias() += w2[i] * plug_in_beta_jacobian(k, obs, beta, theta, config);
      out.delta.noalias() += w2[i] * plug_in_theta_jacobian(k, obs, beta, theta, config);
    }
  }
  out.lambda /= static_cast<double>(n);
  out.delta /= static_cast<double>(n);
  if (!psi.allFinite() || !kap.allFinite() || !out.lambda.allFinite() || !out.delta.allFinite()) {
    fail(ErrorKind::NonFiniteEvaluation, "influence pieces are not finite");
  }

  const auto omega_lu = checked_lu(out.omega, "first-stage average Jacobian", config.singular_rcond);
  const auto lambda_lu =
      checked_lu(out.lambda, "second-stage average Jacobian", config.singular_rcond);
  const Matrix a_theta = -omega_lu.solve(psi);                       // p x n
  const Matrix a_beta = -lambda_lu.solve(kap + out.delta * a_theta);  // q x n

  out.rows.resize(n, p + q);
  out.rows.leftCols(p) = a_theta.transpose();
  out.rows.rightCols(q) = a_beta.transpose();
  return out;
}

}  // namespace detail

Matrix influence_rows_single(const TwoStageSystem& system, const Dataset& data,
                             const Vector& delta, const Vector& theta_hat, const Vector& beta_hat,
                             const SolverConfig& config) {
  const Vector out_weights = Vector::Ones(delta.size()) - delta;
  return detail::weighted_influence(system, data, delta, out_weights, theta_hat, beta_hat, config)
      .rows;
}

Matrix influence_rows_multi(std::span<const Matrix> per_split_rows) {
  if (per_split_rows.empty()) fail(ErrorKind::InvalidArgument, "no influence rows to average");
  InfluenceAccumulator acc(per_split_rows.front().rows(), per_split_rows.front().cols());
  for (const auto& rows : per_split_rows) acc.add(rows);
  return acc.mean();
}

void InfluenceAccumulator::add(const Matrix& rows) {
  if (rows.rows() != sum_.rows() || rows.cols() != sum_.cols()) {
    fail(ErrorKind::InvalidArgument, "influence row shapes differ across splits");
  }
  sum_ += rows;
  ++count_;
}

Matrix InfluenceAccumulator::mean() const {
  if (count_ == 0) fail(ErrorKind::InvalidArgument, "no influence rows accumulated");
  return sum_ / static_cast<double>(count_);
}

SandwichCovariance sandwich_covariance(const Matrix& rows) {
  const Index n = rows.rows();
  if (n < 2) fail(ErrorKind::InsufficientData, "sandwich covariance needs n >= 2");
  const Matrix centered = rows.rowwise() - rows.colwise().mean();
  Matrix cov = (centered.transpose() * centered) / (static_cast<double>(n - 1) * n);
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {std::move(cov), rows, n};
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::InvalidArgument, "quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Interval wald_interval(double estimate, double variance, double level) {
  if (variance < 0.0) fail(ErrorKind::NegativeVariance, "variance " + std::to_string(variance));
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
  const double half = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(variance);
  return {estimate - half, estimate + half};
}

Vector SplitSampleFit::stacked_estimate() const {
  Vector out(estimate.theta_bar.size() + estimate.beta_bar.size());
  out << estimate.theta_bar, estimate.beta_bar;
  return out;
}

std::vector<Interval> SplitSampleFit::intervals(double level) const {
  const Vector est = stacked_estimate();
  std::vector<Interval> out;
  out.reserve(static_cast<std::size_t>(est.size()));
  for (Index j = 0; j < est.size(); ++j) {
    out.push_back(wald_interval(est[j], covariance.cov(j, j), level));
  }
  return out;
}

SplitSampleFit fit_split_sample(const TwoStageSystem& system, const Dataset& data,
                                const SplitAssignment& splits, const SolverConfig& config,
                                int threads) {
  SplitSampleFit out;
  out.estimate = fit_multi_split(system, data, splits, config, threads);
  InfluenceAccumulator acc(data.rows(), system.dim_total());
  for (const auto& s : out.estimate.per_split) {
    if (s.failed) continue;
    acc.add(influence_rows_single(system, data, splits.column(s.b), s.theta_hat, s.beta_hat,
                                  config));
  }
  out.covariance = sandwich_covariance(acc.mean());
  return out;
}

}  // namespace splitee

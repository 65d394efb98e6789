#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "splitee/errors.hpp"
#include "splitee/model_zoo.hpp"
#include "splitee/split_engine.hpp"

using namespace splitee;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Dataset mean_fixture() {
  RowMatrix v(4, 2);
  v << 1, 5, 2, 6, 3, 7, 4, 8;
  return Dataset({"W", "Y"}, v);
}

Vector delta_1100() { return Vector{{1.0, 1.0, 0.0, 0.0}}; }

SplitAssignment assignment(const std::vector<std::vector<int>>& columns) {
  IndicatorMatrix m(static_cast<Index>(columns.front().size()), static_cast<Index>(columns.size()));
  for (std::size_t b = 0; b < columns.size(); ++b) {
    for (std::size_t i = 0; i < columns[b].size(); ++i) {
      m(static_cast<Index>(i), static_cast<Index>(b)) = static_cast<std::uint8_t>(columns[b][i]);
    }
  }
  return SplitAssignment::from_indicators(m);
}

}  // namespace

TEST_CASE("generate_splits examples", "[split-engine]") {
  SECTION("pi near one gives all ones") {
    const auto s = generate_splits(5, 3, 0.999999, 17);
    CHECK(s.indicators.cast<int>().sum() == 15);
  }
  SECTION("binomial concentration") {
    const auto s = generate_splits(10000, 1, 0.5, 42);
    const double mean = s.indicators.cast<double>().mean();
    CHECK(std::abs(mean - 0.5) <= 0.02);
  }
  SECTION("seeded determinism") {
    const auto a = generate_splits(300, 7, 0.4, 99);
    const auto b = generate_splits(300, 7, 0.4, 99);
    CHECK(a.indicators == b.indicators);
    CHECK_FALSE(a.indicators == generate_splits(300, 7, 0.4, 100).indicators);
  }
  SECTION("entries are 0 or 1") {
    const auto s = generate_splits(200, 4, 0.3, 5);
    CHECK((s.indicators.array() <= 1).all());
  }
  SECTION("preconditions") {
    CHECK_THROWS_AS(generate_splits(1, 1, 0.5, 0), Error);
    CHECK_THROWS_AS(generate_splits(10, 0, 0.5, 0), Error);
    CHECK_THROWS_AS(generate_splits(10, 1, 1.0, 0), Error);
    CHECK_THROWS_AS(generate_splits(10, 1, 0.0, 0), Error);
  }
}

TEST_CASE("valid split generation redraws failing columns", "[split-engine]") {
  const SplitRule rule = default_split_rule(3, 1);
  CHECK(rule.min_ones == 5);
  CHECK(rule.min_zeros == 5);
  CHECK(default_split_rule(8, 6).min_ones == 8);
  CHECK(default_split_rule(8, 6).min_zeros == 6);

  // At n = 14 and pi = 0.5 a fair share of raw columns fail the rule.
  const auto s = generate_valid_splits(14, 400, 0.5, 3, rule);
  CHECK(s.regenerated > 0);
  for (Index b = 0; b < s.B(); ++b) CHECK(column_satisfies(s, b, rule));
  CHECK(generate_valid_splits(14, 400, 0.5, 3, rule).indicators == s.indicators);
  CHECK_THROWS_AS(generate_valid_splits(9, 1, 0.5, 3, rule), Error);
}

TEST_CASE("single split of the mean pair", "[split-engine]") {
  const auto est = fit_single_split(make_mean_pair(), mean_fixture(), delta_1100());
  REQUIRE_FALSE(est.failed);
  CHECK_THAT(est.theta_hat[0], WithinAbs(1.5, 1e-14));
  CHECK_THAT(est.beta_hat[0], WithinAbs(6.0, 1e-14));
}

TEST_CASE("single split of the linear pair matches two-stage least squares", "[split-engine]") {
  const Dataset data = simulate_linear({}, 20, 8);
  Vector delta(20);
  for (Index i = 0; i < 20; ++i) delta[i] = i % 2 == 0 ? 1.0 : 0.0;
  const auto est = fit_single_split(make_linear_pair(), data, delta);
  REQUIRE_FALSE(est.failed);
  const Matrix v = data.values();
  const auto ref = oracle::linear_two_stage(v.rightCols(3), v.col(0), v.col(1), delta);
  CHECK((est.theta_hat - ref.theta).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK_THAT(est.beta_hat[0], WithinAbs(ref.beta, 1e-8));
}

TEST_CASE("too few first-stage rows fails at stage 1 with context", "[split-engine]") {
  const Dataset data = simulate_linear({}, 20, 8);
  Vector delta = Vector::Zero(20);
  delta[0] = delta[1] = 1.0;  // dim(theta) - 1 ones
  try {
    fit_single_split(make_linear_pair(), data, delta, {}, 4);
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
    CHECK(e.stage() == 1);
    CHECK(e.split() == 4);
    CHECK(std::string(e.what()).find("stage-1, split 4") != std::string::npos);
  }
}

TEST_CASE("degenerate columns are rejected", "[split-engine][property]") {
  const Dataset data = simulate_linear({}, 30, 2);
  CHECK_THROWS_AS(fit_single_split(make_linear_pair(), data, Vector::Ones(30)), Error);
  CHECK_THROWS_AS(fit_single_split(make_linear_pair(), data, Vector::Zero(30)), Error);
  try {
    fit_single_split(make_linear_pair(), data, Vector::Ones(30));
  } catch (const Error& e) {
    CHECK(e.stage() == 2);
  }
}

TEST_CASE("stage 2 never perturbs theta", "[split-engine][property]") {
  const TwoStageSystem sys = make_linear_pair();
  const Dataset data = simulate_linear({}, 60, 4);
  const Vector delta = generate_splits(60, 1, 0.5, 1).column(0);
  const auto est = fit_single_split(sys, data, delta);
  const auto theta_only =
      solve_weighted(sys.stage1, data, delta, sys.stage1_start(data, delta, {}), {});
  CHECK(est.theta_hat == theta_only.value);
}

TEST_CASE("multi-split aggregation", "[split-engine]") {
  const TwoStageSystem sys = make_linear_pair();
  const Dataset data = simulate_linear({}, 80, 12);

  SECTION("B = 1 equals the single split") {
    const auto splits = generate_valid_splits(80, 1, 0.5, 3, default_split_rule(3, 1));
    const auto agg = fit_multi_split(sys, data, splits);
    const auto one = fit_single_split(sys, data, splits.column(0));
    CHECK(agg.theta_bar == one.theta_hat);
    CHECK(agg.beta_bar == one.beta_hat);
    CHECK(agg.B_used == 1);
  }
  SECTION("duplicate columns") {
    const auto base = generate_valid_splits(80, 1, 0.5, 4, default_split_rule(3, 1));
    IndicatorMatrix twice(80, 2);
    twice.col(0) = base.indicators.col(0);
    twice.col(1) = base.indicators.col(0);
    const auto agg = fit_multi_split(sys, data, SplitAssignment::from_indicators(twice));
    CHECK((agg.theta_bar - agg.per_split[0].theta_hat).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SECTION("bars are arithmetic means") {
    const auto splits = generate_valid_splits(80, 9, 0.5, 5, default_split_rule(3, 1));
    const auto agg = fit_multi_split(sys, data, splits);
    Vector t = Vector::Zero(3);
    Vector b = Vector::Zero(1);
    for (const auto& s : agg.per_split) {
      t += s.theta_hat;
      b += s.beta_hat;
    }
    CHECK((agg.theta_bar - t / 9.0).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((agg.beta_bar - b / 9.0).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("mean pair, B = 25: theta bar near the full-sample mean", "[split-engine]") {
  const Dataset data = simulate_mean({}, 200, 31);
  const auto splits = generate_valid_splits(200, 25, 0.5, 6, default_split_rule(1, 1));
  const auto agg = fit_multi_split(make_mean_pair(), data, splits);
  const double full = data.column("W").mean();
  // A single half-sample mean deviates from the full mean with sd about
  // sigma / sqrt(n); the average of 25 deviates less.
  const double mc_se = 1.0 / std::sqrt(200.0);
  CHECK(std::abs(agg.theta_bar[0] - full) <= 3.0 * mc_se);
}

TEST_CASE("failed splits are excluded and reported", "[split-engine]") {
  const TwoStageSystem sys = make_linear_pair();
  const Dataset data = simulate_linear({}, 40, 1);
  const auto good = generate_valid_splits(40, 2, 0.5, 2, default_split_rule(3, 1));
  IndicatorMatrix m(40, 3);
  m.col(0) = good.indicators.col(0);
  m.col(1).setZero();  // no first-stage rows
  m.col(2) = good.indicators.col(1);
  const auto agg = fit_multi_split(sys, data, SplitAssignment::from_indicators(m));
  CHECK(agg.B_used == 2);
  REQUIRE(agg.failed_splits() == std::vector<Index>{1});
  CHECK(agg.per_split[1].failure.find("InsufficientData") != std::string::npos);

  IndicatorMatrix bad = IndicatorMatrix::Zero(40, 2);
  try {
    fit_multi_split(sys, data, SplitAssignment::from_indicators(bad));
    FAIL("expected AllSplitsFailed");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AllSplitsFailed);
  }
}

TEST_CASE("influence rows of the mean pair by hand", "[split-engine]") {
  const TwoStageSystem sys = make_mean_pair();
  const Matrix rows = influence_rows_single(sys, mean_fixture(), delta_1100(), Vector::Constant(1, 1.5),
                                            Vector::Constant(1, 6.0));
  // Omega = Lambda = Delta = -1/2, so a_theta = 2 delta (W - 1.5) and
  // a_beta = 2 (1 - delta) K - a_theta.
  Matrix expected(4, 2);
  expected << -1.0, 1.0,
      1.0, -1.0,
      0.0, -1.0,
      0.0, 1.0;
  CHECK((rows - expected).cwiseAbs().maxCoeff() <= 1e-14);

  SECTION("theta block averages to zero at the root") {
    CHECK(std::abs(rows.col(0).mean()) <= 1e-14);
  }
}

TEST_CASE("influence rows average across splits", "[split-engine]") {
  const TwoStageSystem sys = make_mean_pair();
  const Dataset data = mean_fixture();
  const Vector d1 = Vector{{1.0, 1.0, 0.0, 0.0}};
  const Vector d2 = Vector{{0.0, 0.0, 1.0, 1.0}};
  const auto e1 = fit_single_split(sys, data, d1);
  const auto e2 = fit_single_split(sys, data, d2);
  const Matrix r1 = influence_rows_single(sys, data, d1, e1.theta_hat, e1.beta_hat);
  const Matrix r2 = influence_rows_single(sys, data, d2, e2.theta_hat, e2.beta_hat);
  const std::vector<Matrix> both{r1, r2};
  const Matrix avg = influence_rows_multi(both);
  CHECK((avg - 0.5 * (r1 + r2)).cwiseAbs().maxCoeff() <= 1e-15);
  const std::vector<Matrix> one{r1};
  CHECK(influence_rows_multi(one) == r1);
}

TEST_CASE("sandwich covariance", "[split-engine]") {
  SECTION("equal rows give zero") {
    const Matrix rows = Matrix::Constant(10, 3, 2.5);
    CHECK(sandwich_covariance(rows).cov.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("mean pair theta variance is the split-mean formula") {
    const TwoStageSystem sys = make_mean_pair();
    const Matrix rows = influence_rows_single(sys, mean_fixture(), delta_1100(),
                                              Vector::Constant(1, 1.5), Vector::Constant(1, 6.0));
    const double expected = oracle::split_mean_variance(Vector{{1, 2, 3, 4}}, delta_1100());
    CHECK_THAT(sandwich_covariance(rows).cov(0, 0), WithinAbs(expected, 1e-14));
  }
  SECTION("duplicating the data halves the covariance") {
    const TwoStageSystem sys = make_linear_pair();
    const Dataset data = simulate_linear({}, 50, 6);
    const Vector delta = generate_valid_splits(50, 1, 0.5, 1, default_split_rule(3, 1)).column(0);
    const auto est = fit_single_split(sys, data, delta);
    const Matrix rows = influence_rows_single(sys, data, delta, est.theta_hat, est.beta_hat);
    const Dataset doubled = data.append_rows(data);
    Vector dd(100);
    dd << delta, delta;
    const auto est2 = fit_single_split(sys, doubled, dd);
    const Matrix rows2 = influence_rows_single(sys, doubled, dd, est2.theta_hat, est2.beta_hat);
    const Matrix c1 = sandwich_covariance(rows).cov;
    const Matrix c2 = sandwich_covariance(rows2).cov;
    // Exact halving needs the n/(n-1) divisor correction: S_2n = S_n (n-1) 2n / (n (2n-1)).
    const double factor = 0.5 * (49.0 * 100.0) / (50.0 * 99.0);
    CHECK((c2 - factor * c1).cwiseAbs().maxCoeff() <= 1e-8 * c1.cwiseAbs().maxCoeff());
    CHECK(std::abs(c2(3, 3) / c1(3, 3) - 0.5) < 0.01);
  }
  SECTION("needs two rows") { CHECK_THROWS_AS(sandwich_covariance(Matrix::Ones(1, 2)), Error); }
}

TEST_CASE("covariance recomputation, symmetry and PSD", "[split-engine][property]") {
  const TwoStageSystem sys = make_logistic_pair();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset data = simulate_logistic({}, 400, seed);
    const auto splits = generate_valid_splits(400, 10, 0.5, seed, default_split_rule(3, 1));
    const SplitSampleFit fit = fit_split_sample(sys, data, splits);
    const Matrix& rows = fit.covariance.influence_rows;
    const Matrix centered = rows.rowwise() - rows.colwise().mean();
    const Matrix recomputed = (centered.transpose() * centered) / (399.0 * 400.0);
    CHECK((fit.covariance.cov - recomputed).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((fit.covariance.cov - fit.covariance.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(fit.covariance.cov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("wald intervals", "[split-engine]") {
  const Interval a = wald_interval(0.0, 1.0, 0.95);
  CHECK_THAT(a.upper, WithinAbs(1.959963984540054, 1e-12));
  CHECK_THAT(a.lower, WithinAbs(-1.959963984540054, 1e-12));
  const Interval b = wald_interval(2.0, 4.0, 0.5);
  CHECK_THAT(b.upper - 2.0, WithinAbs(0.6744897501960817 * 2.0, 1e-10));
  // Shape check: sd 0.0074 around -0.026 spans roughly (-0.041, -0.012).
  const Interval c = wald_interval(-0.026, 0.0074 * 0.0074, 0.95);
  CHECK_THAT(c.lower, WithinAbs(-0.041, 0.0006));
  CHECK_THAT(c.upper, WithinAbs(-0.012, 0.0006));
  CHECK_THAT(normal_quantile(0.975), WithinAbs(1.959963984540054, 1e-12));
  try {
    wald_interval(0.0, -1e-3, 0.95);
    FAIL("expected NegativeVariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NegativeVariance);
  }
  CHECK_THROWS_AS(wald_interval(0.0, 1.0, 1.0), Error);
}

TEST_CASE("results are bit-identical across runs and thread counts", "[split-engine][property]") {
  const TwoStageSystem sys = make_logistic_pair();
  const Dataset data = simulate_logistic({}, 300, 9);
  const auto splits = generate_valid_splits(300, 16, 0.5, 77, default_split_rule(3, 1));
  const SplitSampleFit a = fit_split_sample(sys, data, splits, {}, 1);
  const SplitSampleFit b = fit_split_sample(sys, data, splits, {}, 4);
  const SplitSampleFit c = fit_split_sample(sys, data, splits, {}, 1);
  CHECK(a.estimate.theta_bar == b.estimate.theta_bar);
  CHECK(a.estimate.beta_bar == b.estimate.beta_bar);
  CHECK(a.covariance.cov == b.covariance.cov);
  CHECK(a.covariance.cov == c.covariance.cov);
}

TEST_CASE("mean pair, B = 25: sandwich variance tracks the Monte Carlo variance", "[split-engine][mc]") {
  const TwoStageSystem sys = make_mean_pair();
  constexpr int reps = 2000;
  constexpr Index n = 200;
  Vector beta(reps);
  double sandwich = 0.0;
  for (int r = 0; r < reps; ++r) {
    const Dataset data = simulate_mean({}, n, 5000 + r);
    const auto splits = generate_valid_splits(n, 25, 0.5, 9000 + r, default_split_rule(1, 1));
    const SplitSampleFit fit = fit_split_sample(sys, data, splits);
    beta[r] = fit.estimate.beta_bar[0];
    sandwich += fit.covariance.cov(1, 1);
  }
  sandwich /= reps;
  const double empirical = oracle::sample_variance(beta);
  CHECK(std::abs(sandwich / empirical - 1.0) <= 0.25);
}

TEST_CASE("influence accumulator", "[split-engine]") {
  InfluenceAccumulator acc(3, 2);
  acc.add(Matrix::Constant(3, 2, 1.0));
  acc.add(Matrix::Constant(3, 2, 3.0));
  CHECK(acc.count() == 2);
  CHECK(acc.mean() == Matrix::Constant(3, 2, 2.0));
  CHECK_THROWS_AS(acc.add(Matrix::Zero(2, 2)), Error);
}

TEST_CASE("user-supplied assignments are checked", "[split-engine]") {
  IndicatorMatrix m(3, 1);
  m << 0, 1, 2;
  CHECK_THROWS_AS(SplitAssignment::from_indicators(m), Error);
  const auto s = assignment({{1, 0, 1, 0}});
  CHECK(s.pi == 0.5);
  CHECK(s.column(0) == Vector{{1.0, 0.0, 1.0, 0.0}});
}

#include "splitee/model_zoo.hpp"

#include "splitee/errors.hpp"
#include "splitee/seeding.hpp"

#include <random>

namespace splitee {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double logistic_derivative(double t) { return logistic(t) * logistic(-t); }

void LinearPairSpec::validate() const {
  if (!(noise_sd > 0.0)) fail(ErrorKind::InvalidArgument, "noise_sd must be positive");
  if (theta.size() < 1 || !theta.allFinite() || !std::isfinite(beta0)) {
    fail(ErrorKind::InvalidArgument, "linear pair parameters must be finite");
  }
}

void LogisticPairSpec::validate() const {
  if (theta.size() < 1 || !theta.allFinite() || !std::isfinite(beta0) || !std::isfinite(a) ||
      !std::isfinite(c)) {
    fail(ErrorKind::InvalidArgument, "logistic pair parameters must be finite");
  }
}

std::vector<std::string> covariate_columns(Index p) {
  std::vector<std::string> out;
  for (Index j = 1; j <= p; ++j) out.push_back("x" + std::to_string(j));
  return out;
}

namespace {

constexpr Index kW = 0;
constexpr Index kY = 1;
constexpr Index kX = 2;

Eigen::Map<const Vector> covariates(Observation obs, Index p) {
  return Eigen::Map<const Vector>(obs.data() + kX, p);
}

std::vector<std::string> layout(Index p) {
  std::vector<std::string> cols{"W", "Y"};
  for (auto& c : covariate_columns(p)) cols.push_back(c);
  return cols;
}

std::vector<std::string> theta_labels(Index p) {
  std::vector<std::string> out;
  for (Index j = 1; j <= p; ++j) out.push_back("theta" + std::to_string(j));
  return out;
}

}  // namespace

TwoStageSystem make_mean_pair() {
  TwoStageSystem s;
  s.name = "mean";
  s.columns = {"W", "Y"};
  s.theta_names = {"theta"};
  s.beta_names = {"beta"};

  s.stage1.dim_param = 1;
  s.stage1.dim_out = 1;
  s.stage1.evaluate = [](Observation obs, const Vector& theta) {
    return Vector::Constant(1, obs[kW] - theta[0]);
  };
  s.stage1.jacobian = [](Observation, const Vector&) { return Matrix::Constant(1, 1, -1.0); };

  s.stage2.dim_beta = 1;
  s.stage2.dim_theta = 1;
  s.stage2.evaluate = [](Observation obs, const Vector& beta, const Vector& theta) {
    return Vector::Constant(1, obs[kY] - beta[0] - theta[0]);
  };
  s.stage2.jacobian_beta = [](Observation, const Vector&, const Vector&) {
    return Matrix::Constant(1, 1, -1.0);
  };
  s.stage2.jacobian_theta = [](Observation, const Vector&, const Vector&) {
    return Matrix::Constant(1, 1, -1.0);
  };
  return s;
}

TwoStageSystem make_linear_pair(const LinearPairSpec& spec) {
  spec.validate();
  const Index p = spec.theta.size();
  TwoStageSystem s;
  s.name = "linear";
  s.columns = layout(p);
  s.theta_names = theta_labels(p);
  s.beta_names = {"beta0"};

  s.stage1.dim_param = p;
  s.stage1.dim_out = p;
  s.stage1.evaluate = [p](Observation obs, const Vector& theta) -> Vector {
    const auto x = covariates(obs, p);
    return x * (obs[kW] - x.dot(theta));
  };
  s.stage1.jacobian = [p](Observation obs, const Vector&) -> Matrix {
    const auto x = covariates(obs, p);
    return -x * x.transpose();
  };

  auto& k = s.stage2;
  k.dim_beta = 1;
  k.dim_theta = p;
  k.transform = ScoreTransform{
      [p](Observation obs, const Vector& theta) { return covariates(obs, p).dot(theta); },
      [p](Observation obs, const Vector&) -> Vector { return covariates(obs, p); }};
  k.evaluate = [p](Observation obs, const Vector& beta, const Vector& theta) {
    const double f = covariates(obs, p).dot(theta);
    return Vector::Constant(1, f * (obs[kY] - beta[0] * f));
  };
  k.jacobian_beta = [p](Observation obs, const Vector&, const Vector& theta) {
    const double f = covariates(obs, p).dot(theta);
    return Matrix::Constant(1, 1, -f * f);
  };
  k.derivative_f = [p](Observation obs, const Vector& beta, const Vector& theta) {
    const double f = covariates(obs, p).dot(theta);
    return Vector::Constant(1, obs[kY] - 2.0 * beta[0] * f);
  };
  return s;
}

TwoStageSystem make_logistic_pair(const LogisticPairSpec& spec) {
  spec.validate();
  const Index p = spec.theta.size();
  const double a = spec.a;
  const double c = spec.c;
  TwoStageSystem s;
  s.name = "logistic";
  s.columns = layout(p);
  s.theta_names = theta_labels(p);
  s.beta_names = {"beta0"};

  s.stage1.dim_param = p;
  s.stage1.dim_out = p;
  s.stage1.evaluate = [p](Observation obs, const Vector& theta) -> Vector {
    const auto x = covariates(obs, p);
    return x * (obs[kW] - logistic(x.dot(theta)));
  };
  s.stage1.jacobian = [p](Observation obs, const Vector& theta) -> Matrix {
    const auto x = covariates(obs, p);
    return -logistic_derivative(x.dot(theta)) * (x * x.transpose());
  };

  auto transform = [p, a, c](Observation obs, const Vector& theta) {
    const double u = covariates(obs, p).dot(theta);
    return a + c * u * u;
  };
  auto& k = s.stage2;
  k.dim_beta = 1;
  k.dim_theta = p;
  k.transform = ScoreTransform{
      transform, [p, c](Observation obs, const Vector& theta) -> Vector {
        const auto x = covariates(obs, p);
        return 2.0 * c * x.dot(theta) * x;
      }};
  k.evaluate = [transform](Observation obs, const Vector& beta, const Vector& theta) {
    const double f = transform(obs, theta);
    return Vector::Constant(1, f * (obs[kY] - logistic(beta[0] * f)));
  };
  k.jacobian_beta = [transform](Observation obs, const Vector& beta, const Vector& theta) {
    const double f = transform(obs, theta);
    return Matrix::Constant(1, 1, -f * f * logistic_derivative(beta[0] * f));
  };
  k.derivative_f = [transform](Observation obs, const Vector& beta, const Vector& theta) {
    const double f = transform(obs, theta);
    const double eta = beta[0] * f;
    return Vector::Constant(1, (obs[kY] - logistic(eta)) - f * beta[0] * logistic_derivative(eta));
  };
  return s;
}

Dataset simulate_mean(const MeanPairSpec& spec, Index n, std::uint64_t seed) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "need n >= 1");
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  RowMatrix values(n, 2);
  for (Index i = 0; i < n; ++i) {
    values(i, 0) = spec.theta + spec.sd_w * normal(engine);
    values(i, 1) = spec.theta + spec.beta + spec.sd_y * normal(engine);
  }
  return Dataset({"W", "Y"}, std::move(values));
}

Dataset simulate_linear(const LinearPairSpec& spec, Index n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) fail(ErrorKind::InvalidArgument, "need n >= 1");
  const Index p = spec.theta.size();
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  RowMatrix values(n, 2 + p);
  for (Index i = 0; i < n; ++i) {
    double lin = 0.0;
    for (Index j = 0; j < p; ++j) {
      values(i, kX + j) = normal(engine);
      lin += values(i, kX + j) * spec.theta[j];
    }
    values(i, kW) = lin + spec.noise_sd * normal(engine);
    values(i, kY) = spec.beta0 * lin + spec.noise_sd * normal(engine);
  }
  return Dataset(layout(p), std::move(values));
}

Dataset simulate_logistic(const LogisticPairSpec& spec, Index n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) fail(ErrorKind::InvalidArgument, "need n >= 1");
  const Index p = spec.theta.size();
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  RowMatrix values(n, 2 + p);
  for (Index i = 0; i < n; ++i) {
    double lin = 0.0;
    for (Index j = 0; j < p; ++j) {
      values(i, kX + j) = normal(engine);
      lin += values(i, kX + j) * spec.theta[j];
    }
    const double f = spec.a + spec.c * lin * lin;
    values(i, kW) = uniform01(engine) < logistic(lin) ? 1.0 : 0.0;
    values(i, kY) = uniform01(engine) < logistic(spec.beta0 * f) ? 1.0 : 0.0;
  }
  return Dataset(layout(p), std::move(values));
}

}  // namespace splitee

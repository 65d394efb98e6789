#include "splitee/activity.hpp"

#include "splitee/errors.hpp"
#include "splitee/model_zoo.hpp"
#include "splitee/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace splitee::activity {

namespace {

constexpr Index kW = 0;
constexpr Index kY = 1;
constexpr Index kFirstComponent = 2;
constexpr Index kFirstCovariate = kFirstComponent + kComponents;

constexpr Index kThetaSit = 3 * kAerobic;
constexpr Index kThetaTv = kThetaSit + 1;
constexpr Index kThetaSleep1 = kThetaSit + 2;
constexpr Index kThetaSleep2 = kThetaSit + 3;
constexpr Index kThetaIntercept = kShapeParams;

// d H(t) with t = b (log x - log c), and its derivatives in (d, log b, log c).
struct AerobicTerms {
  double value = 0.0;
  std::array<double, 3> grad{};
  std::array<std::array<double, 3>, 3> hess{};
};

AerobicTerms aerobic_terms(double x, double d, double b, double log_c, bool hessian) {
  AerobicTerms out;
  if (x <= 0.0) return out;
  const double t = b * (std::log(x) - log_c);
  const double h = logistic(t);
  const double h1 = logistic_derivative(t);
  out.value = d * h;
  out.grad = {h, d * h1 * t, -d * b * h1};
  if (hessian) {
    const double h2 = h1 * (1.0 - 2.0 * h);
    out.hess[0] = {0.0, h1 * t, -b * h1};
    out.hess[1] = {h1 * t, d * (h2 * t * t + h1 * t), -d * b * (h2 * t + h1)};
    out.hess[2] = {-b * h1, -d * b * (h2 * t + h1), d * b * b * h2};
  }
  return out;
}

// Marginal k evaluated from the parameter vector.
double component_value(Index k, double x, const Vector& theta) {
  if (k < kAerobic) {
    return aerobic_terms(x, theta[3 * k], std::exp(theta[3 * k + 1]), theta[3 * k + 2], false).value;
  }
  if (k == kSitting) return theta[kThetaSit] * x;
  if (k == kTv) return theta[kThetaTv] * x;
  return theta[kThetaSleep1] * x + theta[kThetaSleep2] * x * x;
}

void add_component_gradient(Index k, double x, const Vector& theta, double scale, Vector& grad) {
  if (k < kAerobic) {
    const auto terms =
        aerobic_terms(x, theta[3 * k], std::exp(theta[3 * k + 1]), theta[3 * k + 2], false);
    for (Index m = 0; m < 3; ++m) grad[3 * k + m] += scale * terms.grad[static_cast<std::size_t>(m)];
  } else if (k == kSitting) {
    grad[kThetaSit] += scale * x;
  } else if (k == kTv) {
    grad[kThetaTv] += scale * x;
  } else {
    grad[kThetaSleep1] += scale * x;
    grad[kThetaSleep2] += scale * x * x;
  }
}

struct Anchors {
  double lo = 0.0;
  double hi = 0.0;
  double lo_value = 0.0;
  double hi_value = 0.0;
};

// Minimum and maximum of marginal k over the observed values. Aerobic and
// linear marginals are monotone, so the extremes sit at the ends of the
// observed range; the quadratic can also peak at the observed values that
// bracket its vertex.
Anchors find_anchors(Index k, const Vector& theta, const ObservedRanges& ranges) {
  const auto& vals = ranges.values[static_cast<std::size_t>(k)];
  std::array<double, 4> candidates{vals.front(), vals.back(), vals.front(), vals.front()};
  std::size_t count = 2;
  if (k == kSleep && theta[kThetaSleep2] != 0.0) {
    const double vertex = -theta[kThetaSleep1] / (2.0 * theta[kThetaSleep2]);
    auto it = std::lower_bound(vals.begin(), vals.end(), vertex);
    if (it != vals.end()) candidates[count++] = *it;
    if (it != vals.begin()) candidates[count++] = *std::prev(it);
  }
  Anchors a;
  a.lo = a.hi = candidates[0];
  a.lo_value = a.hi_value = component_value(k, candidates[0], theta);
  for (std::size_t m = 1; m < count; ++m) {
    const double v = component_value(k, candidates[m], theta);
    if (v < a.lo_value) {
      a.lo_value = v;
      a.lo = candidates[m];
    }
    if (v > a.hi_value) {
      a.hi_value = v;
      a.hi = candidates[m];
    }
  }
  return a;
}

ActivityRecord record_from(Observation obs) {
  ActivityRecord x;
  for (Index k = 0; k < kComponents; ++k) x[static_cast<std::size_t>(k)] = obs[kFirstComponent + k];
  return x;
}

// Gradient of the first-stage logit, and optionally its Hessian (nonzero only
// in the aerobic 3x3 blocks).
double logit_with_derivatives(Observation obs, const Vector& theta, Index n_cov, Vector& grad,
                              Matrix* hess) {
  const Index p = kShapeParams + 1 + n_cov;
  grad.setZero(p);
  if (hess) hess->setZero(p, p);
  double eta = 0.0;
  for (Index j = 0; j < kAerobic; ++j) {
    const auto terms = aerobic_terms(obs[kFirstComponent + j], theta[3 * j],
                                     std::exp(theta[3 * j + 1]), theta[3 * j + 2], hess != nullptr);
    eta += terms.value;
    for (Index m = 0; m < 3; ++m) {
      grad[3 * j + m] = terms.grad[static_cast<std::size_t>(m)];
      if (hess) {
        for (Index l = 0; l < 3; ++l) {
          (*hess)(3 * j + m, 3 * j + l) =
              terms.hess[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)];
        }
      }
    }
  }
  const double sit = obs[kFirstComponent + kSitting];
  const double tv = obs[kFirstComponent + kTv];
  const double sleep = obs[kFirstComponent + kSleep];
  grad[kThetaSit] = sit;
  grad[kThetaTv] = tv;
  grad[kThetaSleep1] = sleep;
  grad[kThetaSleep2] = sleep * sleep;
  grad[kThetaIntercept] = 1.0;
  for (Index j = 0; j < n_cov; ++j) grad[kThetaIntercept + 1 + j] = obs[kFirstCovariate + j];
  for (Index m = kThetaSit; m < p; ++m) eta += theta[m] * grad[m];
  return eta;
}

double log_likelihood(const Dataset& data, const Vector& weights, const Vector& theta,
                      Index n_cov) {
  double total = 0.0;
  Vector grad;
  for (Index i = 0; i < data.rows(); ++i) {
    if (weights[i] == 0.0) continue;
    const Observation obs = data.row(i);
    const double eta = logit_with_derivatives(obs, theta, n_cov, grad, nullptr);
    // log(1 + e^eta) without overflow
    const double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    total += weights[i] * (obs[kW] * eta - softplus);
  }
  return total / static_cast<double>(data.rows());
}

// Modified Newton ascent on the weighted log-likelihood: the Hessian is
// shifted until negative definite and steps are backtracked to an Armijo
// increase. Stops once the score is small; the caller's root solve finishes.
Vector ascend_likelihood(const Dataset& data, const Vector& weights, Vector theta, Index n_cov,
                         const SolverConfig& config) {
  const EstimatingFunction fn = make_score_model(n_cov);
  constexpr int kMaxSteps = 500;
  constexpr double kScoreTolerance = 1e-7;
  double value = log_likelihood(data, weights, theta, n_cov);
  if (!std::isfinite(value)) return theta;
  for (int it = 0; it < kMaxSteps; ++it) {
    const Vector g = weighted_mean_score(fn, data, weights, theta);
    if (!g.allFinite() || g.lpNorm<Eigen::Infinity>() <= kScoreTolerance) break;
    const Matrix neg_hess = -average_jacobian(fn, data, weights, theta, config);
    const double scale = std::max(1e-12, neg_hess.diagonal().cwiseAbs().maxCoeff());
    double shift = 0.0;
    Vector step;
    for (int k = 0; k < 60; ++k) {
      Matrix m = neg_hess;
      m.diagonal().array() += shift;
      Eigen::LLT<Matrix> llt(m);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(g);
        if (step.allFinite()) break;
      }
      shift = shift == 0.0 ? 1e-8 * scale : 4.0 * shift;
      step.resize(0);
    }
    if (step.size() == 0) break;
    const double slope = g.dot(step);
    double alpha = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h, alpha *= 0.5) {
      const Vector trial = theta + alpha * step;
      const double v = log_likelihood(data, weights, trial, n_cov);
      if (std::isfinite(v) && v >= value + 1e-4 * alpha * slope) {
        // a step that leaves the likelihood unchanged is rounding noise
        moved = v - value > 1e-15 * std::abs(value);
        theta = trial;
        value = v;
        break;
      }
    }
    if (!moved) break;
  }
  return theta;
}

}  // namespace

const std::array<std::string, kComponents>& component_names() {
  static const std::array<std::string, kComponents> names{
      "vigorous",         "moderate",      "light_household", "mvpa_household",
      "weight_training",  "sitting_other", "tv",              "sleep"};
  return names;
}

void ActivityScoreParams::validate() const {
  for (Index j = 0; j < kAerobic; ++j) {
    const auto u = static_cast<std::size_t>(j);
    if (!(b[u] > 0.0) || !(c[u] > 0.0) || !std::isfinite(b[u]) || !std::isfinite(c[u]) ||
        !std::isfinite(d[u])) {
      fail(ErrorKind::InvalidArgument, "aerobic marginal " + component_names()[u] +
                                           " needs finite d and positive b, c");
    }
  }
  if (z_coef.size() < 1) fail(ErrorKind::InvalidArgument, "z_coef must hold at least the intercept");
}

Vector ActivityScoreParams::to_theta() const {
  Vector theta(kShapeParams + z_coef.size());
  for (Index j = 0; j < kAerobic; ++j) {
    const auto u = static_cast<std::size_t>(j);
    theta[3 * j] = d[u];
    theta[3 * j + 1] = std::log(b[u]);
    theta[3 * j + 2] = std::log(c[u]);
  }
  theta[kThetaSit] = theta_sit;
  theta[kThetaTv] = theta_tv;
  theta[kThetaSleep1] = theta_sleep1;
  theta[kThetaSleep2] = theta_sleep2;
  theta.tail(z_coef.size()) = z_coef;
  return theta;
}

ActivityScoreParams ActivityScoreParams::from_theta(const Vector& theta) {
  if (theta.size() <= kShapeParams) {
    fail(ErrorKind::InvalidArgument, "activity parameter vector too short");
  }
  ActivityScoreParams p;
  for (Index j = 0; j < kAerobic; ++j) {
    const auto u = static_cast<std::size_t>(j);
    p.d[u] = theta[3 * j];
    p.b[u] = std::exp(theta[3 * j + 1]);
    p.c[u] = std::exp(theta[3 * j + 2]);
  }
  p.theta_sit = theta[kThetaSit];
  p.theta_tv = theta[kThetaTv];
  p.theta_sleep1 = theta[kThetaSleep1];
  p.theta_sleep2 = theta[kThetaSleep2];
  p.z_coef = theta.tail(theta.size() - kShapeParams);
  return p;
}

void validate_record(const ActivityRecord& x) {
  for (Index k = 0; k < kComponents; ++k) {
    const double v = x[static_cast<std::size_t>(k)];
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorKind::DomainError, component_names()[static_cast<std::size_t>(k)] +
                                       " must be finite and nonnegative, got " + std::to_string(v));
    }
  }
  if (x[kSleep] > 24.0) {
    fail(ErrorKind::DomainError, "sleep must lie in [0, 24] hours, got " + std::to_string(x[kSleep]));
  }
}

double marginal(Index k, double x, const ActivityScoreParams& params) {
  if (k < 0 || k >= kComponents) fail(ErrorKind::InvalidArgument, "component index out of range");
  if (k < kAerobic) {
    const auto u = static_cast<std::size_t>(k);
    return aerobic_terms(x, params.d[u], params.b[u], std::log(params.c[u]), false).value;
  }
  if (k == kSitting) return params.theta_sit * x;
  if (k == kTv) return params.theta_tv * x;
  return params.theta_sleep1 * x + params.theta_sleep2 * x * x;
}

double activity_logit(const ActivityRecord& x, const ActivityScoreParams& params,
                      std::span<const double> z) {
  validate_record(x);
  if (static_cast<Index>(z.size()) != params.z_coef.size()) {
    fail(ErrorKind::InvalidArgument, "covariate vector length differs from z_coef");
  }
  double eta = 0.0;
  for (Index k = 0; k < kComponents; ++k) eta += marginal(k, x[static_cast<std::size_t>(k)], params);
  for (Index j = 0; j < params.z_coef.size(); ++j) eta += params.z_coef[j] * z[static_cast<std::size_t>(j)];
  return eta;
}

ObservedRanges ObservedRanges::from_dataset(const Dataset& data) {
  if (data.rows() == 0) fail(ErrorKind::InvalidArgument, "empty dataset");
  ObservedRanges out;
  for (Index k = 0; k < kComponents; ++k) {
    const Vector col = data.column(component_names()[static_cast<std::size_t>(k)]);
    auto& vals = out.values[static_cast<std::size_t>(k)];
    vals.assign(col.data(), col.data() + col.size());
    for (double v : vals) {
      if (!std::isfinite(v) || v < 0.0) {
        fail(ErrorKind::DomainError, component_names()[static_cast<std::size_t>(k)] +
                                         " must be finite and nonnegative");
      }
    }
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  }
  if (out.max(kSleep) > 24.0) fail(ErrorKind::DomainError, "sleep must lie in [0, 24] hours");
  return out;
}

ScoreScaling build_score_scaling(const ActivityScoreParams& params, const ObservedRanges& ranges) {
  params.validate();
  const Vector theta = params.to_theta();
  ScoreScaling s;
  for (Index k = 0; k < kComponents; ++k) {
    const auto u = static_cast<std::size_t>(k);
    const Anchors a = find_anchors(k, theta, ranges);
    s.offset[u] = -a.lo_value;
    s.maximum[u] = a.hi_value - a.lo_value;
    s.argmin[u] = a.lo;
    s.argmax[u] = a.hi;
    s.x_min[u] = ranges.min(k);
    s.x_max[u] = ranges.max(k);
    s.total += s.maximum[u];
  }
  if (!(s.total > 0.0)) {
    fail(ErrorKind::DegenerateRange, "every marginal is constant over the observed data");
  }
  s.factor = 100.0 / s.total;
  return s;
}

std::array<double, kComponents> score_contributions(const ActivityRecord& x,
                                                    const ActivityScoreParams& params,
                                                    const ScoreScaling& scaling) {
  validate_record(x);
  std::array<double, kComponents> out{};
  for (Index k = 0; k < kComponents; ++k) {
    const auto u = static_cast<std::size_t>(k);
    const double xk = std::clamp(x[u], scaling.x_min[u], scaling.x_max[u]);
    const double v = std::clamp(marginal(k, xk, params) + scaling.offset[u], 0.0, scaling.maximum[u]);
    out[u] = v * scaling.factor;
  }
  return out;
}

double score(const ActivityRecord& x, const ActivityScoreParams& params,
             const ScoreScaling& scaling) {
  const auto parts = score_contributions(x, params, scaling);
  double total = 0.0;
  for (double v : parts) total += v;
  return std::clamp(total, 0.0, 100.0);
}

ActivityRecord optimal_record(const ScoreScaling& scaling) { return scaling.argmax; }

ScaledScore scaled_score(const ActivityRecord& x, const Vector& theta, const ObservedRanges& ranges,
                         bool with_gradient) {
  double numerator = 0.0;
  double total = 0.0;
  Vector g_num;
  Vector g_total;
  if (with_gradient) {
    g_num.setZero(theta.size());
    g_total.setZero(theta.size());
  }
  for (Index k = 0; k < kComponents; ++k) {
    const auto u = static_cast<std::size_t>(k);
    const Anchors a = find_anchors(k, theta, ranges);
    const double xk = std::clamp(x[u], ranges.min(k), ranges.max(k));
    double point = xk;
    double value = component_value(k, xk, theta);
    if (value < a.lo_value) {
      point = a.lo;
      value = a.lo_value;
    } else if (value > a.hi_value) {
      point = a.hi;
      value = a.hi_value;
    }
    numerator += value - a.lo_value;
    total += a.hi_value - a.lo_value;
    if (with_gradient) {
      add_component_gradient(k, point, theta, 1.0, g_num);
      add_component_gradient(k, a.lo, theta, -1.0, g_num);
      add_component_gradient(k, a.hi, theta, 1.0, g_total);
      add_component_gradient(k, a.lo, theta, -1.0, g_total);
    }
  }
  if (!(total > 0.0)) {
    fail(ErrorKind::DegenerateRange, "every marginal is constant over the observed data");
  }
  ScaledScore out;
  out.value = 100.0 * numerator / total;
  if (with_gradient) out.gradient = 100.0 * (g_num * total - numerator * g_total) / (total * total);
  return out;
}

EstimatingFunction make_score_model(Index n_covariates) {
  const Index p = kShapeParams + 1 + n_covariates;
  EstimatingFunction fn;
  fn.dim_param = p;
  fn.dim_out = p;
  fn.evaluate = [n_covariates](Observation obs, const Vector& theta) -> Vector {
    Vector grad;
    const double eta = logit_with_derivatives(obs, theta, n_covariates, grad, nullptr);
    return grad * (obs[kW] - logistic(eta));
  };
  fn.jacobian = [n_covariates](Observation obs, const Vector& theta) -> Matrix {
    Vector grad;
    Matrix hess;
    const double eta = logit_with_derivatives(obs, theta, n_covariates, grad, &hess);
    Matrix jac = -logistic_derivative(eta) * (grad * grad.transpose());
    jac += (obs[kW] - logistic(eta)) * hess;
    return jac;
  };
  return fn;
}

PlugInFunction make_risk_system(ScoreTransform f, Index dim_theta, RiskLayout layout) {
  const Index q = 2 + static_cast<Index>(layout.covariates.size());
  auto regressors = [f, layout, q](Observation obs, const Vector& theta) {
    Vector e(q);
    e[0] = f.value(obs, theta);
    e[1] = 1.0;
    for (std::size_t j = 0; j < layout.covariates.size(); ++j) {
      e[static_cast<Index>(j) + 2] = obs[layout.covariates[j]];
    }
    return e;
  };
  const Index response = layout.response;

  PlugInFunction k;
  k.dim_beta = q;
  k.dim_theta = dim_theta;
  k.transform = f;
  k.evaluate = [regressors, response](Observation obs, const Vector& beta, const Vector& theta) {
    const Vector e = regressors(obs, theta);
    return Vector(e * (obs[response] - logistic(e.dot(beta))));
  };
  k.jacobian_beta = [regressors](Observation obs, const Vector& beta, const Vector& theta) {
    const Vector e = regressors(obs, theta);
    return Matrix(-logistic_derivative(e.dot(beta)) * (e * e.transpose()));
  };
  k.derivative_f = [regressors, response](Observation obs, const Vector& beta, const Vector& theta) {
    const Vector e = regressors(obs, theta);
    const double eta = e.dot(beta);
    Vector out = -beta[0] * logistic_derivative(eta) * e;
    out[0] += obs[response] - logistic(eta);
    return out;
  };
  return k;
}

Vector warm_start(const Dataset& data, const Vector& weights, Index n_covariates,
                  const SolverConfig& config) {
  const Index n = data.rows();
  std::array<double, kAerobic> log_c{};
  for (Index j = 0; j < kAerobic; ++j) {
    std::vector<double> positive;
    for (Index i = 0; i < n; ++i) {
      const double x = data.row(i)[kFirstComponent + j];
      if (weights[i] > 0.0 && x > 0.0) positive.push_back(x);
    }
    double c = 1.0;
    if (!positive.empty()) {
      auto mid = positive.begin() + static_cast<std::ptrdiff_t>(positive.size() / 2);
      std::nth_element(positive.begin(), mid, positive.end());
      c = *mid;
    }
    log_c[static_cast<std::size_t>(j)] = std::log(c);
  }

  // Logistic regression of W on the shape-fixed features.
  const Index m = kAerobic + 4 + 1 + n_covariates;
  RowMatrix features(n, 1 + m);
  for (Index i = 0; i < n; ++i) {
    const Observation obs = data.row(i);
    features(i, 0) = obs[kW];
    for (Index j = 0; j < kAerobic; ++j) {
      features(i, 1 + j) =
          aerobic_terms(obs[kFirstComponent + j], 1.0, 1.0, log_c[static_cast<std::size_t>(j)], false)
              .value;
    }
    const double sleep = obs[kFirstComponent + kSleep];
    features(i, 1 + kAerobic) = obs[kFirstComponent + kSitting];
    features(i, 2 + kAerobic) = obs[kFirstComponent + kTv];
    features(i, 3 + kAerobic) = sleep;
    features(i, 4 + kAerobic) = sleep * sleep;
    features(i, 5 + kAerobic) = 1.0;
    for (Index j = 0; j < n_covariates; ++j) features(i, 6 + kAerobic + j) = obs[kFirstCovariate + j];
  }
  std::vector<std::string> names(static_cast<std::size_t>(1 + m));
  for (std::size_t j = 0; j < names.size(); ++j) names[j] = "f" + std::to_string(j);
  const Dataset design(std::move(names), std::move(features));

  EstimatingFunction glm;
  glm.dim_param = m;
  glm.dim_out = m;
  glm.evaluate = [m](Observation obs, const Vector& gamma) -> Vector {
    const Eigen::Map<const Vector> x(obs.data() + 1, m);
    return x * (obs[0] - logistic(x.dot(gamma)));
  };
  glm.jacobian = [m](Observation obs, const Vector& gamma) -> Matrix {
    const Eigen::Map<const Vector> x(obs.data() + 1, m);
    return -logistic_derivative(x.dot(gamma)) * (x * x.transpose());
  };

  Vector gamma = Vector::Zero(m);
  try {
    const ParamEstimate fit = solve_weighted(glm, design, weights, gamma, config);
    if (fit.value.allFinite()) gamma = fit.value;
  } catch (const Error&) {
    // keep the zero start
  }

  Vector theta = Vector::Zero(kShapeParams + 1 + n_covariates);
  for (Index j = 0; j < kAerobic; ++j) {
    theta[3 * j] = gamma[j];
    theta[3 * j + 1] = 0.0;
    theta[3 * j + 2] = log_c[static_cast<std::size_t>(j)];
  }
  theta.segment(kThetaSit, 4) = gamma.segment(kAerobic, 4);
  theta.tail(1 + n_covariates) = gamma.tail(1 + n_covariates);
  return ascend_likelihood(data, weights, std::move(theta), n_covariates, config);
}

TwoStageSystem make_activity_system(const Dataset& data, std::vector<std::string> covariate_names) {
  TwoStageSystem s;
  s.name = "activity";
  s.columns = {"W", "Y"};
  for (const auto& c : component_names()) s.columns.push_back(c);
  for (const auto& c : covariate_names) s.columns.push_back(c);

  const Dataset bound = data.select(s.columns);
  auto ranges = std::make_shared<const ObservedRanges>(ObservedRanges::from_dataset(bound));
  const Index n_cov = static_cast<Index>(covariate_names.size());

  s.stage1 = make_score_model(n_cov);
  const Index p = s.stage1.dim_param;

  ScoreTransform f{[ranges](Observation obs, const Vector& theta) {
                     return scaled_score(record_from(obs), theta, *ranges, false).value;
                   },
                   [ranges](Observation obs, const Vector& theta) {
                     return scaled_score(record_from(obs), theta, *ranges, true).gradient;
                   }};
  RiskLayout layout;
  layout.response = kY;
  for (Index j = 0; j < n_cov; ++j) layout.covariates.push_back(kFirstCovariate + j);
  s.stage2 = make_risk_system(std::move(f), p, std::move(layout));

  s.theta_warm_start = [n_cov](const Dataset& d, const Vector& w, const SolverConfig& config) {
    return warm_start(d, w, n_cov, config);
  };

  for (Index j = 0; j < kAerobic; ++j) {
    const auto& name = component_names()[static_cast<std::size_t>(j)];
    s.theta_names.push_back("d_" + name);
    s.theta_names.push_back("log_b_" + name);
    s.theta_names.push_back("log_c_" + name);
  }
  s.theta_names.insert(s.theta_names.end(),
                       {"theta_sitting_other", "theta_tv", "theta_sleep1", "theta_sleep2",
                        "theta_intercept"});
  for (const auto& c : covariate_names) s.theta_names.push_back("theta_" + c);
  s.beta_names = {"beta0_score", "beta_intercept"};
  for (const auto& c : covariate_names) s.beta_names.push_back("beta_" + c);
  return s;
}

ActivitySimSpec ActivitySimSpec::defaults() {
  ActivitySimSpec spec;
  auto& t = spec.truth;
  t.d = {2.0, 2.5, 1.5, 2.0, 1.5};
  t.b = {1.0, 1.0, 1.0, 1.0, 1.0};
  t.c = {6.0, 15.0, 2.0, 8.0, 1.5};
  t.theta_sit = -0.05;
  t.theta_tv = -0.10;
  t.theta_sleep1 = 0.9;
  t.theta_sleep2 = -0.06;
  t.z_coef = Vector(3);
  t.z_coef << -6.5, 0.2, -0.4;
  spec.beta0 = -0.03;
  spec.beta_rest = Vector(3);
  spec.beta_rest << 0.3, 0.3, 0.5;
  return spec;
}

namespace {

template <class Engine>
double beta_draw(Engine& engine, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(engine);
  const double y = gb(engine);
  return x / (x + y);
}

template <class Engine>
double zero_inflated_lognormal(Engine& engine, double p_zero, double mu, double sigma) {
  std::lognormal_distribution<double> ln(mu, sigma);
  const double u = uniform01(engine);
  const double v = ln(engine);
  return u < p_zero ? 0.0 : v;
}

}  // namespace

Dataset simulate_activity(const ActivitySimSpec& spec, Index n, std::uint64_t seed) {
  spec.truth.validate();
  if (n < 1) fail(ErrorKind::InvalidArgument, "need n >= 1");
  if (spec.truth.z_coef.size() != 3 || spec.beta_rest.size() != 3) {
    fail(ErrorKind::InvalidArgument, "simulated cohort carries an intercept, sex and age");
  }
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;

  std::vector<std::string> names{"W", "Y"};
  for (const auto& c : component_names()) names.push_back(c);
  for (const auto& c : simulated_covariates()) names.push_back(c);
  RowMatrix values(n, static_cast<Index>(names.size()));

  struct AerobicLaw {
    double p_zero, mu, sigma;
  };
  constexpr std::array<AerobicLaw, kAerobic> laws{{
      {0.30, 1.8, 1.6},
      {0.10, 2.7, 1.5},
      {0.20, 0.7, 1.5},
      {0.20, 2.1, 1.5},
      {0.30, 0.4, 1.5},
  }};

  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < kAerobic; ++j) {
      const auto& law = laws[static_cast<std::size_t>(j)];
      values(i, kFirstComponent + j) = zero_inflated_lognormal(engine, law.p_zero, law.mu, law.sigma);
    }
    values(i, kFirstComponent + kSitting) = 16.0 * beta_draw(engine, 2.0, 5.0);
    values(i, kFirstComponent + kTv) = 10.0 * beta_draw(engine, 2.0, 4.0);
    values(i, kFirstComponent + kSleep) = std::round(2.0 * (4.0 + 7.0 * beta_draw(engine, 4.0, 4.0))) / 2.0;
    values(i, kFirstCovariate) = uniform01(engine) < 0.5 ? 1.0 : 0.0;
    values(i, kFirstCovariate + 1) = normal(engine);
  }

  // Responses: W from the score model, Y from the risk model on the true
  // 0-100 score scaled over this cohort.
  Dataset partial(names, values);
  const ObservedRanges ranges = ObservedRanges::from_dataset(partial);
  const ScoreScaling scaling = build_score_scaling(spec.truth, ranges);
  for (Index i = 0; i < n; ++i) {
    ActivityRecord x;
    for (Index k = 0; k < kComponents; ++k) x[static_cast<std::size_t>(k)] = values(i, kFirstComponent + k);
    const std::array<double, 3> z{1.0, values(i, kFirstCovariate), values(i, kFirstCovariate + 1)};
    const double eta_w = activity_logit(x, spec.truth, z);
    const double eta_y = spec.beta0 * score(x, spec.truth, scaling) + spec.beta_rest[0] +
                         spec.beta_rest[1] * z[1] + spec.beta_rest[2] * z[2];
    values(i, kW) = uniform01(engine) < logistic(eta_w) ? 1.0 : 0.0;
    values(i, kY) = uniform01(engine) < logistic(eta_y) ? 1.0 : 0.0;
  }
  return Dataset(std::move(names), std::move(values));
}

ShapeReport check_shapes(const ActivityScoreParams& params, const ObservedRanges& ranges, Index grid) {
  if (grid < 3) fail(ErrorKind::InvalidArgument, "shape grid needs at least 3 points");
  ShapeReport out;
  constexpr double tol = 1e-12;
  for (Index j = 0; j < kAerobic; ++j) {
    const auto u = static_cast<std::size_t>(j);
    const double top = ranges.max(j);
    bool increasing = true;
    bool concave = true;
    double prev2 = 0.0;
    double prev = marginal(j, 0.0, params);
    for (Index g = 1; g < grid; ++g) {
      const double x = top * static_cast<double>(g) / static_cast<double>(grid - 1);
      const double v = marginal(j, x, params);
      if (v < prev - tol) increasing = false;
      if (g >= 2 && v - 2.0 * prev + prev2 > tol) concave = false;
      prev2 = prev;
      prev = v;
    }
    out.aerobic_nondecreasing[u] = increasing;
    out.aerobic_concave_checked[u] = params.b[u] <= 1.0;
    out.aerobic_concave[u] = concave;
    if (!increasing) out.warnings.push_back(component_names()[u] + " marginal is not nondecreasing");
    if (out.aerobic_concave_checked[u] && !concave) {
      out.warnings.push_back(component_names()[u] + " marginal is not concave");
    }
  }
  out.sitting_decreasing = params.theta_sit <= 0.0;
  out.tv_decreasing = params.theta_tv <= 0.0;
  out.sleep_concave = params.theta_sleep2 <= 0.0;
  if (!out.sitting_decreasing) out.warnings.push_back("sitting_other marginal is increasing");
  if (!out.tv_decreasing) out.warnings.push_back("tv marginal is increasing");
  if (!out.sleep_concave) out.warnings.push_back("sleep marginal is not concave (theta_sleep2 > 0)");
  return out;
}

}  // namespace splitee::activity

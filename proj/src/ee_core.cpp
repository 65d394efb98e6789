#include "splitee/ee_core.hpp"

#include "splitee/errors.hpp"

#include <algorithm>
#include <string>

namespace splitee {

void SolverConfig::validate() const {
  if (max_iterations < 1) fail(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
  if (!(residual_tolerance >= 0.0)) fail(ErrorKind::InvalidArgument, "residual_tolerance must be >= 0");
  if (!(step_tolerance >= 0.0)) fail(ErrorKind::InvalidArgument, "step_tolerance must be >= 0");
  if (!(jacobian_step > 0.0)) fail(ErrorKind::InvalidArgument, "jacobian_step must be > 0");
  if (!(line_search_shrink > 0.0 && line_search_shrink < 1.0)) {
    fail(ErrorKind::InvalidArgument, "line_search_shrink must lie in (0, 1)");
  }
  if (max_halvings < 0) fail(ErrorKind::InvalidArgument, "max_halvings must be >= 0");
}

double finite_difference_step(double x, const SolverConfig& config) {
  return config.jacobian_step * std::max(1.0, std::abs(x));
}

Matrix numerical_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& point,
                          const SolverConfig& config) {
  Matrix jac;
  Vector probe = point;
  for (Index j = 0; j < point.size(); ++j) {
    const double h = finite_difference_step(point[j], config);
    probe[j] = point[j] + h;
    const Vector plus = fn(probe);
    probe[j] = point[j] - h;
    const Vector minus = fn(probe);
    probe[j] = point[j];
    if (!plus.allFinite() || !minus.allFinite()) {
      fail(ErrorKind::NonFiniteEvaluation,
           "function not finite at finite-difference probe of coordinate " + std::to_string(j));
    }
    if (j == 0) jac.resize(plus.size(), point.size());
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

Matrix observation_jacobian(const EstimatingFunction& fn, Observation obs, const Vector& at,
                            const SolverConfig& config) {
  if (fn.has_jacobian()) return fn.jacobian(obs, at);
  return numerical_jacobian([&](const Vector& p) { return fn.evaluate(obs, p); }, at, config);
}

namespace {

void check_weights(const Dataset& data, const Vector& weights) {
  if (weights.size() != data.rows()) {
    fail(ErrorKind::InvalidArgument, "weights length " + std::to_string(weights.size()) +
                                         " differs from row count " + std::to_string(data.rows()));
  }
  for (Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      fail(ErrorKind::InvalidArgument, "weights must be finite and nonnegative");
    }
  }
}

double infinity_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

}  // namespace

Vector weighted_mean_score(const EstimatingFunction& fn, const Dataset& data,
                           const Vector& weights, const Vector& at) {
  Vector total = Vector::Zero(fn.dim_out);
  for (Index i = 0; i < data.rows(); ++i) {
    if (weights[i] == 0.0) continue;
    const Vector psi = fn.evaluate(data.row(i), at);
    if (psi.size() != fn.dim_out) {
      fail(ErrorKind::InvalidArgument, "estimating function returned " +
                                           std::to_string(psi.size()) + " values, expected " +
                                           std::to_string(fn.dim_out));
    }
    total.noalias() += weights[i] * psi;
  }
  total /= static_cast<double>(data.rows());
  if (!total.allFinite()) {
    fail(ErrorKind::NonFiniteEvaluation, "weighted mean estimating function is not finite");
  }
  return total;
}

Matrix average_jacobian(const EstimatingFunction& fn, const Dataset& data, const Vector& weights,
                        const Vector& at, const SolverConfig& config) {
  check_weights(data, weights);
  Matrix total = Matrix::Zero(fn.dim_out, fn.dim_param);
  for (Index i = 0; i < data.rows(); ++i) {
    if (weights[i] == 0.0) continue;
    total.noalias() += weights[i] * observation_jacobian(fn, data.row(i), at, config);
  }
  total /= static_cast<double>(data.rows());
  if (!total.allFinite()) fail(ErrorKind::NonFiniteEvaluation, "average Jacobian is not finite");
  return total;
}

ParamEstimate solve_weighted(const EstimatingFunction& fn, const Dataset& data,
                             const Vector& weights, const Vector& init,
                             const SolverConfig& config) {
  config.validate();
  check_weights(data, weights);
  if (init.size() != fn.dim_param) {
    fail(ErrorKind::InvalidArgument, "initial value has length " + std::to_string(init.size()) +
                                         ", expected " + std::to_string(fn.dim_param));
  }
  if (!init.allFinite()) fail(ErrorKind::InvalidArgument, "initial value is not finite");
  if (fn.dim_out != fn.dim_param) {
    fail(ErrorKind::InvalidArgument, "solve_weighted needs a square system");
  }
  const Index positive = (weights.array() > 0.0).count();
  if (positive < fn.dim_param) {
    fail(ErrorKind::InsufficientData, std::to_string(positive) +
                                          " positively weighted rows for " +
                                          std::to_string(fn.dim_param) + " parameters");
  }

  Vector x = init;
  Vector r = weighted_mean_score(fn, data, weights, x);
  double merit = r.norm();
  double reference_jacobian_norm = -1.0;

  auto checked_jacobian = [&](const Vector& at) {
    Matrix jac = average_jacobian(fn, data, weights, at, config);
    const double norm = jac.lpNorm<Eigen::Infinity>();
    if (reference_jacobian_norm < 0.0) reference_jacobian_norm = norm;
    if (norm == 0.0 || norm < config.collapse_ratio * reference_jacobian_norm) {
      fail(ErrorKind::SingularJacobian, "average Jacobian collapsed toward zero");
    }
    return jac;
  };

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    Matrix jac = checked_jacobian(x);
    if (infinity_norm(r) <= config.residual_tolerance) {
      return {x, infinity_norm(r), iter, true};
    }
    Eigen::PartialPivLU<Matrix> lu(jac);
    if (!(lu.rcond() > config.singular_rcond)) {
      fail(ErrorKind::SingularJacobian, "average Jacobian is singular (rcond " +
                                            std::to_string(lu.rcond()) + ")");
    }
    const Vector step = -lu.solve(r);
    if (!step.allFinite()) fail(ErrorKind::SingularJacobian, "Newton step is not finite");

    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= config.max_halvings; ++h, scale *= config.line_search_shrink) {
      const Vector trial = x + scale * step;
      Vector trial_r;
      try {
        trial_r = weighted_mean_score(fn, data, weights, trial);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NonFiniteEvaluation) continue;
        throw;
      }
      const double trial_merit = trial_r.norm();
      if (trial_merit < merit) {
        x = trial;
        r = std::move(trial_r);
        merit = trial_merit;
        accepted = true;
        break;
      }
    }
    if (!accepted) return {x, infinity_norm(r), iter + 1, false};

    if (scale * infinity_norm(step) <= config.step_tolerance * (1.0 + infinity_norm(x)) &&
        infinity_norm(r) > config.residual_tolerance) {
      return {x, infinity_norm(r), iter + 1, false};
    }
  }
  const double final_norm = infinity_norm(r);
  if (final_norm <= config.residual_tolerance) {
    checked_jacobian(x);
    return {x, final_norm, config.max_iterations, true};
  }
  return {x, final_norm, config.max_iterations, false};
}

double relative_difference(const Matrix& analytic, const Matrix& reference) {
  if (analytic.rows() != reference.rows() || analytic.cols() != reference.cols()) {
    return std::numeric_limits<double>::infinity();
  }
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max(1.0, reference.lpNorm<Eigen::Infinity>());
  return (analytic - reference).lpNorm<Eigen::Infinity>() / scale;
}

JacobianCheck check_jacobian(const EstimatingFunction& fn, const Dataset& data,
                             std::span<const Vector> probes, const SolverConfig& config) {
  JacobianCheck result;
  if (!fn.has_jacobian() || data.rows() == 0) return result;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const Observation obs = data.row(static_cast<Index>(k) % data.rows());
    const Matrix analytic = fn.jacobian(obs, probes[k]);
    const Matrix numeric =
        numerical_jacobian([&](const Vector& p) { return fn.evaluate(obs, p); }, probes[k], config);
    result.max_relative_error =
        std::max(result.max_relative_error, relative_difference(analytic, numeric));
    ++result.probes;
  }
  return result;
}

}  // namespace splitee

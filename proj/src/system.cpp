#include "splitee/system.hpp"

#include "splitee/errors.hpp"

#include <algorithm>

namespace splitee {

Vector TwoStageSystem::stage1_start(const Dataset& data, const Vector& weights,
                                    const SolverConfig& config) const {
  if (theta_warm_start) return theta_warm_start(data, weights, config);
  if (theta_init.size() == dim_theta()) return theta_init;
  return Vector::Zero(dim_theta());
}

EstimatingFunction freeze_theta(const PlugInFunction& fn, Vector theta) {
  EstimatingFunction out;
  out.dim_param = fn.dim_beta;
  out.dim_out = fn.dim_beta;
  out.evaluate = [fn, theta](Observation obs, const Vector& beta) {
    return fn.evaluate(obs, beta, theta);
  };
  if (fn.jacobian_beta) {
    out.jacobian = [fn, theta](Observation obs, const Vector& beta) {
      return fn.jacobian_beta(obs, beta, theta);
    };
  }
  return out;
}

Matrix plug_in_beta_jacobian(const PlugInFunction& fn, Observation obs, const Vector& beta,
                             const Vector& theta, const SolverConfig& config) {
  if (fn.jacobian_beta) return fn.jacobian_beta(obs, beta, theta);
  return numerical_jacobian([&](const Vector& b) { return fn.evaluate(obs, b, theta); }, beta,
                            config);
}

Matrix plug_in_theta_jacobian(const PlugInFunction& fn, Observation obs, const Vector& beta,
                              const Vector& theta, const SolverConfig& config) {
  if (fn.uses_chain_rule()) {
    const Vector k_f = fn.derivative_f(obs, beta, theta);
    const Vector f_theta = fn.transform->gradient(obs, theta);
    return k_f * f_theta.transpose();
  }
  if (fn.jacobian_theta) return fn.jacobian_theta(obs, beta, theta);
  return numerical_jacobian([&](const Vector& t) { return fn.evaluate(obs, beta, t); }, theta,
                            config);
}

EstimatingFunction stacked_function(const TwoStageSystem& system, const SolverConfig& config) {
  const Index p = system.dim_theta();
  const Index q = system.dim_beta();
  EstimatingFunction out;
  out.dim_param = p + q;
  out.dim_out = p + q;
  out.evaluate = [system, p, q](Observation obs, const Vector& param) {
    const Vector theta = param.head(p);
    const Vector beta = param.tail(q);
    Vector value(p + q);
    value.head(p) = system.stage1.evaluate(obs, theta);
    value.tail(q) = system.stage2.evaluate(obs, beta, theta);
    return value;
  };
  out.jacobian = [system, p, q, config](Observation obs, const Vector& param) {
    const Vector theta = param.head(p);
    const Vector beta = param.tail(q);
    Matrix jac = Matrix::Zero(p + q, p + q);
    jac.topLeftCorner(p, p) = observation_jacobian(system.stage1, obs, theta, config);
    jac.bottomLeftCorner(q, p) = plug_in_theta_jacobian(system.stage2, obs, beta, theta, config);
    jac.bottomRightCorner(q, q) = plug_in_beta_jacobian(system.stage2, obs, beta, theta, config);
    return jac;
  };
  return out;
}

double SystemJacobianCheck::worst() const {
  return std::max({stage1, stage2_beta, stage2_theta, transform_gradient});
}

SystemJacobianCheck check_system_jacobians(const TwoStageSystem& system, const Dataset& data,
                                           std::span<const Vector> theta_probes,
                                           std::span<const Vector> beta_probes,
                                           const SolverConfig& config) {
  if (theta_probes.size() != beta_probes.size()) {
    fail(ErrorKind::InvalidArgument, "theta and beta probe counts differ");
  }
  SystemJacobianCheck out;
  const auto& k = system.stage2;
  for (std::size_t m = 0; m < theta_probes.size(); ++m) {
    const Observation obs = data.row(static_cast<Index>(m) % data.rows());
    const Vector& theta = theta_probes[m];
    const Vector& beta = beta_probes[m];
    if (system.stage1.has_jacobian()) {
      const Matrix numeric = numerical_jacobian(
          [&](const Vector& t) { return system.stage1.evaluate(obs, t); }, theta, config);
      out.stage1 = std::max(out.stage1,
                            relative_difference(system.stage1.jacobian(obs, theta), numeric));
    }
    if (k.jacobian_beta) {
      const Matrix numeric = numerical_jacobian(
          [&](const Vector& b) { return k.evaluate(obs, b, theta); }, beta, config);
      out.stage2_beta =
          std::max(out.stage2_beta, relative_difference(k.jacobian_beta(obs, beta, theta), numeric));
    }
    if (k.uses_chain_rule() || k.jacobian_theta) {
      const Matrix numeric = numerical_jacobian(
          [&](const Vector& t) { return k.evaluate(obs, beta, t); }, theta, config);
      out.stage2_theta = std::max(
          out.stage2_theta,
          relative_difference(plug_in_theta_jacobian(k, obs, beta, theta, config), numeric));
    }
    if (k.transform) {
      const Matrix numeric = numerical_jacobian(
          [&](const Vector& t) { return Vector::Constant(1, k.transform->value(obs, t)); }, theta,
          config);
      const Matrix analytic = k.transform->gradient(obs, theta).transpose();
      out.transform_gradient =
          std::max(out.transform_gradient, relative_difference(analytic, numeric));
    }
    ++out.probes;
  }
  return out;
}

}  // namespace splitee

#pragma once

// A two-stage estimating system: a first-stage function Psi(obs, theta) and a
// second-stage function K(obs, beta, theta) that is solved with theta held at
// its first-stage estimate. When K depends on theta only through a scalar
// transform f(obs; theta), declaring the transform lets the theta-derivative of
// K be formed by the chain rule K_f * f_theta^T.

#include "splitee/ee_core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace splitee {

struct ScoreTransform {
  std::function<double(Observation, const Vector& theta)> value;
  std::function<Vector(Observation, const Vector& theta)> gradient;
};

struct PlugInFunction {
  using Evaluate = std::function<Vector(Observation, const Vector& beta, const Vector& theta)>;
  using Jacobian = std::function<Matrix(Observation, const Vector& beta, const Vector& theta)>;

  Index dim_beta = 0;
  Index dim_theta = 0;
  Evaluate evaluate;
  Jacobian jacobian_beta;   // optional
  Jacobian jacobian_theta;  // optional, direct dK/dtheta
  std::optional<ScoreTransform> transform;
  // dK/df evaluated at f(obs; theta); required when `transform` is set.
  Evaluate derivative_f;

  bool uses_chain_rule() const { return transform.has_value() && static_cast<bool>(derivative_f); }
};

struct TwoStageSystem {
  std::string name;
  std::vector<std::string> columns;  // the Observation layout the functions expect
  std::vector<std::string> theta_names;
  std::vector<std::string> beta_names;
  EstimatingFunction stage1;
  PlugInFunction stage2;
  Vector theta_init;
  Vector beta_init;
  // Optional data-driven first-stage starting value for a given weighting.
  std::function<Vector(const Dataset&, const Vector& weights, const SolverConfig&)> theta_warm_start;

  Index dim_theta() const { return stage1.dim_param; }
  Index dim_beta() const { return stage2.dim_beta; }
  Index dim_total() const { return dim_theta() + dim_beta(); }

  /// Projects `data` onto this system's column layout (SchemaMismatch on a
  /// missing column).
  Dataset bind(const Dataset& data) const { return data.select(columns); }

  Vector stage1_start(const Dataset& data, const Vector& weights, const SolverConfig& config) const;
};

/// The second-stage function as an estimating function in beta with theta frozen.
EstimatingFunction freeze_theta(const PlugInFunction& fn, Vector theta);

/// dK/dbeta for one observation.
Matrix plug_in_beta_jacobian(const PlugInFunction& fn, Observation obs, const Vector& beta,
                             const Vector& theta, const SolverConfig& config = {});

/// dK/dtheta for one observation: chain rule through the declared transform,
/// else the direct analytic derivative, else central differences.
Matrix plug_in_theta_jacobian(const PlugInFunction& fn, Observation obs, const Vector& beta,
                              const Vector& theta, const SolverConfig& config = {});

/// The joint system (Psi, K) in (theta, beta) with its block lower-triangular
/// Jacobian.
EstimatingFunction stacked_function(const TwoStageSystem& system, const SolverConfig& config = {});

struct SystemJacobianCheck {
  double stage1 = 0.0;
  double stage2_beta = 0.0;
  double stage2_theta = 0.0;
  double transform_gradient = 0.0;
  Index probes = 0;

  double worst() const;
};

/// Checks every analytic derivative the system carries against central
/// differences at the given (theta, beta) probe points, probe k paired with
/// row k mod n.
SystemJacobianCheck check_system_jacobians(const TwoStageSystem& system, const Dataset& data,
                                           std::span<const Vector> theta_probes,
                                           std::span<const Vector> beta_probes,
                                           const SolverConfig& config = {});

}  // namespace splitee

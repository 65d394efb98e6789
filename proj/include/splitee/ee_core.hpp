#pragma once

// Root finding for weighted estimating equations
//
//     0 = n^-1 sum_i w_i Psi(obs_i, param)
//
// by damped Newton iteration, plus the finite-difference utilities the rest
// of the library uses to build average Jacobians.

#include "splitee/types.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace splitee {

/// Per-observation estimating function with an optional analytic Jacobian.
struct EstimatingFunction {
  using Evaluate = std::function<Vector(Observation, const Vector&)>;
  using Jacobian = std::function<Matrix(Observation, const Vector&)>;

  Index dim_param = 0;
  Index dim_out = 0;
  Evaluate evaluate;
  Jacobian jacobian;  // empty => central differences

  bool has_jacobian() const { return static_cast<bool>(jacobian); }
};

struct SolverConfig {
  int max_iterations = 100;
  double residual_tolerance = 1e-10;  // on the inf-norm of the weighted mean equation
  double step_tolerance = 1e-12;
  double jacobian_step = std::cbrt(std::numeric_limits<double>::epsilon());
  double line_search_shrink = 0.5;
  int max_halvings = 30;
  // Reciprocal condition number below which the average Jacobian counts as singular.
  double singular_rcond = 1e-13;
  // A Jacobian whose norm falls below this fraction of its norm at the
  // starting point has collapsed (logistic separation drives it to zero).
  double collapse_ratio = 1e-8;

  void validate() const;
};

struct ParamEstimate {
  Vector value;
  double residual_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Finite-difference step for coordinate value `x`: jacobian_step * max(1, |x|).
double finite_difference_step(double x, const SolverConfig& config = {});

/// Central-difference Jacobian of `fn` at `point`. Throws NonFiniteEvaluation
/// when `fn` is not finite at a probe.
Matrix numerical_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& point,
                          const SolverConfig& config = {});

/// Jacobian of `fn` for one observation: analytic when available.
Matrix observation_jacobian(const EstimatingFunction& fn, Observation obs, const Vector& at,
                            const SolverConfig& config = {});

/// n^-1 sum_i w_i Psi_i(at); rows with zero weight are not evaluated.
Vector weighted_mean_score(const EstimatingFunction& fn, const Dataset& data,
                           const Vector& weights, const Vector& at);

/// n^-1 sum_i w_i J_i(at).
Matrix average_jacobian(const EstimatingFunction& fn, const Dataset& data, const Vector& weights,
                        const Vector& at, const SolverConfig& config = {});

/// Damped Newton solve of the weighted estimating equation.
///
/// Throws InsufficientData when fewer than dim_param rows carry positive
/// weight, SingularJacobian when the average Jacobian is singular or has
/// collapsed, NonFiniteEvaluation when the function is not finite at the
/// starting point. Hitting max_iterations or stalling returns the last
/// (best) iterate with converged = false.
ParamEstimate solve_weighted(const EstimatingFunction& fn, const Dataset& data,
                             const Vector& weights, const Vector& init,
                             const SolverConfig& config = {});

/// max |A - N| / max(1, max |N|) for an analytic matrix A and reference N.
double relative_difference(const Matrix& analytic, const Matrix& reference);

struct JacobianCheck {
  double max_relative_error = 0.0;
  Index probes = 0;
  bool passed(double tolerance = 1e-5) const { return max_relative_error <= tolerance; }
};

/// Compares the analytic Jacobian with central differences at each probe
/// point, pairing probe k with row k mod n.
JacobianCheck check_jacobian(const EstimatingFunction& fn, const Dataset& data,
                             std::span<const Vector> probes, const SolverConfig& config = {});

}  // namespace splitee

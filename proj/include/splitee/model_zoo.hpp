#pragma once

// Shipped two-stage systems and their data generators:
//
//   mean      Psi = W - theta,              K = Y - beta - theta
//   linear    Psi = X (W - X'theta),        K = f (Y - beta f),        f = X'theta
//   logistic  Psi = X (W - H(X'theta)),     K = f (Y - H(beta f)),     f = a + c (X'theta)^2
//
// H is the logistic distribution function. Column layouts are W, Y, x1..xp.

#include "splitee/system.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace splitee {

double logistic(double t);
/// H'(t) = H(t) H(-t), evaluated without cancellation.
double logistic_derivative(double t);

struct MeanPairSpec {
  double theta = 1.0;
  double beta = 2.0;
  double sd_w = 1.0;
  double sd_y = 1.0;
};

struct LinearPairSpec {
  Vector theta = Vector::Constant(3, 1.0 / std::sqrt(3.0));
  double beta0 = 1.0 / std::sqrt(3.0);
  double noise_sd = std::sqrt(0.5);  // N(0, 0.5) read as variance 0.5

  void validate() const;
};

struct LogisticPairSpec {
  Vector theta = Vector::Constant(3, 1.0 / std::sqrt(3.0));
  double beta0 = 1.0 / std::sqrt(3.0);
  double a = 2.0;
  double c = 1.5;

  void validate() const;
};

std::vector<std::string> covariate_columns(Index p);

TwoStageSystem make_mean_pair();
TwoStageSystem make_linear_pair(const LinearPairSpec& spec = {});
TwoStageSystem make_logistic_pair(const LogisticPairSpec& spec = {});

Dataset simulate_mean(const MeanPairSpec& spec, Index n, std::uint64_t seed);
Dataset simulate_linear(const LinearPairSpec& spec, Index n, std::uint64_t seed);
Dataset simulate_logistic(const LogisticPairSpec& spec, Index n, std::uint64_t seed);

}  // namespace splitee

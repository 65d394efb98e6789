#pragma once

// Reference computations coded independently of the library: closed-form
// least squares, textbook IRLS, and scalar hand formulas.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// (X'X)^-1 X'y through the normal equations.
inline VectorXd normal_equations(const MatrixXd& X, const VectorXd& y) {
  const MatrixXd xtx = X.transpose() * X;
  const VectorXd xty = X.transpose() * y;
  return xtx.ldlt().solve(xty);
}

/// Rows of `m` where mask == want.
inline MatrixXd rows_where(const MatrixXd& m, const VectorXd& mask, double want) {
  std::vector<int> idx;
  for (int i = 0; i < mask.size(); ++i) {
    if (mask[i] == want) idx.push_back(i);
  }
  MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
  return out;
}

struct TwoStage {
  VectorXd theta;
  double beta = 0.0;
};

/// Linear pair: theta by OLS of W on X over the first part, beta by
/// no-intercept OLS of Y on X'theta over the second part.
inline TwoStage linear_two_stage(const MatrixXd& X, const VectorXd& W, const VectorXd& Y,
                                 const VectorXd& delta) {
  TwoStage out;
  const MatrixXd X1 = rows_where(X, delta, 1.0);
  const MatrixXd W1 = rows_where(W, delta, 1.0);
  out.theta = normal_equations(X1, W1.col(0));
  const MatrixXd X0 = rows_where(X, delta, 0.0);
  const MatrixXd Y0 = rows_where(Y, delta, 0.0);
  const VectorXd f = X0 * out.theta;
  out.beta = f.dot(Y0.col(0)) / f.dot(f);
  return out;
}

/// Newton-Raphson / IRLS for logistic regression: beta <- (X'VX)^-1 X'V z.
inline VectorXd irls_logistic(const MatrixXd& X, const VectorXd& y, int iterations = 100) {
  VectorXd beta = VectorXd::Zero(X.cols());
  for (int it = 0; it < iterations; ++it) {
    const VectorXd eta = X * beta;
    VectorXd p(eta.size()), v(eta.size()), z(eta.size());
    for (int i = 0; i < eta.size(); ++i) {
      p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      v[i] = p[i] * (1.0 - p[i]);
      z[i] = eta[i] + (y[i] - p[i]) / v[i];
    }
    const MatrixXd xtvx = X.transpose() * v.asDiagonal() * X;
    const VectorXd next = xtvx.ldlt().solve(X.transpose() * v.asDiagonal() * z);
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change < 1e-14) break;
  }
  return beta;
}

/// Variance estimate of the first-part mean implied by the influence recipe:
/// (n / (n - 1)) * sum_{in} (W_i - mean_in)^2 / n_in^2.
inline double split_mean_variance(const VectorXd& W, const VectorXd& delta) {
  const double n = static_cast<double>(W.size());
  double n_in = 0.0, sum = 0.0;
  for (int i = 0; i < W.size(); ++i) {
    if (delta[i] == 1.0) {
      n_in += 1.0;
      sum += W[i];
    }
  }
  const double mean = sum / n_in;
  double ss = 0.0;
  for (int i = 0; i < W.size(); ++i) {
    if (delta[i] == 1.0) ss += (W[i] - mean) * (W[i] - mean);
  }
  return n / (n - 1.0) * ss / (n_in * n_in);
}

inline double sample_variance(const VectorXd& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

inline double sample_covariance(const VectorXd& x, const VectorXd& y) {
  const double mx = x.mean(), my = y.mean();
  return ((x.array() - mx) * (y.array() - my)).sum() / static_cast<double>(x.size() - 1);
}

}  // namespace oracle

namespace testutil {

/// Fresh directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(static_cast<std::uint64_t>(
      std::chrono::steady_clock::now().time_since_epoch().count()));
  auto dir = std::filesystem::temp_directory_path() /
             ("splitee_" + tag + "_" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace testutil

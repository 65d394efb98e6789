#pragma once

#include "splitee/system.hpp"

namespace splitee::detail {

struct InfluencePieces {
  Matrix omega;   // n^-1 sum w1 dPsi/dtheta
  Matrix lambda;  // n^-1 sum w2 dK/dbeta
  Matrix delta;   // n^-1 sum w2 dK/dtheta
  Matrix rows;    // n x (p + q)
};

// Rows [-Omega^-1 w1 Psi_i ; -Lambda^-1 (w2 K_i + Delta a_theta_i)], where
// a_theta_i is the first block. With w1 = delta, w2 = 1 - delta these are the
// single-split rows; with w1 = w2 = 1 they are the stacked-equation rows.
InfluencePieces weighted_influence(const TwoStageSystem& system, const Dataset& data,
                                   const Vector& w1, const Vector& w2, const Vector& theta,
                                   const Vector& beta, const SolverConfig& config);

}  // namespace splitee::detail

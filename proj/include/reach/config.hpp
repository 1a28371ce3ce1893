#pragma once

#include <Eigen/Core>

#include "reach/errors.hpp"

namespace reach {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// All numerical knobs in one place. Every report echoes the values that
// were in effect so a run can be reproduced exactly.
struct Tolerances {
  // Strict inequalities G p > h are solved as G p >= h + eps with
  // eps = strict_eps_scale * (1 + max row norm of G).
  double strict_eps_scale = 1e-6;
  // Simplex reduced-cost / pivot threshold.
  double pivot_tol = 1e-9;
  // Phase-1 residual above this (scaled) means infeasible.
  double phase1_tol = 1e-9;
  // Dual objective above this (scaled) certifies primal infeasibility.
  double decide_tol = 1e-9;
  // Post-hoc witness / Farkas certificate verification.
  double verify_tol = 1e-7;
  // Iteration cap = iteration_factor * (rows + cols).
  int iteration_factor = 50;
};

inline double strict_eps_for(const Matrix& G, const Tolerances& tol = {}) {
  double max_row = 0.0;
  for (Index i = 0; i < G.rows(); ++i) max_row = std::max(max_row, G.row(i).norm());
  return tol.strict_eps_scale * (1.0 + max_row);
}

inline void require_finite(const Matrix& m, const char* name) {
  if (!m.allFinite()) throw invalid_input_error(std::string(name) + ": non-finite entries");
}

inline void require_finite(const Vector& v, const char* name) {
  if (!v.allFinite()) throw invalid_input_error(std::string(name) + ": non-finite entries");
}

}  // namespace reach

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "reach/config.hpp"
#include "reach/errors.hpp"
#include "reach/simplex.hpp"

namespace reach {

// Verdict on the system G p >= rhs. A feasible verdict carries a point
// satisfying every row; an infeasible one carries nonnegative Farkas
// weights w with G'w = 0 and rhs'w > 0. Both are verified before return.
struct LpFeasibility {
  bool feasible = false;
  Vector witness;            // size cols(G), when feasible
  Vector certificate;        // size rows(G), when infeasible
  double margin = 0.0;       // min_j (G w - rhs)_j of the witness
  double certificate_value = 0.0;  // rhs' certificate
  long iterations = 0;
};

namespace detail {

inline void verify_witness(const Matrix& G, const Vector& rhs, LpFeasibility& out,
                           const Tolerances& tol) {
  const double scale = 1.0 + (rhs.size() ? rhs.cwiseAbs().maxCoeff() : 0.0);
  out.margin = G.rows() ? (G * out.witness - rhs).minCoeff()
                        : std::numeric_limits<double>::infinity();
  if (out.margin < -tol.verify_tol * scale)
    throw numerical_error("lp_feasible: witness failed verification, margin " +
                          std::to_string(out.margin));
}

inline void verify_certificate(const Matrix& G, const Vector& rhs, LpFeasibility& out,
                               const Tolerances& tol) {
  const Vector& w = out.certificate;
  if (w.minCoeff() < -tol.verify_tol)
    throw numerical_error("lp_feasible: certificate has negative weight");
  const double residual = (G.transpose() * w).cwiseAbs().maxCoeff();
  out.certificate_value = rhs.dot(w);
  if (residual > tol.verify_tol || out.certificate_value <= 0.0)
    throw numerical_error("lp_feasible: certificate failed verification, residual " +
                          std::to_string(residual));
}

}  // namespace detail

// Decides whether { p : G p >= rhs } is nonempty.
//
// Works on the normalized dual: maximize rhs'w subject to G'w = 0,
// sum(w) = 1, w >= 0 — a simplex-sized basis of cols(G)+1 regardless of
// the row count. A positive optimum scales into a Farkas certificate; a
// nonpositive optimum (or an empty dual) yields a primal point from the
// equality multipliers.
inline LpFeasibility lp_feasible_geq(const Matrix& G, const Vector& rhs,
                                     const Tolerances& tol = {}) {
  const Index r = G.rows();
  const Index d = G.cols();
  if (rhs.size() != r) throw invalid_input_error("lp_feasible: rows(G) != size(rhs)");
  require_finite(G, "lp_feasible G");
  require_finite(rhs, "lp_feasible rhs");

  LpFeasibility out;
  if (r == 0) {
    out.feasible = true;
    out.witness = Vector::Zero(d);
    out.margin = std::numeric_limits<double>::infinity();
    return out;
  }

  Matrix A(d + 1, r);
  A.topRows(d) = G.transpose();
  A.row(d).setOnes();
  Vector b = Vector::Zero(d + 1);
  b(d) = 1.0;

  SimplexResult res = simplex_solve(A, b, Vector(-rhs), tol);
  out.iterations = res.iterations;
  if (res.status == SimplexStatus::iteration_limit || res.status == SimplexStatus::unbounded)
    throw numerical_error("lp_feasible: simplex iteration limit exceeded", res.basis);

  const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
  if (res.status == SimplexStatus::infeasible) {
    // No normalized w with G'w = 0 exists: phase-1 multipliers separate the
    // row vectors from the origin, and scaling that direction clears rhs.
    Vector dir = -res.y.head(d);
    Vector margins = G * dir;
    const double mmin = margins.minCoeff();
    if (mmin <= 0.0)
      throw numerical_error("lp_feasible: separation direction failed, margin " +
                            std::to_string(mmin));
    double c = 0.0;
    for (Index j = 0; j < r; ++j)
      if (rhs(j) > 0.0) c = std::max(c, rhs(j) / margins(j));
    c += (1.0 + c) * 1e-9;
    out.feasible = true;
    out.witness = c * dir;
    detail::verify_witness(G, rhs, out, tol);
    return out;
  }

  const double dual_value = -res.objective;  // max rhs'w
  if (dual_value > tol.decide_tol * scale) {
    out.feasible = false;
    out.certificate = res.x;
    detail::verify_certificate(G, rhs, out, tol);
    return out;
  }

  // Optimal reduced costs give g_j' (-y_head) >= rhs_j + y_d with y_d >= -decide_tol.
  out.feasible = true;
  out.witness = -res.y.head(d);
  detail::verify_witness(G, rhs, out, tol);
  return out;
}

// Strict system G p > h realized as G p >= h + eps.
inline LpFeasibility lp_strict_feasible(const Matrix& G, const Vector& h, double eps,
                                        const Tolerances& tol = {}) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw invalid_input_error("lp_strict_feasible: eps must be finite and > 0");
  return lp_feasible_geq(G, h.array() + eps, tol);
}

// min ||a - aHat||_1  s.t.  G (v0 + B a) >= h + eps,  lo <= a <= hi.
struct L1Recourse {
  bool feasible = false;
  Vector action;  // size cols(B), when feasible
  double cost = 0.0;
  long iterations = 0;
};

inline L1Recourse min_l1_recourse(const Matrix& B, const Vector& v0, const Matrix& G,
                                  const Vector& h, const Vector& aHat, double lo, double hi,
                                  double eps, const Tolerances& tol = {}) {
  const Index k = B.cols();
  const Index r = G.rows();
  if (B.rows() != v0.size() || G.cols() != v0.size() || h.size() != r || aHat.size() != k)
    throw invalid_input_error("min_l1_recourse: shape mismatch");
  if (!(lo <= hi)) throw invalid_input_error("min_l1_recourse: lo > hi");
  require_finite(B, "min_l1_recourse B");
  require_finite(v0, "min_l1_recourse v0");
  require_finite(G, "min_l1_recourse G");
  require_finite(h, "min_l1_recourse h");
  require_finite(aHat, "min_l1_recourse aHat");

  const bool has_lo = std::isfinite(lo);
  const bool has_hi = std::isfinite(hi);
  const Matrix M = G * B;
  const Vector rhs_region = h.array() + eps - (G * (v0 + B * aHat)).array();

  L1Recourse out;
  if (k == 0) {
    out.feasible = r == 0 || rhs_region.maxCoeff() <= 0.0;
    out.action = Vector(0);
    return out;
  }

  // Variables: [u+ (k) | u- (k) | region slack (r) | lo slack | hi slack],
  // substituting a = aHat + u+ - u-.
  const Index nlo = has_lo ? k : 0;
  const Index nhi = has_hi ? k : 0;
  const Index nvar = 2 * k + r + nlo + nhi;
  const Index neq = r + nlo + nhi;
  Matrix A = Matrix::Zero(neq, nvar);
  Vector b = Vector::Zero(neq);
  A.block(0, 0, r, k) = M;
  A.block(0, k, r, k) = -M;
  A.block(0, 2 * k, r, r) = -Matrix::Identity(r, r);
  b.head(r) = rhs_region;
  Index row = r;
  if (has_lo) {
    for (Index j = 0; j < k; ++j, ++row) {
      A(row, j) = 1.0;
      A(row, k + j) = -1.0;
      A(row, 2 * k + r + j) = -1.0;
      b(row) = lo - aHat(j);
    }
  }
  if (has_hi) {
    for (Index j = 0; j < k; ++j, ++row) {
      A(row, j) = 1.0;
      A(row, k + j) = -1.0;
      A(row, 2 * k + r + nlo + j) = 1.0;
      b(row) = hi - aHat(j);
    }
  }
  Vector c = Vector::Zero(nvar);
  c.head(2 * k).setOnes();

  SimplexResult res = simplex_solve(A, b, c, tol);
  out.iterations = res.iterations;
  switch (res.status) {
    case SimplexStatus::optimal: {
      out.feasible = true;
      out.action = aHat + res.x.head(k) - res.x.segment(k, k);
      out.cost = (out.action - aHat).cwiseAbs().sum();
      return out;
    }
    case SimplexStatus::infeasible:
      out.feasible = false;
      return out;
    default:
      throw numerical_error("min_l1_recourse: simplex failed to converge", res.basis);
  }
}

}  // namespace reach

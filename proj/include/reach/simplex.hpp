#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "reach/config.hpp"
#include "reach/errors.hpp"

namespace reach {

enum class SimplexStatus { optimal, infeasible, unbounded, iteration_limit };

// Result of minimize c'x s.t. A x = b, x >= 0.
//   x  — primal solution (status optimal)
//   y  — equality multipliers against the original row order and signs:
//        phase-2 multipliers at an optimum, phase-1 multipliers when the
//        program is infeasible.
struct SimplexResult {
  SimplexStatus status = SimplexStatus::optimal;
  Vector x;
  Vector y;
  double objective = 0.0;
  std::vector<int> basis;
  long iterations = 0;
};

namespace detail {

struct Tableau {
  // rows[i] has layout [ structural(n) | artificial(p0) | rhs ]. Redundant
  // rows found in phase 1 are physically removed; the artificial block then
  // holds the (rectangular) map from original rows to kept rows, which is
  // all the multiplier extraction needs.
  std::vector<Vector> rows;
  std::vector<int> basis;
  Index n = 0;
  Index p0 = 0;

  Index width() const { return n + p0 + 1; }
  Index rhs_col() const { return n + p0; }
};

// Bland's rule: entering = lowest eligible index with negative reduced
// cost; leaving = min ratio, ties by lowest basic variable index.
inline SimplexStatus run_phase(Tableau& t, const Vector& cost, Index enter_limit, long iter_cap,
                               long& iterations, const Tolerances& tol) {
  const Index ncols = t.n + t.p0;
  while (true) {
    Vector z = cost;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double cb = cost(t.basis[i]);
      if (cb != 0.0) z.head(ncols) -= cb * t.rows[i].head(ncols);
    }
    Index enter = -1;
    for (Index j = 0; j < enter_limit; ++j) {
      if (z(j) < -tol.pivot_tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return SimplexStatus::optimal;

    std::ptrdiff_t leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double a = t.rows[i](enter);
      if (a <= tol.pivot_tol) continue;
      const double ratio = t.rows[i](t.rhs_col()) / a;
      if (ratio < best_ratio ||
          (ratio == best_ratio && leave >= 0 &&
           t.basis[i] < t.basis[static_cast<std::size_t>(leave)])) {
        best_ratio = ratio;
        leave = static_cast<std::ptrdiff_t>(i);
      }
    }
    if (leave < 0) return SimplexStatus::unbounded;

    Vector& pr = t.rows[static_cast<std::size_t>(leave)];
    pr /= pr(enter);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) == leave) continue;
      const double f = t.rows[i](enter);
      if (f != 0.0) t.rows[i] -= f * pr;
    }
    t.basis[static_cast<std::size_t>(leave)] = static_cast<int>(enter);

    if (++iterations > iter_cap) return SimplexStatus::iteration_limit;
  }
}

// y = c_B' M where M (artificial block) maps original rows to kept rows.
inline Vector multipliers(const Tableau& t, const Vector& cost) {
  Vector y = Vector::Zero(t.p0);
  for (Index k = 0; k < t.p0; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) acc += cost(t.basis[i]) * t.rows[i](t.n + k);
    y(k) = acc;
  }
  return y;
}

}  // namespace detail

inline SimplexResult simplex_solve(const Matrix& A, Vector b, const Vector& c,
                                   const Tolerances& tol = {}) {
  const Index p = A.rows();
  const Index n = A.cols();
  if (b.size() != p || c.size() != n) throw invalid_input_error("simplex_solve: shape mismatch");
  require_finite(A, "simplex A");
  require_finite(b, "simplex b");
  require_finite(c, "simplex c");

  std::vector<double> row_sign(static_cast<std::size_t>(p), 1.0);
  detail::Tableau t;
  t.n = n;
  t.p0 = p;
  t.rows.reserve(static_cast<std::size_t>(p));
  t.basis.resize(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) {
    const double s = b(i) < 0.0 ? -1.0 : 1.0;
    row_sign[static_cast<std::size_t>(i)] = s;
    Vector row = Vector::Zero(t.width());
    row.head(n) = s * A.row(i).transpose();
    row(n + i) = 1.0;
    row(t.rhs_col()) = s * b(i);
    t.rows.push_back(std::move(row));
    t.basis[static_cast<std::size_t>(i)] = static_cast<int>(n + i);
  }

  SimplexResult res;
  const long iter_cap = static_cast<long>(tol.iteration_factor) * static_cast<long>(p + n);

  // Phase 1: minimize the artificial sum.
  Vector cost1 = Vector::Zero(t.width() - 1);
  cost1.segment(n, p).setOnes();
  SimplexStatus st = detail::run_phase(t, cost1, n + p, iter_cap, res.iterations, tol);
  res.basis = t.basis;
  if (st != SimplexStatus::optimal) {
    res.status = SimplexStatus::iteration_limit;
    return res;
  }
  double phase1_obj = 0.0;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.basis[i] >= n) phase1_obj += t.rows[i](t.rhs_col());
  const double b_scale = 1.0 + (p ? b.cwiseAbs().maxCoeff() : 0.0);
  if (phase1_obj > tol.phase1_tol * b_scale) {
    res.status = SimplexStatus::infeasible;
    res.objective = phase1_obj;
    Vector y = detail::multipliers(t, cost1);
    res.y = Vector::Zero(p);
    for (Index k = 0; k < p; ++k) res.y(k) = row_sign[static_cast<std::size_t>(k)] * y(k);
    return res;
  }

  // Drive remaining artificials out of the basis; rows with no structural
  // pivot left are redundant and dropped.
  for (std::size_t i = 0; i < t.rows.size();) {
    if (t.basis[i] < n) {
      ++i;
      continue;
    }
    Index piv = -1;
    for (Index j = 0; j < n; ++j) {
      if (std::abs(t.rows[i](j)) > tol.pivot_tol) {
        piv = j;
        break;
      }
    }
    if (piv < 0) {
      t.rows.erase(t.rows.begin() + static_cast<std::ptrdiff_t>(i));
      t.basis.erase(t.basis.begin() + static_cast<std::ptrdiff_t>(i));
      continue;
    }
    Vector& pr = t.rows[i];
    pr /= pr(piv);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (r == i) continue;
      const double f = t.rows[r](piv);
      if (f != 0.0) t.rows[r] -= f * pr;
    }
    t.basis[i] = static_cast<int>(piv);
    ++i;
  }

  // Phase 2 with the real costs; artificial columns may not re-enter.
  Vector cost2 = Vector::Zero(t.width() - 1);
  cost2.head(n) = c;
  st = detail::run_phase(t, cost2, n, iter_cap, res.iterations, tol);
  res.basis = t.basis;
  if (st != SimplexStatus::optimal) {
    res.status = st;
    return res;
  }

  res.status = SimplexStatus::optimal;
  res.x = Vector::Zero(n);
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.basis[i] < n) res.x(t.basis[i]) = t.rows[i](t.rhs_col());
  res.objective = c.dot(res.x);
  Vector y = detail::multipliers(t, cost2);
  res.y = Vector::Zero(p);
  for (Index k = 0; k < p; ++k) res.y(k) = row_sign[static_cast<std::size_t>(k)] * y(k);
  return res;
}

}  // namespace reach

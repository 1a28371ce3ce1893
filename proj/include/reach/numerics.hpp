#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "reach/config.hpp"
#include "reach/errors.hpp"

namespace reach {

// Thin SVD with a numerical rank. Singular values are nonincreasing and
// only the first `rank` of them are treated as nonzero.
struct SvdResult {
  Vector singular_values;
  Matrix U;
  Matrix V;
  Index rank = 0;
};

inline SvdResult svd(const Matrix& M) {
  require_finite(M, "svd");
  SvdResult out;
  if (M.rows() == 0 || M.cols() == 0) {
    out.singular_values = Vector(0);
    out.U = Matrix(M.rows(), 0);
    out.V = Matrix(M.cols(), 0);
    out.rank = 0;
    return out;
  }
  Eigen::BDCSVD<Matrix> dec(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.singular_values = dec.singularValues();
  out.U = dec.matrixU();
  out.V = dec.matrixV();
  const double smax = out.singular_values.size() ? out.singular_values(0) : 0.0;
  const double thresh =
      smax * static_cast<double>(std::max(M.rows(), M.cols())) * std::numeric_limits<double>::epsilon();
  out.rank = 0;
  for (Index i = 0; i < out.singular_values.size(); ++i)
    if (out.singular_values(i) > thresh) ++out.rank;
  return out;
}

// Moore-Penrose pseudoinverse via SVD with the standard rank cutoff.
inline Matrix pseudoinverse(const Matrix& M) {
  SvdResult s = svd(M);
  if (s.rank == 0) return Matrix::Zero(M.cols(), M.rows());
  Matrix Ur = s.U.leftCols(s.rank);
  Matrix Vr = s.V.leftCols(s.rank);
  Vector inv = s.singular_values.head(s.rank).cwiseInverse();
  return Vr * inv.asDiagonal() * Ur.transpose();
}

// argmin_p ||design p - target||^2 + lambda ||p||^2.
// lambda = 0 with a rank-deficient design returns the minimum-norm minimizer.
inline Vector ridge_solve(const Matrix& design, const Vector& target, double lambda) {
  require_finite(design, "ridge_solve design");
  require_finite(target, "ridge_solve target");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw invalid_input_error("ridge_solve: lambda must be finite and >= 0");
  if (design.rows() != target.size())
    throw invalid_input_error("ridge_solve: design rows != target size");
  const Index d = design.cols();
  if (design.rows() == 0) return Vector::Zero(d);
  if (lambda > 0.0) {
    Matrix gram = design.transpose() * design;
    gram.diagonal().array() += lambda;
    return Eigen::LDLT<Matrix>(gram).solve(design.transpose() * target);
  }
  return pseudoinverse(design) * target;
}

// Splits x into its component in the column span of B and the orthogonal rest.
inline std::pair<Vector, Vector> project_span(const Matrix& B, const Vector& x) {
  require_finite(B, "project_span B");
  require_finite(x, "project_span x");
  if (B.rows() != x.size()) throw invalid_input_error("project_span: dimension mismatch");
  if (B.cols() == 0) return {Vector::Zero(x.size()), x};
  SvdResult s = svd(B);
  if (s.rank == 0) return {Vector::Zero(x.size()), x};
  Matrix Ur = s.U.leftCols(s.rank);
  Vector par = Ur * (Ur.transpose() * x);
  return {par, x - par};
}

// Nth largest of a multiset (duplicates count). Returns -inf when the set
// holds fewer than N values, so that any condition phrased as
// "score > nth_largest(...)" is vacuously satisfied.
inline double nth_largest(std::vector<double> values, int N) {
  if (N < 1) throw invalid_input_error("nth_largest: N must be >= 1");
  if (static_cast<int>(values.size()) < N) return -std::numeric_limits<double>::infinity();
  std::nth_element(values.begin(), values.begin() + (N - 1), values.end(), std::greater<double>());
  return values[static_cast<std::size_t>(N - 1)];
}

}  // namespace reach

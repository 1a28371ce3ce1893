#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "reach/config.hpp"
#include "reach/errors.hpp"
#include "reach/numerics.hpp"

namespace reach {

// Sign convention for folding biases into the least-squares user update.
// The update in the source model adds (b + c_u + mu) to the ratings before
// solving; conventional practice subtracts them. Both are supported.
enum class BiasSign { paper_literal, residual };

inline double bias_sign_value(BiasSign s) { return s == BiasSign::paper_literal ? 1.0 : -1.0; }

inline std::string to_string(BiasSign s) {
  return s == BiasSign::paper_literal ? "paper-literal" : "residual";
}

inline BiasSign bias_sign_from_string(const std::string& s) {
  if (s == "paper-literal") return BiasSign::paper_literal;
  if (s == "residual") return BiasSign::residual;
  throw parse_error("unknown bias_sign value: " + s);
}

// Linear preference model r_hat = mu + b_i + c_u + q_i' p. Row i of Q is
// the factor of item i. The user side (P, c) is optional and only carried
// for trained bundles; audits derive user factors from histories.
struct FactorModel {
  Matrix Q;  // m x d
  Vector b;  // m
  double mu = 0.0;
  double lambda = 0.0;
  BiasSign bias_sign = BiasSign::paper_literal;
  Matrix P;  // n x d, may be empty
  Vector c;  // n

  Index d() const { return Q.cols(); }
  Index m() const { return Q.rows(); }
  Index n_users() const { return P.rows(); }

  void validate() const {
    if (m() < 1 || d() < 1) throw invalid_input_error("FactorModel: need m >= 1 and d >= 1");
    if (b.size() != m()) throw invalid_input_error("FactorModel: bias length != m");
    require_finite(Q, "FactorModel.Q");
    require_finite(b, "FactorModel.b");
    if (!std::isfinite(mu) || !std::isfinite(lambda) || lambda < 0.0)
      throw invalid_input_error("FactorModel: bad mu/lambda");
    if (P.size() && (P.cols() != d() || c.size() != P.rows()))
      throw invalid_input_error("FactorModel: user table shape mismatch");
  }
};

// One user's observed items (ascending ids) and the aligned rating values.
struct RatingHistory {
  long long user_id = 0;
  std::vector<int> omega;
  Vector ratings;
  double c_u = 0.0;
};

// Immutable ratings (omega0, r0), mutable support omega_m, and the allowed
// rating interval. Sets are kept sorted and disjoint.
struct ModificationSet {
  std::vector<int> omega0;
  Vector r0;
  std::vector<int> omega_m;
  double rating_lo = 0.0;
  double rating_hi = 5.0;
};

// p = v0 + B a. W is the ridge inverse that produced them (empty for
// caller-supplied affine updates).
struct UserControl {
  Matrix B;   // d x |omega_m|
  Vector v0;  // d
  Matrix W;   // d x d
};

// General affine user update p = A r|support + dvec; columns of A follow
// the sorted union of omega0 and omega_m.
struct AffineUpdate {
  Matrix A;
  Vector dvec;
};

namespace detail {

inline bool sorted_unique(const std::vector<int>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] <= v[i - 1]) return false;
  return true;
}

inline bool contains(const std::vector<int>& sorted, int id) {
  return std::binary_search(sorted.begin(), sorted.end(), id);
}

inline std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline Matrix rows_of(const Matrix& Q, const std::vector<int>& ids) {
  Matrix out(static_cast<Index>(ids.size()), Q.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Index>(i)) = Q.row(ids[i]);
  return out;
}

}  // namespace detail

inline void validate_history(const FactorModel& model, const RatingHistory& hist) {
  if (!detail::sorted_unique(hist.omega))
    throw invalid_input_error("RatingHistory: omega must be strictly ascending");
  if (hist.ratings.size() != static_cast<Index>(hist.omega.size()))
    throw invalid_input_error("RatingHistory: ratings length != |omega|");
  if (!hist.omega.empty() && (hist.omega.front() < 0 || hist.omega.back() >= model.m()))
    throw invalid_input_error("RatingHistory: item id out of range");
  require_finite(hist.ratings, "RatingHistory.ratings");
}

inline void validate_mods(const FactorModel& model, const ModificationSet& mods) {
  if (!detail::sorted_unique(mods.omega0) || !detail::sorted_unique(mods.omega_m))
    throw invalid_input_error("ModificationSet: sets must be strictly ascending");
  std::vector<int> inter;
  std::set_intersection(mods.omega0.begin(), mods.omega0.end(), mods.omega_m.begin(),
                        mods.omega_m.end(), std::back_inserter(inter));
  if (!inter.empty()) throw invalid_input_error("ModificationSet: omega0 and omega_m overlap");
  if (mods.r0.size() != static_cast<Index>(mods.omega0.size()))
    throw invalid_input_error("ModificationSet: r0 length != |omega0|");
  if (!(mods.rating_lo <= mods.rating_hi))
    throw invalid_input_error("ModificationSet: rating_lo > rating_hi");
  for (int id : mods.omega0)
    if (id < 0 || id >= model.m()) throw invalid_input_error("ModificationSet: id out of range");
  for (int id : mods.omega_m)
    if (id < 0 || id >= model.m()) throw invalid_input_error("ModificationSet: id out of range");
}

inline double predict(const FactorModel& model, const Vector& p, double c_u, int item) {
  if (item < 0 || item >= model.m()) throw invalid_input_error("predict: item id out of range");
  return model.mu + model.b(item) + c_u + model.Q.row(item).dot(p);
}

// Least-squares user factor from a rating history; empty history is the
// cold-start zero vector.
inline Vector user_factor(const FactorModel& model, const RatingHistory& hist) {
  validate_history(model, hist);
  if (hist.omega.empty()) return Vector::Zero(model.d());
  const Matrix Qw = detail::rows_of(model.Q, hist.omega);
  Vector target = hist.ratings;
  const double s = bias_sign_value(model.bias_sign);
  for (std::size_t i = 0; i < hist.omega.size(); ++i)
    target(static_cast<Index>(i)) += s * (model.b(hist.omega[i]) + hist.c_u + model.mu);
  return ridge_solve(Qw, target, model.lambda);
}

// Top-N unseen items by predicted rating; ties broken by lower item id.
inline std::vector<int> top_n(const FactorModel& model, const Vector& p, double c_u,
                              const std::vector<int>& omega, int N) {
  if (N < 1) throw invalid_input_error("top_n: N must be >= 1");
  std::vector<std::pair<double, int>> scored;
  scored.reserve(static_cast<std::size_t>(model.m()));
  for (Index i = 0; i < model.m(); ++i) {
    if (detail::contains(omega, static_cast<int>(i))) continue;
    scored.emplace_back(predict(model, p, c_u, static_cast<int>(i)), static_cast<int>(i));
  }
  const std::size_t take = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(N));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<int> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
  return out;
}

// Control matrix and anchor of the post-action factor p = v0 + B a:
//   W  = (Q_O' Q_O + lambda I)^-1      (pseudoinverse when singular)
//   B  = W Q_Om'
//   v0 = W Q_O0' r0  +/-  W Q_O' (b_O + c_u + mu)
inline UserControl control(const FactorModel& model, const ModificationSet& mods, double c_u) {
  validate_mods(model, mods);
  const std::vector<int> omega = detail::sorted_union(mods.omega0, mods.omega_m);
  const Index d = model.d();
  UserControl ctrl;
  if (omega.empty()) {
    ctrl.W = model.lambda > 0.0 ? Matrix((1.0 / model.lambda) * Matrix::Identity(d, d))
                                : Matrix::Zero(d, d);
    ctrl.B = Matrix(d, 0);
    ctrl.v0 = Vector::Zero(d);
    return ctrl;
  }
  const Matrix Qo = detail::rows_of(model.Q, omega);
  Matrix gram = Qo.transpose() * Qo;
  if (model.lambda > 0.0) {
    gram.diagonal().array() += model.lambda;
    ctrl.W = Eigen::LDLT<Matrix>(gram).solve(Matrix::Identity(d, d));
  } else {
    ctrl.W = pseudoinverse(gram);
  }
  ctrl.B = ctrl.W * detail::rows_of(model.Q, mods.omega_m).transpose();
  ctrl.v0 = Vector::Zero(d);
  if (!mods.omega0.empty())
    ctrl.v0 += ctrl.W * (detail::rows_of(model.Q, mods.omega0).transpose() * mods.r0);
  Vector bias(static_cast<Index>(omega.size()));
  for (std::size_t i = 0; i < omega.size(); ++i)
    bias(static_cast<Index>(i)) = model.b(omega[i]) + c_u + model.mu;
  ctrl.v0 += bias_sign_value(model.bias_sign) * (ctrl.W * (Qo.transpose() * bias));
  return ctrl;
}

// Item-region inequalities G_i p > h_i: one row (q_i - q_j) and entry
// (b_j - b_i) per unseen competitor j, in ascending j order.
inline std::pair<Matrix, Vector> item_region(const FactorModel& model, int item,
                                             const std::vector<int>& omega) {
  if (item < 0 || item >= model.m()) throw invalid_input_error("item_region: item out of range");
  if (detail::contains(omega, item))
    throw invalid_input_error("item_region: item " + std::to_string(item) + " is in omega");
  std::vector<int> rivals;
  rivals.reserve(static_cast<std::size_t>(model.m()));
  for (Index j = 0; j < model.m(); ++j)
    if (static_cast<int>(j) != item && !detail::contains(omega, static_cast<int>(j)))
      rivals.push_back(static_cast<int>(j));
  Matrix G(static_cast<Index>(rivals.size()), model.d());
  Vector h(static_cast<Index>(rivals.size()));
  for (std::size_t k = 0; k < rivals.size(); ++k) {
    G.row(static_cast<Index>(k)) = model.Q.row(item) - model.Q.row(rivals[k]);
    h(static_cast<Index>(k)) = model.b(rivals[k]) - model.b(item);
  }
  return {std::move(G), std::move(h)};
}

// History edits: every observed rating is mutable.
inline ModificationSet mods_history_edits(const RatingHistory& hist, double lo, double hi) {
  ModificationSet mods;
  mods.omega_m = hist.omega;
  mods.r0 = Vector(0);
  mods.rating_lo = lo;
  mods.rating_hi = hi;
  if (!(lo <= hi)) throw invalid_input_error("mods_history_edits: lo > hi");
  return mods;
}

// Reactions: the history is frozen, only the recommended batch is rated.
inline ModificationSet mods_reactions(const RatingHistory& hist,
                                      const std::vector<int>& recommended, double lo, double hi) {
  ModificationSet mods;
  mods.omega0 = hist.omega;
  mods.r0 = hist.ratings;
  mods.omega_m = recommended;
  std::sort(mods.omega_m.begin(), mods.omega_m.end());
  if (std::adjacent_find(mods.omega_m.begin(), mods.omega_m.end()) != mods.omega_m.end())
    throw invalid_input_error("mods_reactions: duplicate recommended item");
  for (int id : mods.omega_m)
    if (detail::contains(hist.omega, id))
      throw invalid_input_error("mods_reactions: recommended item " + std::to_string(id) +
                                " already rated");
  mods.rating_lo = lo;
  mods.rating_hi = hi;
  if (!(lo <= hi)) throw invalid_input_error("mods_reactions: lo > hi");
  return mods;
}

// Control decomposition for a caller-supplied affine update. Columns of
// update.A follow the sorted union of the modification supports.
inline UserControl affine_control(const AffineUpdate& update, const ModificationSet& mods) {
  const std::vector<int> support = detail::sorted_union(mods.omega0, mods.omega_m);
  if (update.A.cols() != static_cast<Index>(support.size()))
    throw invalid_input_error("affine_control: A columns != support size");
  if (update.dvec.size() != update.A.rows())
    throw invalid_input_error("affine_control: dvec length != A rows");
  require_finite(update.A, "affine_control A");
  require_finite(update.dvec, "affine_control dvec");
  UserControl ctrl;
  ctrl.B = Matrix(update.A.rows(), static_cast<Index>(mods.omega_m.size()));
  ctrl.v0 = update.dvec;
  Index bcol = 0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (detail::contains(mods.omega_m, support[k])) {
      ctrl.B.col(bcol++) = update.A.col(static_cast<Index>(k));
    } else {
      const auto it = std::lower_bound(mods.omega0.begin(), mods.omega0.end(), support[k]);
      const Index pos = static_cast<Index>(it - mods.omega0.begin());
      ctrl.v0 += update.A.col(static_cast<Index>(k)) * mods.r0(pos);
    }
  }
  ctrl.W = Matrix(0, 0);
  return ctrl;
}

}  // namespace reach

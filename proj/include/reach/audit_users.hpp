#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "reach/audit_items.hpp"
#include "reach/config.hpp"
#include "reach/lp.hpp"
#include "reach/model.hpp"
#include "reach/numerics.hpp"

namespace reach {

enum class RecourseMode { history_edits, reactions };

inline std::string to_string(RecourseMode m) {
  return m == RecourseMode::history_edits ? "history-edits" : "reactions";
}

// Which items the difficulty bound averages over: the screened reachable
// set, or every unseen item.
enum class AverageSet { reachable, all_unseen };

inline std::string to_string(AverageSet a) {
  return a == AverageSet::reachable ? "reachable" : "all";
}

namespace detail {

// Test point of the sufficient condition: Pi_B q_i + Pi_B_perp v0, i.e.
// v0 + B a_i with a_i = argmin ||B a + v0 - q_i||.
inline Vector aligned_test_point(const UserControl& ctrl, const Vector& qi) {
  auto [q_par, q_perp] = project_span(ctrl.B, qi);
  auto [v_par, v_perp] = project_span(ctrl.B, ctrl.v0);
  (void)q_perp;
  (void)v_par;
  return q_par + v_perp;
}

inline std::vector<int> unseen_items(const FactorModel& model, const std::vector<int>& omega) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(model.m()));
  for (Index i = 0; i < model.m(); ++i)
    if (!contains(omega, static_cast<int>(i))) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace detail

// Sufficient condition for reachability of item i under control (B, v0):
//   ||Pi_B q_i||^2 + q_i' Pi_B_perp v0 + b_i
//     > maxN over unseen j != i of (q_j' Pi_B q_i + q_j' Pi_B_perp v0 + b_j).
// Valid as a reachability proof for unbounded ratings.
inline bool recourse_sufficient(const FactorModel& model, const UserControl& ctrl, int item,
                                const std::vector<int>& omega, int N) {
  if (N < 1) throw invalid_input_error("recourse_sufficient: N must be >= 1");
  if (item < 0 || item >= model.m())
    throw invalid_input_error("recourse_sufficient: item out of range");
  if (detail::contains(omega, item))
    throw invalid_input_error("recourse_sufficient: item in omega");
  const Vector t = detail::aligned_test_point(ctrl, model.Q.row(item).transpose());
  const Vector scores = model.Q * t + model.b;
  std::vector<double> rivals;
  rivals.reserve(static_cast<std::size_t>(model.m()));
  for (Index j = 0; j < model.m(); ++j)
    if (static_cast<int>(j) != item && !detail::contains(omega, static_cast<int>(j)))
      rivals.push_back(scores(j));
  return scores(item) - nth_largest(std::move(rivals), N) > 0.0;
}

// Membership of the aligned test point in the top-N region of item i,
// checked by sorting all unseen scores.
inline bool alignment_check(const FactorModel& model, const UserControl& ctrl, int item,
                            const std::vector<int>& omega, int N) {
  if (N < 1) throw invalid_input_error("alignment_check: N must be >= 1");
  if (detail::contains(omega, item)) throw invalid_input_error("alignment_check: item in omega");
  const Vector t = detail::aligned_test_point(ctrl, model.Q.row(item).transpose());
  const Vector scores = model.Q * t + model.b;
  std::vector<double> rivals;
  for (Index j = 0; j < model.m(); ++j)
    if (static_cast<int>(j) != item && !detail::contains(omega, static_cast<int>(j)))
      rivals.push_back(scores(j));
  std::sort(rivals.begin(), rivals.end(), std::greater<double>());
  if (static_cast<int>(rivals.size()) < N) return true;
  return scores(item) > rivals[static_cast<std::size_t>(N - 1)];
}

struct RecourseRecord {
  long long user_id = 0;
  RecourseMode mode = RecourseMode::history_edits;
  int history_len = 0;
  long unseen_count = 0;
  long reachable_count = 0;
  double reachable_fraction = 0.0;
  std::optional<std::vector<int>> reachable_items;
};

// Screens every unseen item with the sufficient condition and reports the
// reachable fraction. Reactions mode needs the recommended batch.
inline RecourseRecord user_recourse(const FactorModel& model, const RatingHistory& hist,
                                    RecourseMode mode, int N,
                                    const std::vector<int>* recommended = nullptr,
                                    bool keep_items = false, double lo = 0.0, double hi = 5.0) {
  validate_history(model, hist);
  ModificationSet mods;
  if (mode == RecourseMode::history_edits) {
    mods = mods_history_edits(hist, lo, hi);
  } else {
    if (!recommended)
      throw invalid_input_error("user_recourse: reactions mode needs a recommended set");
    mods = mods_reactions(hist, *recommended, lo, hi);
  }
  const UserControl ctrl = control(model, mods, hist.c_u);
  const std::vector<int> omega = detail::sorted_union(mods.omega0, mods.omega_m);
  RecourseRecord rec;
  rec.user_id = hist.user_id;
  rec.mode = mode;
  rec.history_len = static_cast<int>(hist.omega.size());
  if (keep_items) rec.reachable_items.emplace();
  for (int i : detail::unseen_items(model, omega)) {
    ++rec.unseen_count;
    if (recourse_sufficient(model, ctrl, i, omega, N)) {
      ++rec.reachable_count;
      if (keep_items) rec.reachable_items->push_back(i);
    }
  }
  rec.reachable_fraction =
      rec.unseen_count ? static_cast<double>(rec.reachable_count) / rec.unseen_count : 0.0;
  return rec;
}

struct ExactRecourse {
  bool feasible = false;
  Vector action;
  LpFeasibility lp;
};

// Exact top-1 reachability of item i under bounded actions: strict
// feasibility of G_i B a >= h_i - G_i v0 with box rows lo <= a <= hi.
// The strict margin applies to the region rows only.
inline ExactRecourse exact_recourse_top1(const FactorModel& model, const UserControl& ctrl,
                                         int item, const std::vector<int>& omega, double lo,
                                         double hi, const Tolerances& tol = {}) {
  if (!(lo <= hi)) throw invalid_input_error("exact_recourse_top1: lo > hi");
  auto [G, h] = item_region(model, item, omega);
  const Index k = ctrl.B.cols();
  const Matrix M = G * ctrl.B;
  const Vector rhs_region = (h - G * ctrl.v0).array() + strict_eps_for(M, tol);
  const Index nlo = std::isfinite(lo) ? k : 0;
  const Index nhi = std::isfinite(hi) ? k : 0;
  Matrix A = Matrix::Zero(M.rows() + nlo + nhi, k);
  Vector rhs(A.rows());
  A.topRows(M.rows()) = M;
  rhs.head(M.rows()) = rhs_region;
  Index row = M.rows();
  for (Index j = 0; j < nlo; ++j, ++row) {
    A(row, j) = 1.0;
    rhs(row) = lo;
  }
  for (Index j = 0; j < nhi; ++j, ++row) {
    A(row, j) = -1.0;
    rhs(row) = -hi;
  }
  ExactRecourse out;
  out.lp = lp_feasible_geq(A, rhs, tol);
  out.feasible = out.lp.feasible;
  if (out.feasible) out.action = out.lp.witness;
  return out;
}

struct DifficultyRecord {
  long long user_id = 0;
  int item_id = 0;
  std::optional<double> exact_cost;          // l1 optimum of the recourse program
  std::optional<double> feasible_point_cost;  // l2 cost at the aligned test point
  double bound = 0.0;                         // ||B+|| * ||q_i - (p_u [+ p_b])||
  bool alignment_holds = false;
  Vector p_b;
};

namespace detail {

struct DifficultyContext {
  UserControl ctrl;
  std::vector<int> omega;
  Vector p_u;       // pre-action user factor
  Vector p_b;       // reaction bias drift (zero for history edits)
  Vector p_center;  // p_u + p_b
  Vector a_hat;     // cost anchor over omega_m
  Matrix pinv_B;
  double b_dagger_norm = 0.0;
};

inline DifficultyContext difficulty_context(const FactorModel& model, const RatingHistory& hist,
                                            RecourseMode mode,
                                            const std::vector<int>* recommended, double lo,
                                            double hi) {
  DifficultyContext ctx;
  ModificationSet mods;
  if (mode == RecourseMode::history_edits) {
    mods = mods_history_edits(hist, lo, hi);
    ctx.a_hat = hist.ratings;
  } else {
    if (!recommended)
      throw invalid_input_error("difficulty: reactions mode needs a recommended set");
    mods = mods_reactions(hist, *recommended, lo, hi);
  }
  ctx.ctrl = control(model, mods, hist.c_u);
  ctx.omega = sorted_union(mods.omega0, mods.omega_m);
  ctx.p_u = user_factor(model, hist);
  ctx.p_b = Vector::Zero(model.d());
  if (mode == RecourseMode::reactions) {
    Vector bias(static_cast<Index>(mods.omega_m.size()));
    ctx.a_hat = Vector(static_cast<Index>(mods.omega_m.size()));
    for (std::size_t j = 0; j < mods.omega_m.size(); ++j) {
      bias(static_cast<Index>(j)) = model.b(mods.omega_m[j]) + hist.c_u + model.mu;
      ctx.a_hat(static_cast<Index>(j)) = predict(model, ctx.p_u, hist.c_u, mods.omega_m[j]);
    }
    if (!mods.omega_m.empty())
      ctx.p_b = bias_sign_value(model.bias_sign) *
                (ctx.ctrl.W * (rows_of(model.Q, mods.omega_m).transpose() * bias));
  }
  ctx.p_center = ctx.p_u + ctx.p_b;
  ctx.pinv_B = pseudoinverse(ctx.ctrl.B);
  const SvdResult s = svd(ctx.ctrl.B);
  ctx.b_dagger_norm = s.rank > 0 ? 1.0 / s.singular_values(s.rank - 1) : 0.0;
  return ctx;
}

inline void fill_bound_fields(const FactorModel& model, const DifficultyContext& ctx, int item,
                              int N, DifficultyRecord& rec) {
  const Vector qi = model.Q.row(item).transpose();
  rec.feasible_point_cost = (ctx.pinv_B * (qi - ctx.p_center)).norm();
  rec.bound = ctx.b_dagger_norm * (qi - ctx.p_center).norm();
  rec.alignment_holds = alignment_check(model, ctx.ctrl, item, ctx.omega, N);
  rec.p_b = ctx.p_b;
}

}  // namespace detail

// Exact l1 difficulty of reaching item i as the top-1 recommendation. The
// cost anchor is the existing ratings (history edits) or the predicted
// ratings of the recommended batch (reactions).
inline DifficultyRecord difficulty_l1(const FactorModel& model, const RatingHistory& hist,
                                      int item, RecourseMode mode, double lo, double hi,
                                      const std::vector<int>* recommended = nullptr,
                                      const Tolerances& tol = {}) {
  validate_history(model, hist);
  detail::DifficultyContext ctx = detail::difficulty_context(model, hist, mode, recommended, lo, hi);
  if (detail::contains(ctx.omega, item))
    throw invalid_input_error("difficulty_l1: item is in the seen set");
  auto [G, h] = item_region(model, item, ctx.omega);
  const double eps = strict_eps_for(G * ctx.ctrl.B, tol);
  const L1Recourse sol =
      min_l1_recourse(ctx.ctrl.B, ctx.ctrl.v0, G, h, ctx.a_hat, lo, hi, eps, tol);
  DifficultyRecord rec;
  rec.user_id = hist.user_id;
  rec.item_id = item;
  if (sol.feasible) rec.exact_cost = sol.cost;
  detail::fill_bound_fields(model, ctx, item, 1, rec);
  return rec;
}

struct DifficultyReport {
  long long user_id = 0;
  RecourseMode mode = RecourseMode::history_edits;
  AverageSet average_set = AverageSet::reachable;
  double b_dagger_norm = 0.0;
  double aggregate_bound = 0.0;
  long averaged_count = 0;
  std::vector<DifficultyRecord> per_item;
};

// The spectral difficulty bound ||B+|| * mean ||q_i - (p_u [+ p_b])||,
// averaged over the screened reachable set or over all unseen items.
// Assumes unbounded ratings; per-item records carry the aligned-test-point
// cost and alignment flag.
inline DifficultyReport difficulty_bound(const FactorModel& model, const RatingHistory& hist,
                                         RecourseMode mode,
                                         const std::vector<int>* recommended = nullptr,
                                         AverageSet avg = AverageSet::reachable) {
  validate_history(model, hist);
  detail::DifficultyContext ctx = detail::difficulty_context(
      model, hist, mode, recommended, -std::numeric_limits<double>::infinity(),
      std::numeric_limits<double>::infinity());
  DifficultyReport report;
  report.user_id = hist.user_id;
  report.mode = mode;
  report.average_set = avg;
  report.b_dagger_norm = ctx.b_dagger_norm;
  double dist_sum = 0.0;
  for (int i : detail::unseen_items(model, ctx.omega)) {
    DifficultyRecord rec;
    rec.user_id = hist.user_id;
    rec.item_id = i;
    detail::fill_bound_fields(model, ctx, i, 1, rec);
    const bool count_it = avg == AverageSet::all_unseen || rec.alignment_holds;
    if (count_it) {
      dist_sum += (model.Q.row(i).transpose() - ctx.p_center).norm();
      ++report.averaged_count;
    }
    report.per_item.push_back(std::move(rec));
  }
  report.aggregate_bound =
      report.averaged_count
          ? ctx.b_dagger_norm * dist_sum / static_cast<double>(report.averaged_count)
          : 0.0;
  return report;
}

struct ColdStartEval {
  std::vector<int> candidate;
  long recourse_count = 0;
  double b_dagger_norm = 0.0;
};

// Onboarding-set evaluation: v0 = 0 and B = W Q_omega', so recourse is
// screened purely through the geometry of the multiplied factors, and
// ||B+|| follows from the singular values of Q_omega.
inline ColdStartEval coldstart_eval(const FactorModel& model, const std::vector<int>& candidate,
                                    int N) {
  if (candidate.empty()) throw invalid_input_error("coldstart_eval: empty candidate set");
  if (N < 1) throw invalid_input_error("coldstart_eval: N must be >= 1");
  ColdStartEval out;
  out.candidate = candidate;
  std::sort(out.candidate.begin(), out.candidate.end());
  if (std::adjacent_find(out.candidate.begin(), out.candidate.end()) != out.candidate.end())
    throw invalid_input_error("coldstart_eval: duplicate candidate item");
  ModificationSet mods;
  mods.omega_m = out.candidate;
  mods.rating_lo = -std::numeric_limits<double>::infinity();
  mods.rating_hi = std::numeric_limits<double>::infinity();
  UserControl ctrl = control(model, mods, 0.0);
  ctrl.v0.setZero();
  for (int i : detail::unseen_items(model, out.candidate))
    if (recourse_sufficient(model, ctrl, i, out.candidate, N)) ++out.recourse_count;

  const SvdResult s = svd(detail::rows_of(model.Q, out.candidate));
  double worst = 0.0;
  for (Index i = 0; i < s.rank; ++i) {
    const double sv = s.singular_values(i);
    worst = std::max(worst, (sv * sv + model.lambda) / sv);
  }
  out.b_dagger_norm = s.rank > 0 ? worst : std::numeric_limits<double>::infinity();
  return out;
}

// Reaction-set policies for the experiment pipelines.
enum class ReactionPolicy { random, top };

inline std::string to_string(ReactionPolicy p) {
  return p == ReactionPolicy::random ? "random" : "top";
}

// Deterministic per-user draw: the stream is seeded by (seed, user_id) so
// each user's set is stable no matter how users are batched.
inline std::vector<int> reaction_set(const FactorModel& model, const RatingHistory& hist,
                                     ReactionPolicy policy, int size, std::uint64_t seed) {
  if (size < 1) throw invalid_input_error("reaction_set: size must be >= 1");
  const std::vector<int> unseen = detail::unseen_items(model, hist.omega);
  if (policy == ReactionPolicy::top) {
    const Vector p = user_factor(model, hist);
    return top_n(model, p, hist.c_u, hist.omega, size);
  }
  std::uint64_t mix = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(hist.user_id) + 1);
  mix ^= mix >> 30;
  mix *= 0xbf58476d1ce4e5b9ULL;
  mix ^= mix >> 27;
  std::mt19937_64 rng(mix);
  std::vector<int> pool = unseen;
  const int take = std::min<int>(size, static_cast<int>(pool.size()));
  for (int i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + take);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace reach

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "reach/config.hpp"
#include "reach/lp.hpp"
#include "reach/model.hpp"
#include "reach/numerics.hpp"
#include "reach/parallel.hpp"

namespace reach {

struct ItemAuditRecord {
  int item_id = 0;
  double delta = 0.0;
  double gram_slack = 0.0;  // bias-free A_ii - maxN A_ij for A = QQ'
  bool aligned_reachable = false;
  std::optional<bool> exact_top1;
  long n_ratings = 0;
  double mean_rating = std::numeric_limits<double>::quiet_NaN();
};

struct ItemAuditSummary {
  int N = 1;
  int N_h = 0;
  double availability_lower_bound = 0.0;
  std::vector<ItemAuditRecord> per_item;
  double eps_scale = 0.0;  // config echo
};

struct ItemAuditOptions {
  bool exact_top1 = false;  // also run the LP on every item (expensive)
  int jobs = 1;
  Index block = 256;  // Gram rows materialized at a time
  Tolerances tol{};
};

// delta_i = ||q_i||^2 + b_i - maxN over unseen j != i of (q_j' q_i + b_j).
// Fewer than N competitors leaves maxN at -inf, making the item trivially
// aligned-reachable.
inline double aligned_delta(const FactorModel& model, int item, const std::vector<int>& omega,
                            int N) {
  if (N < 1) throw invalid_input_error("aligned_delta: N must be >= 1");
  if (item < 0 || item >= model.m())
    throw invalid_input_error("aligned_delta: item out of range");
  if (detail::contains(omega, item)) throw invalid_input_error("aligned_delta: item in omega");
  const Vector qi = model.Q.row(item).transpose();
  const Vector scores = model.Q * qi + model.b;
  std::vector<double> rivals;
  rivals.reserve(static_cast<std::size_t>(model.m()));
  for (Index j = 0; j < model.m(); ++j)
    if (static_cast<int>(j) != item && !detail::contains(omega, static_cast<int>(j)))
      rivals.push_back(scores(j));
  return scores(item) - nth_largest(std::move(rivals), N);
}

// The whole-model audit: delta_i with an empty history at N' = N + N_h for
// every item; the aligned-reachable share lower-bounds availability.
inline ItemAuditSummary item_audit(const FactorModel& model, int N, int N_h,
                                   const ItemAuditOptions& opts = {}) {
  if (N < 1 || N_h < 0) throw invalid_input_error("item_audit: need N >= 1 and N_h >= 0");
  model.validate();
  const int Np = N + N_h;
  const Index m = model.m();
  ItemAuditSummary summary;
  summary.N = N;
  summary.N_h = N_h;
  summary.per_item.resize(static_cast<std::size_t>(m));
  summary.eps_scale = opts.tol.strict_eps_scale;

  const Index block = std::max<Index>(1, opts.block);
  const long nblocks = static_cast<long>((m + block - 1) / block);
  parallel_for(nblocks, opts.jobs, [&](long bi) {
    const Index lo = static_cast<Index>(bi) * block;
    const Index hi = std::min(m, lo + block);
    const Matrix scores =
        model.Q.middleRows(lo, hi - lo) * model.Q.transpose();  // (hi-lo) x m
    std::vector<double> rivals, rivals_nb;
    for (Index i = lo; i < hi; ++i) {
      rivals.clear();
      rivals_nb.clear();
      rivals.reserve(static_cast<std::size_t>(m - 1));
      rivals_nb.reserve(static_cast<std::size_t>(m - 1));
      for (Index j = 0; j < m; ++j) {
        if (j == i) continue;
        rivals.push_back(scores(i - lo, j) + model.b(j));
        rivals_nb.push_back(scores(i - lo, j));
      }
      ItemAuditRecord& rec = summary.per_item[static_cast<std::size_t>(i)];
      rec.item_id = static_cast<int>(i);
      rec.delta = scores(i - lo, i) + model.b(i) - nth_largest(rivals, Np);
      rec.gram_slack = scores(i - lo, i) - nth_largest(rivals_nb, Np);
      rec.aligned_reachable = rec.delta > 0.0;
    }
  });

  if (opts.exact_top1) {
    parallel_for(static_cast<long>(m), opts.jobs, [&](long i) {
      auto [G, h] = item_region(model, static_cast<int>(i), {});
      const double eps = strict_eps_for(G, opts.tol);
      summary.per_item[static_cast<std::size_t>(i)].exact_top1 =
          lp_strict_feasible(G, h, eps, opts.tol).feasible;
    });
  }

  long reachable = 0;
  for (const auto& rec : summary.per_item) reachable += rec.aligned_reachable ? 1 : 0;
  summary.availability_lower_bound = static_cast<double>(reachable) / static_cast<double>(m);
  return summary;
}

struct ExactAvailability {
  bool available = false;
  LpFeasibility lp;
};

// Exact top-1 availability: strict feasibility of the item-region.
inline ExactAvailability exact_top1_available(const FactorModel& model, int item,
                                              const std::vector<int>& omega,
                                              const Tolerances& tol = {}) {
  auto [G, h] = item_region(model, item, omega);
  ExactAvailability out;
  out.lp = lp_strict_feasible(G, h, strict_eps_for(G, tol), tol);
  out.available = out.lp.feasible;
  return out;
}

// Share of unseen items surfaced by at least one probe point. A lower
// bound on availability for the same N and omega.
inline double sampled_availability(const FactorModel& model, const std::vector<Vector>& probes,
                                   const std::vector<int>& omega, int N) {
  if (probes.empty()) throw invalid_input_error("sampled_availability: no probes");
  std::vector<char> hit(static_cast<std::size_t>(model.m()), 0);
  for (const Vector& p : probes)
    for (int i : top_n(model, p, 0.0, omega, N)) hit[static_cast<std::size_t>(i)] = 1;
  long unseen = 0, found = 0;
  for (Index i = 0; i < model.m(); ++i) {
    if (detail::contains(omega, static_cast<int>(i))) continue;
    ++unseen;
    found += hit[static_cast<std::size_t>(i)];
  }
  return unseen ? static_cast<double>(found) / static_cast<double>(unseen) : 0.0;
}

struct Cdf {
  std::vector<double> x;
  std::vector<double> y;
};

struct PopularityStats {
  Cdf count_available, count_unavailable, count_all;
  Cdf mean_available, mean_unavailable, mean_all;
};

namespace detail {

inline Cdf empirical_cdf(std::vector<double> values) {
  Cdf out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.x.push_back(values[i]);
    out.y.push_back(static_cast<double>(i + 1) / n);
  }
  return out;
}

}  // namespace detail

// Empirical CDFs of the two popularity measures, split by availability.
// Items with no ratings are kept in the count CDFs (at 0) but have no
// defined mean rating and are left out of the mean CDFs.
inline PopularityStats popularity_stats(const std::vector<long>& n_ratings,
                                        const std::vector<double>& mean_rating,
                                        const std::vector<char>& available) {
  if (n_ratings.size() != available.size() || mean_rating.size() != available.size())
    throw invalid_input_error("popularity_stats: flags must cover all items");
  std::vector<double> cnt_av, cnt_un, cnt_all, mean_av, mean_un, mean_all;
  for (std::size_t i = 0; i < available.size(); ++i) {
    const double cnt = static_cast<double>(n_ratings[i]);
    cnt_all.push_back(cnt);
    (available[i] ? cnt_av : cnt_un).push_back(cnt);
    if (n_ratings[i] > 0) {
      mean_all.push_back(mean_rating[i]);
      (available[i] ? mean_av : mean_un).push_back(mean_rating[i]);
    }
  }
  PopularityStats out;
  out.count_available = detail::empirical_cdf(std::move(cnt_av));
  out.count_unavailable = detail::empirical_cdf(std::move(cnt_un));
  out.count_all = detail::empirical_cdf(std::move(cnt_all));
  out.mean_available = detail::empirical_cdf(std::move(mean_av));
  out.mean_unavailable = detail::empirical_cdf(std::move(mean_un));
  out.mean_all = detail::empirical_cdf(std::move(mean_all));
  return out;
}

// Per-item slack of the Gram-matrix audit constraint A_ii >= maxN A_ij for
// A = QQ'. Equals aligned_delta on a bias-free model with empty history.
inline std::vector<double> gram_constraint_slack(const FactorModel& model, int N) {
  if (N < 1) throw invalid_input_error("gram_constraint_slack: N must be >= 1");
  const Index m = model.m();
  std::vector<double> slack(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const Vector row = model.Q * model.Q.row(i).transpose();
    std::vector<double> rivals;
    rivals.reserve(static_cast<std::size_t>(m - 1));
    for (Index j = 0; j < m; ++j)
      if (j != i) rivals.push_back(row(j));
    slack[static_cast<std::size_t>(i)] = row(i) - nth_largest(std::move(rivals), N);
  }
  return slack;
}

}  // namespace reach

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "reach/data_io.hpp"
#include "reach/errors.hpp"
#include "reach/model.hpp"
#include "reach/numerics.hpp"

namespace reach {

// Desk-scale synthetic dataset: planted low-rank structure, optional noise,
// and a power-law popularity skew on per-item observation counts.
struct SynthSpec {
  int n_users = 300;
  int m_items = 150;
  int d_star = 4;
  double density = 0.1;        // target fraction of observed (user, item) pairs
  double noise = 0.25;         // rating noise standard deviation
  double skew = 0.8;           // observation weight of item i is (i+1)^-skew
  std::uint64_t seed = 0;
};

struct SynthData {
  RatingsTable table;
  Matrix P_star;  // n x d*
  Matrix Q_star;  // m x d*
};

// Ratings are p*'q* + noise clipped to [0, 5]. The lead factor coordinate
// is positive (a popularity axis keeping noise-free products inside the
// range); the remaining d*-1 coordinates are zero-mean so the planted rank
// is genuinely d*. Per-item counts are allocated deterministically from
// the skew weights, so counts are nonincreasing in item id whenever
// skew >= 0.
inline SynthData generate(const SynthSpec& spec) {
  if (spec.n_users < 1 || spec.m_items < 1 || spec.d_star < 1)
    throw invalid_input_error("generate: dimensions must be positive");
  if (!(spec.density > 0.0 && spec.density <= 1.0))
    throw invalid_input_error("generate: density must be in (0, 1]");
  if (spec.noise < 0.0 || spec.skew < 0.0)
    throw invalid_input_error("generate: noise and skew must be >= 0");

  std::mt19937_64 rng(spec.seed);
  const double lead = std::sqrt(2.5);
  std::uniform_real_distribution<double> head(0.8 * lead, 1.2 * lead);
  const double tail_sd =
      spec.d_star > 1 ? std::sqrt(0.8 / std::sqrt(static_cast<double>(spec.d_star - 1))) : 0.0;
  std::normal_distribution<double> tail(0.0, tail_sd > 0.0 ? tail_sd : 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthData data;
  data.P_star = Matrix(spec.n_users, spec.d_star);
  data.Q_star = Matrix(spec.m_items, spec.d_star);
  for (Index u = 0; u < spec.n_users; ++u) {
    data.P_star(u, 0) = head(rng);
    for (Index k = 1; k < spec.d_star; ++k) data.P_star(u, k) = tail(rng);
  }
  for (Index i = 0; i < spec.m_items; ++i) {
    data.Q_star(i, 0) = head(rng);
    for (Index k = 1; k < spec.d_star; ++k) data.Q_star(i, k) = tail(rng);
  }

  // Deterministic count allocation: floor the weighted share, then hand the
  // remainder to the lowest ids, clip at n, floor at 1.
  const long long target =
      std::llround(spec.density * static_cast<double>(spec.n_users) *
                   static_cast<double>(spec.m_items));
  std::vector<double> weight(static_cast<std::size_t>(spec.m_items));
  double wsum = 0.0;
  for (int i = 0; i < spec.m_items; ++i) {
    weight[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -spec.skew);
    wsum += weight[static_cast<std::size_t>(i)];
  }
  std::vector<int> count(static_cast<std::size_t>(spec.m_items));
  long long given = 0;
  for (int i = 0; i < spec.m_items; ++i) {
    count[static_cast<std::size_t>(i)] = static_cast<int>(
        std::floor(static_cast<double>(target) * weight[static_cast<std::size_t>(i)] / wsum));
    given += count[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < spec.m_items && given < target; ++i, ++given)
    ++count[static_cast<std::size_t>(i)];
  for (int i = 0; i < spec.m_items; ++i) {
    count[static_cast<std::size_t>(i)] =
        std::clamp(count[static_cast<std::size_t>(i)], 1, spec.n_users);
  }

  std::vector<int> pool(static_cast<std::size_t>(spec.n_users));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < spec.m_items; ++i) {
    const int k = count[static_cast<std::size_t>(i)];
    for (int t = 0; t < k; ++t) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(t),
                                                      pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(t)], pool[pick(rng)]);
    }
    std::vector<int> users(pool.begin(), pool.begin() + k);
    std::sort(users.begin(), users.end());
    for (int u : users) {
      RatingsTable::Entry e;
      e.user = u;
      e.item = i;
      double r = data.P_star.row(u).dot(data.Q_star.row(i));
      if (spec.noise > 0.0) r += spec.noise * gauss(rng);
      e.rating = std::clamp(r, 0.0, 5.0);
      data.table.entries.push_back(e);
    }
  }
  data.table.user_ids.resize(static_cast<std::size_t>(spec.n_users));
  data.table.item_ids.resize(static_cast<std::size_t>(spec.m_items));
  std::iota(data.table.user_ids.begin(), data.table.user_ids.end(), 0);
  std::iota(data.table.item_ids.begin(), data.table.item_ids.end(), 0);
  return data;
}

struct TrainConfig {
  int d = 4;
  double lambda = 0.05;
  int sweeps = 20;
  std::uint64_t seed = 0;
  BiasSign bias_sign = BiasSign::residual;
  double conv_tol = 1e-10;  // relative objective decrease that stops early
};

struct TrainResult {
  FactorModel model;
  std::vector<double> objective;  // after each full sweep
  double train_rmse = 0.0;
};

// Alternating ridge solves on the regularized factorization objective.
// Biases are fitted once up front (global mean, then regularized residual
// means per item and user); factors then fit the bias-adjusted target
// under the configured sign convention, so the produced model is
// self-consistent with the least-squares user update.
inline TrainResult als_train(const RatingsTable& table, const TrainConfig& cfg) {
  if (cfg.d < 1) throw invalid_input_error("als_train: d must be >= 1");
  if (cfg.lambda < 0.0) throw invalid_input_error("als_train: lambda must be >= 0");
  const int n = table.n_users();
  const int m = table.m_items();
  if (n < 1 || m < 1) throw invalid_input_error("als_train: table declares no users or items");

  TrainResult out;
  FactorModel& model = out.model;
  model.lambda = cfg.lambda;
  model.bias_sign = cfg.bias_sign;
  model.b = Vector::Zero(m);
  model.c = Vector::Zero(n);

  const auto& entries = table.entries;
  double rsum = 0.0;
  for (const auto& e : entries) rsum += e.rating;
  model.mu = entries.empty() ? 0.0 : rsum / static_cast<double>(entries.size());

  std::vector<long> item_cnt(static_cast<std::size_t>(m), 0), user_cnt(static_cast<std::size_t>(n), 0);
  for (const auto& e : entries) {
    model.b(e.item) += e.rating - model.mu;
    ++item_cnt[static_cast<std::size_t>(e.item)];
  }
  for (int i = 0; i < m; ++i)
    model.b(i) = item_cnt[static_cast<std::size_t>(i)]
                     ? model.b(i) / (static_cast<double>(item_cnt[static_cast<std::size_t>(i)]) +
                                     cfg.lambda)
                     : 0.0;
  for (const auto& e : entries) {
    model.c(e.user) += e.rating - model.mu - model.b(e.item);
    ++user_cnt[static_cast<std::size_t>(e.user)];
  }
  for (int u = 0; u < n; ++u)
    model.c(u) = user_cnt[static_cast<std::size_t>(u)]
                     ? model.c(u) / (static_cast<double>(user_cnt[static_cast<std::size_t>(u)]) +
                                     cfg.lambda)
                     : 0.0;

  // Factor target under the sign convention: t = r + s (b + c + mu).
  const double s = bias_sign_value(cfg.bias_sign);
  std::vector<std::vector<std::pair<int, double>>> by_user(static_cast<std::size_t>(n)),
      by_item(static_cast<std::size_t>(m));
  for (const auto& e : entries) {
    const double t = e.rating + s * (model.b(e.item) + model.c(e.user) + model.mu);
    by_user[static_cast<std::size_t>(e.user)].emplace_back(e.item, t);
    by_item[static_cast<std::size_t>(e.item)].emplace_back(e.user, t);
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> init(0.0, 0.1 / std::sqrt(static_cast<double>(cfg.d)));
  model.P = Matrix(n, cfg.d);
  model.Q = Matrix(m, cfg.d);
  for (Index u = 0; u < n; ++u)
    for (Index k = 0; k < cfg.d; ++k) model.P(u, k) = init(rng);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < cfg.d; ++k) model.Q(i, k) = init(rng);

  const auto objective = [&]() {
    double obj = cfg.lambda * (model.P.squaredNorm() + model.Q.squaredNorm());
    for (int u = 0; u < n; ++u)
      for (const auto& [i, t] : by_user[static_cast<std::size_t>(u)]) {
        const double err = t - model.P.row(u).dot(model.Q.row(i));
        obj += err * err;
      }
    return obj;
  };

  const auto solve_side = [&](Matrix& target_factors, const Matrix& fixed,
                              const std::vector<std::vector<std::pair<int, double>>>& obs) {
    for (std::size_t row = 0; row < obs.size(); ++row) {
      const auto& seen = obs[row];
      if (seen.empty()) {
        target_factors.row(static_cast<Index>(row)).setZero();
        continue;
      }
      Matrix design(static_cast<Index>(seen.size()), cfg.d);
      Vector rhs(static_cast<Index>(seen.size()));
      for (std::size_t k = 0; k < seen.size(); ++k) {
        design.row(static_cast<Index>(k)) = fixed.row(seen[k].first);
        rhs(static_cast<Index>(k)) = seen[k].second;
      }
      target_factors.row(static_cast<Index>(row)) =
          ridge_solve(design, rhs, cfg.lambda).transpose();
    }
  };

  double prev = objective();
  for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
    solve_side(model.P, model.Q, by_user);
    solve_side(model.Q, model.P, by_item);
    const double obj = objective();
    out.objective.push_back(obj);
    if (prev - obj < cfg.conv_tol * (1.0 + std::abs(prev)) && sweep > 0) {
      prev = obj;
      break;
    }
    prev = obj;
  }

  double sq = 0.0;
  for (const auto& e : entries) {
    const double err = e.rating - predict(model, model.P.row(e.user).transpose(),
                                          model.c(e.user), e.item);
    sq += err * err;
  }
  out.train_rmse = entries.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(entries.size()));
  return out;
}

}  // namespace reach

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "reach/audit_items.hpp"

using reach::FactorModel;
using reach::Index;
using reach::Matrix;
using reach::Vector;

namespace {

std::set<int> aligned_set(const FactorModel& m, int N) {
  std::set<int> out;
  for (Index i = 0; i < m.m(); ++i)
    if (reach::aligned_delta(m, static_cast<int>(i), {}, N) > 0.0) out.insert(static_cast<int>(i));
  return out;
}

std::set<int> exact_set(const FactorModel& m) {
  std::set<int> out;
  for (Index i = 0; i < m.m(); ++i)
    if (reach::exact_top1_available(m, static_cast<int>(i), {}).available)
      out.insert(static_cast<int>(i));
  return out;
}

}  // namespace

TEST_CASE("aligned_delta on canonical factor layouts") {
  FactorModel ortho;
  ortho.Q = Matrix::Identity(4, 4);
  ortho.b = Vector::Zero(4);
  for (int i = 0; i < 4; ++i) CHECK(reach::aligned_delta(ortho, i, {}, 1) == Catch::Approx(1.0));

  FactorModel dup;
  dup.Q = Matrix(2, 2);
  dup.Q << 1.0, 0.5, 1.0, 0.5;
  dup.b = Vector::Zero(2);
  CHECK(reach::aligned_delta(dup, 0, {}, 1) == Catch::Approx(0.0).margin(1e-15));
  CHECK_FALSE(reach::aligned_delta(dup, 0, {}, 1) > 0.0);

  FactorModel fig1;
  fig1.Q = Matrix(4, 2);
  fig1.Q << 1.0, 0.0, 0.0, 1.0, -1.0, -1.0, 0.4, 0.4;
  fig1.b = Vector::Zero(4);
  const double delta = reach::aligned_delta(fig1, 3, {}, 1);
  CHECK(delta == Catch::Approx(0.32 - 0.4));
  CHECK(delta < 0.0);

  // fewer than N rivals makes the condition vacuous
  CHECK(reach::aligned_delta(dup, 0, {1}, 5) ==
        std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(reach::aligned_delta(dup, 0, {0}, 1), reach::invalid_input_error);
}

TEST_CASE("item_audit counts aligned items") {
  FactorModel ortho;
  ortho.Q = Matrix::Identity(6, 6);
  ortho.b = Vector::Zero(6);
  const auto summary = reach::item_audit(ortho, 3, 2);
  CHECK(summary.availability_lower_bound == Catch::Approx(1.0));
  CHECK(summary.per_item.size() == 6);

  // a duplicated factor appearing more often than N' kills its copies
  FactorModel dup;
  dup.Q = Matrix::Zero(7, 7);
  for (int i = 0; i < 4; ++i) dup.Q(i, 0) = 1.0;  // 4 copies
  for (int i = 4; i < 7; ++i) dup.Q(i, i) = 1.0;
  dup.b = Vector::Zero(7);
  const auto s2 = reach::item_audit(dup, 2, 0);
  for (int i = 0; i < 4; ++i) {
    CHECK_FALSE(s2.per_item[static_cast<std::size_t>(i)].aligned_reachable);
    // brute force: at probe q_i the 2nd-largest rival score ties at 1
    const Vector probe = dup.Q.row(i).transpose();
    CHECK_FALSE(oracle::top_n_member(dup, probe, 0.0, i, {}, 2));
  }
  for (int i = 4; i < 7; ++i) CHECK(s2.per_item[static_cast<std::size_t>(i)].aligned_reachable);
  CHECK(s2.availability_lower_bound == Catch::Approx(3.0 / 7.0));
}

TEST_CASE("item_audit fraction is nondecreasing in N and N_h") {
  std::mt19937_64 rng(2020);
  FactorModel m = oracle::random_model(rng, 200, 4, false);
  double prev = 0.0;
  for (int Np = 1; Np <= 20; ++Np) {
    const auto s = reach::item_audit(m, Np, 0);
    CHECK(s.availability_lower_bound >= prev);
    prev = s.availability_lower_bound;
  }
  const auto nh0 = reach::item_audit(m, 3, 0);
  const auto nh5 = reach::item_audit(m, 3, 5);
  CHECK(nh5.availability_lower_bound >= nh0.availability_lower_bound);
}

TEST_CASE("item_audit is independent of block size and jobs") {
  std::mt19937_64 rng(99);
  FactorModel m = oracle::random_model(rng, 150, 3, true);
  reach::ItemAuditOptions a, b;
  a.block = 7;
  a.jobs = 4;
  b.block = 256;
  b.jobs = 1;
  const auto sa = reach::item_audit(m, 4, 1, a);
  const auto sb = reach::item_audit(m, 4, 1, b);
  REQUIRE(sa.per_item.size() == sb.per_item.size());
  for (std::size_t i = 0; i < sa.per_item.size(); ++i) {
    CHECK(sa.per_item[i].delta == sb.per_item[i].delta);
    CHECK(sa.per_item[i].aligned_reachable == sb.per_item[i].aligned_reachable);
  }
}

TEST_CASE("exact_top1_available on the line") {
  FactorModel m;
  m.Q = Matrix(2, 1);
  m.Q << 1.0, -1.0;
  m.b = Vector::Zero(2);
  CHECK(reach::exact_top1_available(m, 0, {}).available);
  CHECK(reach::exact_top1_available(m, 1, {}).available);

  FactorModel mid;
  mid.Q = Matrix(3, 2);
  mid.Q << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5;
  mid.b = Vector::Zero(3);
  CHECK(reach::exact_top1_available(mid, 0, {}).available);
  CHECK(reach::exact_top1_available(mid, 1, {}).available);
  CHECK_FALSE(reach::exact_top1_available(mid, 2, {}).available);
}

TEST_CASE("exact availability equals the planar hull vertex set") {
  std::mt19937_64 rng(555);
  for (int trial = 0; trial < 20; ++trial) {
    const Index m_items = 3 + static_cast<Index>(rng() % 28);
    FactorModel m = oracle::random_model(rng, m_items, 2, false);
    const auto lp_set = exact_set(m);
    const auto hull = oracle::hull_vertices_2d(m.Q);
    const std::set<int> hull_set(hull.begin(), hull.end());
    CHECK(lp_set == hull_set);
  }
}

TEST_CASE("aligned-reachable items truly appear in the top N at their own probe") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    const Index m_items = 5 + static_cast<Index>(rng() % 60);
    const Index d = 1 + static_cast<Index>(rng() % 6);
    FactorModel m = oracle::random_model(rng, m_items, d, trial % 2 == 0);
    const int N = 1 + static_cast<int>(rng() % 8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double c_u = u(rng);
    for (Index i = 0; i < m.m(); ++i) {
      if (reach::aligned_delta(m, static_cast<int>(i), {}, N) > 0.0) {
        const Vector probe = m.Q.row(i).transpose();
        CHECK(oracle::top_n_member(m, probe, c_u, static_cast<int>(i), {}, N));
      }
    }
  }
}

TEST_CASE("exact top-1 availability covers the aligned set") {
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 10; ++trial) {
    const Index m_items = 4 + static_cast<Index>(rng() % 20);
    const Index d = 1 + static_cast<Index>(rng() % 4);
    FactorModel m = oracle::random_model(rng, m_items, d, trial % 2 == 0);
    for (Index i = 0; i < m.m(); ++i) {
      const double delta = reach::aligned_delta(m, static_cast<int>(i), {}, 1);
      auto [G, h] = reach::item_region(m, static_cast<int>(i), {});
      // the probe q_i itself is an eps-witness whenever delta clears eps
      if (delta > reach::strict_eps_for(G))
        CHECK(reach::exact_top1_available(m, static_cast<int>(i), {}).available);
    }
  }
}

TEST_CASE("scaling all factors preserves the aligned set") {
  std::mt19937_64 rng(101);
  FactorModel m = oracle::random_model(rng, 40, 3, false);
  const auto base = aligned_set(m, 2);
  FactorModel scaled = m;
  const double c = 3.7;
  scaled.Q *= c;
  CHECK(aligned_set(scaled, 2) == base);
  for (Index i = 0; i < m.m(); ++i)
    CHECK(reach::aligned_delta(scaled, static_cast<int>(i), {}, 2) ==
          Catch::Approx(c * c * reach::aligned_delta(m, static_cast<int>(i), {}, 2)));
}

TEST_CASE("sampled availability bounds and reproductions") {
  FactorModel ortho;
  ortho.Q = Matrix::Identity(5, 5);
  ortho.b = Vector::Zero(5);
  std::vector<Vector> self_probes;
  for (Index i = 0; i < 5; ++i) self_probes.push_back(ortho.Q.row(i).transpose());
  CHECK(reach::sampled_availability(ortho, self_probes, {}, 1) == Catch::Approx(1.0));

  // a single probe can surface at most N items
  std::mt19937_64 rng(7);
  FactorModel m = oracle::random_model(rng, 30, 2, false);
  const double single = reach::sampled_availability(m, {m.Q.row(0).transpose()}, {}, 3);
  CHECK(single <= 3.0 / 30.0 + 1e-12);

  // self probes dominate the aligned set; unions dominate their parts
  std::vector<Vector> p1, p2;
  for (Index i = 0; i < 15; ++i) p1.push_back(m.Q.row(i).transpose());
  for (Index i = 15; i < 30; ++i) p2.push_back(m.Q.row(i).transpose());
  std::vector<Vector> both = p1;
  both.insert(both.end(), p2.begin(), p2.end());
  const double f1 = reach::sampled_availability(m, p1, {}, 2);
  const double f2 = reach::sampled_availability(m, p2, {}, 2);
  const double fu = reach::sampled_availability(m, both, {}, 2);
  CHECK(fu >= std::max(f1, f2));
  const double aligned =
      static_cast<double>(aligned_set(m, 2).size()) / static_cast<double>(m.m());
  CHECK(fu >= aligned);
}

TEST_CASE("a dense direction grid recovers the hull vertices at N=1") {
  std::mt19937_64 rng(121);
  FactorModel m = oracle::random_model(rng, 10, 2, false);
  std::vector<Vector> probes;
  const int nangles = 4096;
  for (int a = 0; a < nangles; ++a) {
    const double th = 2.0 * M_PI * a / nangles;
    Vector v(2);
    v << std::cos(th), std::sin(th);
    probes.push_back(v);
  }
  std::set<int> sampled;
  for (const Vector& v : probes)
    for (int i : reach::top_n(m, v, 0.0, {}, 1)) sampled.insert(i);
  const auto hull = oracle::hull_vertices_2d(m.Q);
  CHECK(sampled == std::set<int>(hull.begin(), hull.end()));
}

TEST_CASE("popularity CDFs") {
  // all items available: the available CDF is the combined CDF
  std::vector<long> counts{3, 1, 2};
  std::vector<double> means{4.0, 2.0, 3.0};
  std::vector<char> all_on{1, 1, 1};
  auto stats = reach::popularity_stats(counts, means, all_on);
  CHECK(stats.count_available.x == stats.count_all.x);
  CHECK(stats.count_available.y == stats.count_all.y);
  CHECK(stats.mean_available.x == stats.mean_all.x);

  // single item: a step at its value
  auto solo = reach::popularity_stats({5}, {3.5}, {1});
  REQUIRE(solo.count_available.x.size() == 1);
  CHECK(solo.count_available.x[0] == 5.0);
  CHECK(solo.count_available.y[0] == 1.0);

  // seeded skewed population: nondecreasing, terminal value 1
  std::mt19937_64 rng(77);
  std::vector<long> c2;
  std::vector<double> m2;
  std::vector<char> f2;
  for (int i = 0; i < 60; ++i) {
    c2.push_back(static_cast<long>(rng() % 50));
    m2.push_back(static_cast<double>(rng() % 10) / 2.0);
    f2.push_back(rng() % 3 ? 1 : 0);
  }
  stats = reach::popularity_stats(c2, m2, f2);
  for (const reach::Cdf* cdf : {&stats.count_available, &stats.count_unavailable,
                                &stats.count_all, &stats.mean_all}) {
    REQUIRE_FALSE(cdf->y.empty());
    for (std::size_t i = 1; i < cdf->y.size(); ++i) CHECK(cdf->y[i] >= cdf->y[i - 1]);
    CHECK(cdf->y.back() == Catch::Approx(1.0));
  }

  CHECK_THROWS_AS(reach::popularity_stats({1}, {1.0, 2.0}, {1}), reach::invalid_input_error);
}

TEST_CASE("gram constraint slack matches the bias-free aligned delta") {
  FactorModel ortho;
  ortho.Q = Matrix::Identity(4, 4);
  ortho.b = Vector::Zero(4);
  for (double s : reach::gram_constraint_slack(ortho, 1)) CHECK(s == Catch::Approx(1.0));

  FactorModel dup;
  dup.Q = Matrix(2, 2);
  dup.Q << 0.3, 0.7, 0.3, 0.7;
  dup.b = Vector::Zero(2);
  for (double s : reach::gram_constraint_slack(dup, 1))
    CHECK(s == Catch::Approx(0.0).margin(1e-15));

  std::mt19937_64 rng(3);
  FactorModel m = oracle::random_model(rng, 25, 3, true);  // slack ignores biases
  const auto slack = reach::gram_constraint_slack(m, 4);
  FactorModel nobias = m;
  nobias.b.setZero();
  for (Index i = 0; i < m.m(); ++i)
    CHECK(slack[static_cast<std::size_t>(i)] ==
          Catch::Approx(reach::aligned_delta(nobias, static_cast<int>(i), {}, 4)));

  // the audit carries the same slack as a per-item report field
  const auto summary = reach::item_audit(m, 4, 0);
  for (Index i = 0; i < m.m(); ++i)
    CHECK(summary.per_item[static_cast<std::size_t>(i)].gram_slack ==
          Catch::Approx(slack[static_cast<std::size_t>(i)]));
}

TEST_CASE("item_audit exact flags cover the aligned set on demand") {
  FactorModel mid;
  mid.Q = Matrix(3, 2);
  mid.Q << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5;
  mid.b = Vector::Zero(3);
  reach::ItemAuditOptions opts;
  opts.exact_top1 = true;
  const auto summary = reach::item_audit(mid, 1, 0, opts);
  REQUIRE(summary.per_item[0].exact_top1.has_value());
  CHECK(*summary.per_item[0].exact_top1);
  CHECK(*summary.per_item[1].exact_top1);
  CHECK_FALSE(*summary.per_item[2].exact_top1);
  const auto plain = reach::item_audit(mid, 1, 0);
  CHECK_FALSE(plain.per_item[0].exact_top1.has_value());
}

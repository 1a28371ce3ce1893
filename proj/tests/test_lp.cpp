#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "reach/lp.hpp"

using reach::Index;
using reach::Matrix;
using reach::Vector;

namespace {

struct Instance {
  Matrix G;
  Vector h;
};

// A mix of unconstrained-random, planted-feasible, and planted-infeasible
// systems.
Instance random_instance(std::mt19937_64& rng, int kind) {
  std::uniform_int_distribution<Index> rows_d(1, 14), cols_d(1, 6);
  const Index r = rows_d(rng), d = cols_d(rng);
  Instance inst;
  inst.G = oracle::random_matrix(rng, r, d);
  inst.h = oracle::random_vector(rng, r);
  if (kind == 1) {
    // feasible by construction: h = G p* - slack
    const Vector p = oracle::random_vector(rng, d, 2.0);
    std::uniform_real_distribution<double> slack(0.1, 2.0);
    inst.h = inst.G * p;
    for (Index i = 0; i < r; ++i) inst.h(i) -= slack(rng);
  } else if (kind == 2) {
    // infeasible: append the negated sum of rows with an offsetting h
    Vector gsum = Vector::Zero(d);
    double hsum = 0.0;
    for (Index i = 0; i < r; ++i) {
      gsum += inst.G.row(i).transpose();
      hsum += inst.h(i);
    }
    inst.G.conservativeResize(r + 1, d);
    inst.h.conservativeResize(r + 1);
    inst.G.row(r) = -gsum.transpose();
    inst.h(r) = -hsum + 1.0;  // sum of all h exceeds 0 while rows cancel
  }
  return inst;
}

}  // namespace

TEST_CASE("half-line system is feasible") {
  Matrix G(1, 1);
  G << 2.0;
  Vector h(1);
  h << 0.0;
  const auto res = reach::lp_strict_feasible(G, h, 1e-6);
  REQUIRE(res.feasible);
  CHECK(res.witness(0) > 0.0);
  CHECK(2.0 * res.witness(0) >= 1e-6 - 1e-7);
}

TEST_CASE("midpoint item region is infeasible with the convexity certificate") {
  // q3 = (q1 + q2) / 2 in d = 2; rows are q3 - q1 and q3 - q2.
  Vector q1(2), q2(2);
  q1 << 1.0, 0.0;
  q2 << 0.0, 1.0;
  const Vector q3 = 0.5 * (q1 + q2);
  Matrix G(2, 2);
  G.row(0) = (q3 - q1).transpose();
  G.row(1) = (q3 - q2).transpose();
  const Vector h = Vector::Zero(2);
  const auto res = reach::lp_strict_feasible(G, h, 1e-6);
  REQUIRE_FALSE(res.feasible);
  CHECK(res.certificate(0) == Catch::Approx(0.5).margin(1e-9));
  CHECK(res.certificate(1) == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("bias domination decides duplicate-factor regions") {
  // Two items share a factor; only the larger bias wins. Region rows are
  // 0-vectors with h = b_j - b_i.
  Matrix G = Matrix::Zero(1, 2);
  Vector h(1);

  h << 1.0;  // rival has bias advantage 1
  auto res = reach::lp_strict_feasible(G, h, 1e-6);
  REQUIRE_FALSE(res.feasible);
  CHECK(res.certificate(0) == Catch::Approx(1.0));
  CHECK(res.certificate_value > 0.0);

  h << -1.0;  // this item dominates
  res = reach::lp_strict_feasible(G, h, 1e-6);
  REQUIRE(res.feasible);
  CHECK((G * res.witness - h).minCoeff() >= 1e-6 - 1e-7);
}

TEST_CASE("empty system is trivially feasible") {
  Matrix G(0, 3);
  Vector h(0);
  const auto res = reach::lp_strict_feasible(G, h, 1e-6);
  CHECK(res.feasible);
  CHECK(res.witness == Vector::Zero(3));
}

TEST_CASE("strict feasibility is sound both ways") {
  std::mt19937_64 rng(2024);
  int feas = 0, infeas = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const Instance inst = random_instance(rng, trial % 3);
    const double eps = reach::strict_eps_for(inst.G);
    const auto res = reach::lp_strict_feasible(inst.G, inst.h, eps);
    if (res.feasible) {
      ++feas;
      const double margin = (inst.G * res.witness - inst.h.array().matrix()).minCoeff();
      CHECK(margin >= eps - 1e-7);
    } else {
      ++infeas;
      const Vector& w = res.certificate;
      CHECK(w.minCoeff() >= -1e-12);
      CHECK((inst.G.transpose() * w).cwiseAbs().maxCoeff() <= 1e-7);
      CHECK((inst.h.array() + eps).matrix().dot(w) > 0.0);
    }
  }
  // the generator must exercise both verdicts
  CHECK(feas > 10);
  CHECK(infeas > 10);
}

TEST_CASE("shrinking eps never flips feasible to infeasible") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance inst = random_instance(rng, trial % 3);
    const double eps1 = 1e-3;
    const double eps2 = 1e-8;
    const bool f1 = reach::lp_strict_feasible(inst.G, inst.h, eps1).feasible;
    const bool f2 = reach::lp_strict_feasible(inst.G, inst.h, eps2).feasible;
    if (f1) CHECK(f2);
  }
}

TEST_CASE("min_l1_recourse keeps a feasible anchor at zero cost") {
  // One control dimension, target region p >= 1 reachable from aHat.
  Matrix B(1, 1);
  B << 1.0;
  Vector v0 = Vector::Zero(1);
  Matrix G(1, 1);
  G << 1.0;
  Vector h(1);
  h << 1.0;
  Vector aHat(1);
  aHat << 3.0;
  const auto res = reach::min_l1_recourse(B, v0, G, h, aHat, 0.0, 5.0, 1e-6);
  REQUIRE(res.feasible);
  CHECK(res.cost == Catch::Approx(0.0).margin(1e-9));
  CHECK(res.action(0) == Catch::Approx(3.0));
}

TEST_CASE("min_l1_recourse reports infeasible regions") {
  Matrix B(1, 1);
  B << 1.0;
  Vector v0 = Vector::Zero(1);
  Matrix G(2, 1);
  G << 1.0, -1.0;  // p >= 1 and p <= -1
  Vector h(2);
  h << 1.0, 1.0;
  Vector aHat = Vector::Zero(1);
  const auto res = reach::min_l1_recourse(B, v0, G, h, aHat, 0.0, 5.0, 1e-6);
  CHECK_FALSE(res.feasible);
}

TEST_CASE("min_l1_recourse box constraints bind") {
  // Region wants a >= 4, box caps at hi; frozen box [0,0] leaves only a=0.
  Matrix B(1, 1);
  B << 1.0;
  Vector v0 = Vector::Zero(1);
  Matrix G(1, 1);
  G << 1.0;
  Vector h(1);
  h << 4.0;
  Vector aHat = Vector::Zero(1);
  auto res = reach::min_l1_recourse(B, v0, G, h, aHat, 0.0, 5.0, 1e-6);
  REQUIRE(res.feasible);
  CHECK(res.action(0) >= 4.0);
  CHECK(res.cost == Catch::Approx(res.action(0)).epsilon(1e-9));

  res = reach::min_l1_recourse(B, v0, G, h, aHat, 0.0, 3.0, 1e-6);
  CHECK_FALSE(res.feasible);

  res = reach::min_l1_recourse(B, v0, G, h, aHat, 0.0, 0.0, 1e-6);
  CHECK_FALSE(res.feasible);
  Vector h0(1);
  h0 << -1.0;
  res = reach::min_l1_recourse(B, v0, G, h0, aHat, 0.0, 0.0, 1e-6);
  REQUIRE(res.feasible);
  CHECK(res.action(0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("min_l1_recourse matches grid search") {
  std::mt19937_64 rng(4242);
  int compared = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const Index d = 1 + static_cast<Index>(rng() % 2);
    const Index k = 1 + static_cast<Index>(rng() % 2);
    const Index r = 2 + static_cast<Index>(rng() % 4);
    const Matrix B = oracle::random_matrix(rng, d, k);
    const Vector v0 = oracle::random_vector(rng, d, 0.5);
    const Matrix G = oracle::random_matrix(rng, r, d);
    const Vector h = oracle::random_vector(rng, r, 0.5);
    std::uniform_real_distribution<double> au(0.0, 5.0);
    Vector aHat(k);
    for (Index j = 0; j < k; ++j) aHat(j) = au(rng);
    const double eps = 1e-6;
    const auto lp = reach::min_l1_recourse(B, v0, G, h, aHat, 0.0, 5.0, eps);
    const double grid =
        oracle::grid_l1_min(B, v0, G, h, aHat, 0.0, 5.0, eps, 0.01);
    if (!lp.feasible) {
      CHECK(std::isinf(grid));  // the grid checks the same eps margin
    } else if (!std::isinf(grid)) {
      CHECK(std::abs(lp.cost - grid) <= 0.02);
      CHECK(lp.cost <= grid + 1e-9);
      ++compared;
    }
  }
  CHECK(compared > 5);
}

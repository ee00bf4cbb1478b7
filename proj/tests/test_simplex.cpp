#include <doctest.h>

#include "helpers.hpp"

using namespace lampos;

namespace {

// min -z s.t. z + y = 1, z >= 0, y boxed.
MpMilp two_var_lp() {
  MpMilp p;
  p.c = Vec(1);
  p.c << -1.0;
  p.d = Vec(1);
  p.d << 0.0;
  p.A = Mat(1, 1);
  p.A << 1.0;
  p.B = Mat(1, 1);
  p.B << 1.0;
  p.rhs.b0 = Vec(1);
  p.rhs.b0 << 1.0;
  p.rhs.T = Mat(1, 0);
  return p;
}

double dual_objective(const MpMilp& p, const LpBox& box, const LpResult& res) {
  // lambda' b + sum_j d_j * bound_j over nonbasic-at-bound columns, with
  // d_j = c_j - lambda' a_j. Bound attribution from the point itself.
  const Vec b = p.rhs.b0;
  double total = res.duals.dot(b);
  for (int j = 0; j < p.n(); ++j) {
    const double d = p.c[j] - res.duals.dot(p.A.col(j));
    if (std::abs(d) < 1e-9) continue;
    total += d * res.point->z[j];  // z at lower bound 0 contributes nothing
  }
  for (int j = 0; j < p.M(); ++j) {
    const double d = p.d[j] - res.duals.dot(p.B.col(j));
    if (std::abs(d) < 1e-9) continue;
    total += d * res.point->y[j];
  }
  (void)box;
  return total;
}

}  // namespace

TEST_CASE("solve_lp: free box prefers z = 1") {
  MpMilp p = two_var_lp();
  LpResult res = solve_lp(p, Vec::Zero(0), root_box(1));
  REQUIRE(res.status == LpStatus::Optimal);
  CHECK(res.value == doctest::Approx(-1.0));
  CHECK(res.point->z[0] == doctest::Approx(1.0));
  CHECK(res.point->y[0] == doctest::Approx(0.0));
}

TEST_CASE("solve_lp: fixing y to one forces z = 0") {
  MpMilp p = two_var_lp();
  LpResult res = solve_lp(p, Vec::Zero(0), point_box(BitVec{1}));
  REQUIRE(res.status == LpStatus::Optimal);
  CHECK(res.value == doctest::Approx(0.0));
  CHECK(res.point->z[0] == doctest::Approx(0.0));
}

TEST_CASE("solve_lp: empty feasible set reports infeasible with +inf") {
  MpMilp p;
  p.c = Vec(1);
  p.c << 1.0;
  p.d = Vec(0);
  p.A = Mat(1, 1);
  p.A << 1.0;
  p.B = Mat(1, 0);
  p.rhs.b0 = Vec(1);
  p.rhs.b0 << -1.0;
  p.rhs.T = Mat(1, 0);
  LpResult res = solve_lp(p, Vec::Zero(0), root_box(0));
  CHECK(res.status == LpStatus::Infeasible);
  CHECK(res.value == std::numeric_limits<double>::infinity());
}

TEST_CASE("solve_lp: unbounded ray detected") {
  // min -z1 with z1 - z2 = 0.
  MpMilp p;
  p.c = Vec(2);
  p.c << -1.0, 0.0;
  p.d = Vec(0);
  p.A = Mat(1, 2);
  p.A << 1.0, -1.0;
  p.B = Mat(1, 0);
  p.rhs.b0 = Vec::Zero(1);
  p.rhs.T = Mat(1, 0);
  LpResult res = solve_lp(p, Vec::Zero(0), root_box(0));
  CHECK(res.status == LpStatus::Unbounded);
}

TEST_CASE("solve_lp: iteration limit is an explicit status") {
  SplitMix64 rng = substream(31, 0);
  MpMilp p = testutil::random_instance(rng);
  LpOptions opts;
  opts.max_iterations = 1;
  LpResult res = solve_lp(p, Vec::Zero(0), root_box(p.M()), opts);
  CHECK(res.status == LpStatus::IterationLimit);
}

TEST_CASE("solve_lp matches the oracle relaxation on random instances") {
  SplitMix64 rng = substream(32, 0);
  for (int trial = 0; trial < 60; ++trial) {
    MpMilp p = testutil::random_instance(rng);
    LpSolver solver(p);
    SplitMix64 box_rng = substream(32, 1000 + static_cast<std::uint64_t>(trial));
    Cover cover = testutil::random_cover(box_rng, p.M(), 1 + static_cast<int>(box_rng.below(3)));
    for (const auto& box : cover.boxes) {
      LpResult mine = solver.solve(Vec::Zero(0), box);
      oracle::LpOut ref = oracle::relaxation_in_box(p, Vec::Zero(0), box);
      if (ref.status == oracle::Status::Optimal) {
        REQUIRE(mine.status == LpStatus::Optimal);
        CHECK(mine.value == doctest::Approx(ref.value).epsilon(1e-7));
      } else if (ref.status == oracle::Status::Infeasible) {
        CHECK(mine.status == LpStatus::Infeasible);
      } else {
        CHECK(mine.status == LpStatus::Unbounded);
      }
    }
  }
}

TEST_CASE("weak duality: primal equals reconstructed dual objective") {
  SplitMix64 rng = substream(33, 0);
  for (int trial = 0; trial < 40; ++trial) {
    MpMilp p = testutil::random_instance(rng);
    LpBox box = root_box(p.M());
    LpResult res = solve_lp(p, Vec::Zero(0), box);
    if (res.status != LpStatus::Optimal) continue;
    CHECK(res.value == doctest::Approx(dual_objective(p, box, res)).epsilon(1e-7));
  }
}

TEST_CASE("box monotonicity: larger boxes never increase the value") {
  SplitMix64 rng = substream(34, 0);
  for (int trial = 0; trial < 40; ++trial) {
    MpMilp p = testutil::random_instance(rng);
    LpSolver solver(p);
    SplitMix64 brng = substream(34, 100 + static_cast<std::uint64_t>(trial));
    LpBox outer = root_box(p.M());
    LpBox inner = outer;
    for (int i = 0; i < p.M(); ++i) {
      const auto choice = brng.below(3);
      if (choice == 0) inner.ub[i] = 0;
      if (choice == 1) inner.lb[i] = 1;
    }
    LpResult wide = solver.solve(Vec::Zero(0), outer);
    LpResult narrow = solver.solve(Vec::Zero(0), inner);
    if (wide.status == LpStatus::Optimal && narrow.status == LpStatus::Optimal)
      CHECK(narrow.value >= wide.value - 1e-7 * (1.0 + std::abs(wide.value)));
    if (wide.status == LpStatus::Infeasible)
      CHECK(narrow.status == LpStatus::Infeasible);
  }
}

TEST_CASE("fixing all binaries reproduces the fixed-y upper bound") {
  SplitMix64 rng = substream(35, 0);
  for (int trial = 0; trial < 30; ++trial) {
    MpMilp p = testutil::random_instance(rng);
    LpSolver solver(p);
    BitVec y = testutil::random_bits(rng, p.M());
    LpResult res = solver.solve_fixed(Vec::Zero(0), y);
    Vec yv(p.M());
    for (int i = 0; i < p.M(); ++i) yv[i] = y[i];
    oracle::LpOut ref =
        oracle::tableau_lp(p.c, p.A, p.rhs.b0 - p.B * yv);
    if (ref.status == oracle::Status::Optimal) {
      REQUIRE(res.status == LpStatus::Optimal);
      CHECK(res.value ==
            doctest::Approx(ref.value + p.d.dot(yv)).epsilon(1e-7));
      for (int i = 0; i < p.M(); ++i)
        CHECK(res.point->y[i] == doctest::Approx(static_cast<double>(y[i])));
    } else if (ref.status == oracle::Status::Infeasible) {
      CHECK(res.status == LpStatus::Infeasible);
    }
  }
}

TEST_CASE("solve_lp is deterministic bit for bit") {
  SplitMix64 rng = substream(36, 0);
  MpMilp p = testutil::random_instance(rng);
  LpSolver solver(p);
  LpBox box = root_box(p.M());
  LpResult a = solver.solve(Vec::Zero(0), box);
  LpResult b = solver.solve(Vec::Zero(0), box);
  REQUIRE(a.status == b.status);
  CHECK(a.value == b.value);  // exact equality
  CHECK(a.iterations == b.iterations);
  if (a.point) {
    CHECK((a.point->z - b.point->z).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.point->y - b.point->y).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("is_integral distinguishes binary from fractional solutions") {
  MpMilp p = two_var_lp();
  LpResult res = solve_lp(p, Vec::Zero(0), root_box(1));
  REQUIRE(res.status == LpStatus::Optimal);
  CHECK(is_integral(res));  // y lands exactly on 0

  LpResult bad;
  bad.status = LpStatus::Infeasible;
  CHECK_THROWS_AS(is_integral(bad), std::invalid_argument);

  LpResult frac;
  frac.status = LpStatus::Optimal;
  frac.point = MilpPoint{Vec::Zero(1), Vec::Constant(1, 0.5)};
  CHECK_FALSE(is_integral(frac));
}

TEST_CASE("a fractional relaxation exists and is flagged") {
  // Find a random instance whose root relaxation is strictly below the MILP
  // optimum; its relaxation solution must be fractional.
  SplitMix64 rng = substream(37, 0);
  for (int trial = 0; trial < 200; ++trial) {
    testutil::RandomInstanceSpec spec;
    spec.max_binaries = 6;
    MpMilp p = testutil::random_instance(rng, spec);
    LpResult relax = solve_lp(p, Vec::Zero(0), root_box(p.M()));
    if (relax.status != LpStatus::Optimal) continue;
    oracle::MilpOut brute = oracle::milp_best(p, Vec::Zero(0));
    if (brute.status != oracle::Status::Optimal) continue;
    if (relax.value < brute.value - 1e-6) {
      CHECK_FALSE(is_integral(relax));
      return;
    }
  }
  FAIL("no fractional-relaxation instance found");
}

TEST_CASE("solve_lp rejects dimension mismatches") {
  MpMilp p = two_var_lp();
  CHECK_THROWS_AS(solve_lp(p, Vec::Zero(0), root_box(3)), std::invalid_argument);
  CHECK_THROWS_AS(solve_lp(p, Vec::Zero(2), root_box(1)), std::invalid_argument);
}

#include <doctest.h>

#include "helpers.hpp"

using namespace lampos;

TEST_CASE("tableau lp solves a hand-checked problem") {
  // min -z1 s.t. z1 + z2 = 1 -> z1 = 1.
  Vec c(2);
  c << -1.0, 0.0;
  Mat A(1, 2);
  A << 1.0, 1.0;
  Vec b(1);
  b << 1.0;
  auto out = oracle::tableau_lp(c, A, b);
  REQUIRE(out.status == oracle::Status::Optimal);
  CHECK(out.value == doctest::Approx(-1.0));
  CHECK(out.x[0] == doctest::Approx(1.0));
}

TEST_CASE("tableau lp flags infeasible and unbounded") {
  Vec c(1);
  c << 1.0;
  Mat A(1, 1);
  A << 1.0;
  Vec b(1);
  b << -1.0;  // z = -1 with z >= 0
  CHECK(oracle::tableau_lp(c, A, b).status == oracle::Status::Infeasible);

  // min -z1 s.t. z1 - z2 = 0: ray z1 = z2 -> unbounded.
  Vec c2(2);
  c2 << -1.0, 0.0;
  Mat A2(1, 2);
  A2 << 1.0, -1.0;
  Vec b2(1);
  b2 << 0.0;
  CHECK(oracle::tableau_lp(c2, A2, b2).status == oracle::Status::Unbounded);
}

TEST_CASE("bounded lp honors boxes and free variables") {
  Vec c(1);
  c << 1.0;
  Mat none(0, 1);
  Vec nonev(0);
  Vec lo(1), hi(1);
  lo << -2.0;
  hi << 3.0;
  auto out = oracle::bounded_lp(c, none, nonev, none, nonev, lo, hi);
  REQUIRE(out.status == oracle::Status::Optimal);
  CHECK(out.value == doctest::Approx(-2.0));
  c << -1.0;
  out = oracle::bounded_lp(c, none, nonev, none, nonev, lo, hi);
  REQUIRE(out.status == oracle::Status::Optimal);
  CHECK(out.x[0] == doctest::Approx(3.0));
}

TEST_CASE("milp enumeration finds the binary optimum") {
  // min z + 0.3 y with z + y - s = 1: y=1 -> cost 0.3, y=0 -> cost 1.
  MpMilp p = testutil::fixed_toy();
  p.rhs.b0 << 1.0;
  auto out = oracle::milp_best(p, Vec::Zero(0));
  REQUIRE(out.status == oracle::Status::Optimal);
  CHECK(out.value == doctest::Approx(0.3));
  CHECK(out.point->y[0] == doctest::Approx(1.0));
}

TEST_CASE("box enumeration respects fixed binaries") {
  MpMilp p = testutil::fixed_toy();
  p.rhs.b0 << 1.0;
  LpBox zero = point_box(BitVec{0});
  auto out = oracle::milp_best_in_box(p, Vec::Zero(0), zero);
  REQUIRE(out.status == oracle::Status::Optimal);
  CHECK(out.value == doctest::Approx(1.0));
}

TEST_CASE("general model brute force handles epigraphs and binaries") {
  // min |v| + 2 y with v free, -v + y <= 0.5: y=0 allows v=0 at cost 0.
  GeneralModel model = GeneralModel::make(2);
  model.binaries = {1};
  model.epigraphs.push_back(EpigraphTerm{{{{0, 1.0}}}});
  LinRow row;
  row.terms = {{0, -1.0}, {1, 1.0}};
  row.rhs = 0.5;
  model.inequalities.push_back(row);
  model.cost[1] = 2.0;
  auto out = oracle::general_model_best(model, Vec::Zero(0));
  REQUIRE(out.status == oracle::Status::Optimal);
  CHECK(out.value == doctest::Approx(0.0));
}

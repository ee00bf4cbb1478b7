#pragma once

#include <optional>
#include <vector>

#include "lampos/problem.hpp"

namespace lampos {

/// One LP sub-problem: the binary variables are boxed to lb <= y <= ub with
/// lb, ub in {0,1}^M and lb <= ub componentwise.
struct LpBox {
  BitVec lb;
  BitVec ub;

  int dim() const { return static_cast<int>(lb.size()); }
  void validate(int M) const;
  bool contains(const BitVec& y) const;

  friend bool operator==(const LpBox& a, const LpBox& b) {
    return a.lb == b.lb && a.ub == b.ub;
  }
  friend auto operator<=>(const LpBox& a, const LpBox& b) = default;
};

/// Root box with every binary free.
LpBox root_box(int M);
/// Box fixing every binary to the given assignment.
LpBox point_box(const BitVec& y);
/// Number of free coordinates (lb_i < ub_i).
int free_count(const LpBox& box);
/// True when the two boxes share at least one binary point.
bool boxes_intersect(const LpBox& a, const LpBox& b);
/// True when inner's binary points are all contained in outer.
bool box_subset(const LpBox& inner, const LpBox& outer);

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;  // +inf infeasible, -inf unbounded
  std::optional<MilpPoint> point;
  long iterations = 0;
  Vec duals;  // row multipliers, present when Optimal
};

bool is_integral(const LpResult& res);

struct LpOptions {
  long max_iterations = -1;  // <0 selects 50*(n+M+m)
  int refactor_interval = 50;
};

/// Prepares a problem for repeated LP solves. Construction builds an
/// immutable sparse column view plus row scaling; afterwards solve() is a
/// pure function of (theta, box) and safe to call from many threads at once.
class LpSolver {
 public:
  explicit LpSolver(const MpMilp& problem, LpOptions options = {});
  ~LpSolver();
  LpSolver(const LpSolver&) = delete;
  LpSolver& operator=(const LpSolver&) = delete;

  LpResult solve(const Vec& theta, const LpBox& box) const;
  LpResult solve_fixed(const Vec& theta, const BitVec& y) const;

  const MpMilp& problem() const { return problem_; }

  struct Impl;

 private:
  MpMilp problem_;
  LpOptions options_;
  std::unique_ptr<const Impl> impl_;
};

/// One-shot convenience wrapper around LpSolver.
LpResult solve_lp(const MpMilp& p, const Vec& theta, const LpBox& box,
                  LpOptions options = {});

}  // namespace lampos

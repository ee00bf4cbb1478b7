#pragma once

#include <functional>

#include "lampos/forest.hpp"

namespace lampos {

enum class SolveStatus { AcceptedByPrediction, RecoveredByBackup, Infeasible };

struct BoxLpStat {
  LpBox box;
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  bool integral = false;
  bool fixed_candidate = false;  // the appended fixed-y LP
};

struct SolveReport {
  SolveStatus status = SolveStatus::Infeasible;
  std::optional<MilpPoint> point;
  double lb = 0.0;  // min over the cover LPs only
  double ub = 0.0;  // min over binary-feasible LPs (fixed-y included)
  double gap = 0.0;
  bool gap_absolute = false;  // |lb| was degenerate, gap is ub - lb
  std::vector<BoxLpStat> lp_stats;
  long us_predict = 0;
  long us_parallel_lp = 0;
  long us_backup = 0;
  int backup_milps = 0;
};

struct Subopt {
  double value = 0.0;
  bool absolute = false;
};

/// |(UB - LB)/LB|, falling back to the absolute difference when |LB| is
/// below 1e-9; +inf when UB is +inf.
Subopt suboptimality_estimate(const SolveReport& report);

using StrategyFn = std::function<Strategy(const Vec&)>;

struct OnlineOptions {
  double tol = 1e-2;  // relative acceptance tolerance
  BnbOptions backup;
};

/// Algorithm: predict a strategy, solve its cover LPs plus the fixed-y LP in
/// parallel, accept when UB - LB <= tol*|LB|, otherwise sweep the sorted
/// cover boxes with exact MILP sub-solves.
SolveReport lampos_solve(const LpSolver& solver, const Vec& theta,
                         const StrategyFn& predictor,
                         const OnlineOptions& options = {});
SolveReport lampos_solve(const LpSolver& solver, const Vec& theta,
                         const PredictorModel& model,
                         const OnlineOptions& options = {});

struct BackupResult {
  bool feasible = false;
  double value = 0.0;
  std::optional<MilpPoint> point;
  int milps_solved = 0;
};

/// Sequential sweep over boxes sorted ascending by LP value: solves each
/// box-restricted MILP, keeps the best solution and stops as soon as it is
/// no worse than the next box's LP bound.
BackupResult backup_find_sol(const LpSolver& solver, const Vec& theta,
                             const std::vector<std::pair<double, LpBox>>& sorted_boxes,
                             const BnbOptions& options = {});

nlohmann::json report_to_json(const SolveReport& report);

}  // namespace lampos

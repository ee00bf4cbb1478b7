#include "lampos/online.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace lampos {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

long elapsed_us(std::chrono::steady_clock::time_point from) {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now() - from)
      .count();
}
}  // namespace

Subopt suboptimality_estimate(const SolveReport& report) {
  if (!std::isfinite(report.lb))
    throw std::invalid_argument("suboptimality_estimate: LB must be finite");
  Subopt out;
  if (report.ub == kInf) {
    out.value = kInf;
    return out;
  }
  if (std::abs(report.lb) < 1e-9) {
    out.value = report.ub - report.lb;
    out.absolute = true;
    return out;
  }
  out.value = std::abs((report.ub - report.lb) / report.lb);
  return out;
}

BackupResult backup_find_sol(const LpSolver& solver, const Vec& theta,
                             const std::vector<std::pair<double, LpBox>>& sorted_boxes,
                             const BnbOptions& options) {
  BackupResult best;
  best.value = kInf;
  const std::size_t n = sorted_boxes.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto& [lp_value, box] = sorted_boxes[k];
    if (lp_value == kInf) break;  // LP-infeasible boxes have no MILP solution
    BnbOutcome sub = solve_milp(solver, theta, Cover{{box}}, options);
    ++best.milps_solved;
    if (sub.status == BnbStatus::NodeBudget)
      throw std::runtime_error("backup_find_sol: node budget exhausted");
    if (sub.status == BnbStatus::Optimal && sub.certificate->value < best.value) {
      best.feasible = true;
      best.value = sub.certificate->value;
      best.point = sub.certificate->point;
    }
    const double next_bound = k + 1 < n ? sorted_boxes[k + 1].first : kInf;
    if (best.feasible && best.value <= next_bound) break;
  }
  if (!best.feasible) best.value = kInf;
  return best;
}

SolveReport lampos_solve(const LpSolver& solver, const Vec& theta,
                         const StrategyFn& predictor,
                         const OnlineOptions& options) {
  SolveReport report;
  auto t0 = std::chrono::steady_clock::now();
  Strategy strategy = predictor(theta);
  report.us_predict = elapsed_us(t0);

  const std::size_t n_cover = strategy.cover.boxes.size();
  std::vector<BoxLpStat> stats(n_cover + 1);
  std::vector<std::optional<MilpPoint>> points(n_cover + 1);

  t0 = std::chrono::steady_clock::now();
  parallel_for(n_cover + 1, [&](std::size_t k) {
    const LpBox box = k < n_cover ? strategy.cover.boxes[k]
                                  : point_box(strategy.y_star);
    LpResult lp = solver.solve(theta, box);
    BoxLpStat& stat = stats[k];
    stat.box = box;
    stat.status = lp.status;
    stat.fixed_candidate = k == n_cover;
    if (lp.status == LpStatus::IterationLimit)
      throw std::runtime_error("lampos_solve: LP iteration limit hit");
    if (lp.status == LpStatus::Unbounded)
      throw std::runtime_error("lampos_solve: unbounded LP sub-problem");
    if (lp.status == LpStatus::Optimal) {
      stat.value = lp.value;
      stat.integral = is_integral(lp);
      if (stat.integral) points[k] = std::move(lp.point);
    } else {
      stat.value = kInf;
    }
  });
  report.us_parallel_lp = elapsed_us(t0);

  // UB needs the attaining point; re-derive it deterministically after the
  // parallel phase to keep the reduction independent of completion order.
  double ub = kInf;
  std::size_t ub_index = n_cover + 1;
  for (std::size_t k = 0; k <= n_cover; ++k) {
    if (!stats[k].integral) continue;
    if (stats[k].value < ub ||
        (stats[k].value == ub && ub_index <= n_cover &&
         stats[k].box < stats[ub_index].box)) {
      ub = stats[k].value;
      ub_index = k;
    }
  }

  // LB over the cover LPs only, matching the sort over k = 1..n_c.
  std::vector<std::pair<double, LpBox>> sorted_boxes;
  sorted_boxes.reserve(n_cover);
  for (std::size_t k = 0; k < n_cover; ++k)
    sorted_boxes.emplace_back(stats[k].value, stats[k].box);
  std::sort(sorted_boxes.begin(), sorted_boxes.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return a.second < b.second;
            });
  const double lb = sorted_boxes.empty() ? kInf : sorted_boxes.front().first;

  report.lp_stats = stats;
  report.lb = lb;
  report.ub = ub;

  if (ub < kInf && lb < kInf) {
    const bool degenerate = std::abs(lb) < 1e-9;
    const bool accept = degenerate ? (ub - lb <= options.tol)
                                   : (ub - lb <= options.tol * std::abs(lb));
    if (accept) {
      report.status = SolveStatus::AcceptedByPrediction;
      report.point = std::move(points[ub_index]);
      Subopt est = suboptimality_estimate(report);
      report.gap = est.value;
      report.gap_absolute = est.absolute;
      return report;
    }
  }

  auto tb = std::chrono::steady_clock::now();
  BackupResult backup = backup_find_sol(solver, theta, sorted_boxes, options.backup);
  report.us_backup = elapsed_us(tb);
  report.backup_milps = backup.milps_solved;
  if (!backup.feasible) {
    report.status = SolveStatus::Infeasible;
    report.ub = kInf;
    report.gap = kInf;
    return report;
  }
  report.status = SolveStatus::RecoveredByBackup;
  report.ub = std::min(report.ub, backup.value);
  report.point = std::move(backup.point);
  if (std::isfinite(report.lb)) {
    Subopt est = suboptimality_estimate(report);
    report.gap = est.value;
    report.gap_absolute = est.absolute;
  } else {
    report.gap = kInf;
  }
  return report;
}

SolveReport lampos_solve(const LpSolver& solver, const Vec& theta,
                         const PredictorModel& model,
                         const OnlineOptions& options) {
  return lampos_solve(
      solver, theta, [&](const Vec& t) { return predict(model, t); }, options);
}

nlohmann::json report_to_json(const SolveReport& report) {
  nlohmann::json j;
  switch (report.status) {
    case SolveStatus::AcceptedByPrediction:
      j["status"] = "accepted_by_prediction";
      break;
    case SolveStatus::RecoveredByBackup:
      j["status"] = "recovered_by_backup";
      break;
    case SolveStatus::Infeasible:
      j["status"] = "infeasible";
      break;
  }
  auto encode = [](double v) -> nlohmann::json {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
  };
  j["lb"] = encode(report.lb);
  j["ub"] = encode(report.ub);
  j["gap"] = encode(report.gap);
  j["gap_absolute"] = report.gap_absolute;
  j["us_predict"] = report.us_predict;
  j["us_parallel_lp"] = report.us_parallel_lp;
  j["us_backup"] = report.us_backup;
  j["backup_milps"] = report.backup_milps;
  nlohmann::json lps = nlohmann::json::array();
  for (const auto& stat : report.lp_stats) {
    nlohmann::json s;
    s["lb"] = bits_to_string(stat.box.lb);
    s["ub"] = bits_to_string(stat.box.ub);
    s["value"] = encode(stat.value);
    s["integral"] = stat.integral;
    s["fixed_candidate"] = stat.fixed_candidate;
    switch (stat.status) {
      case LpStatus::Optimal: s["status"] = "optimal"; break;
      case LpStatus::Infeasible: s["status"] = "infeasible"; break;
      case LpStatus::Unbounded: s["status"] = "unbounded"; break;
      case LpStatus::IterationLimit: s["status"] = "iteration_limit"; break;
    }
    lps.push_back(std::move(s));
  }
  j["lps"] = std::move(lps);
  if (report.point) {
    nlohmann::json z = nlohmann::json::array();
    for (int i = 0; i < report.point->z.size(); ++i) z.push_back(report.point->z[i]);
    nlohmann::json y = nlohmann::json::array();
    for (int i = 0; i < report.point->y.size(); ++i) y.push_back(report.point->y[i]);
    j["point"] = {{"z", std::move(z)}, {"y", std::move(y)}};
  }
  return j;
}

}  // namespace lampos

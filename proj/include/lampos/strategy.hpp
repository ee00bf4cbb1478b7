#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lampos/bnb.hpp"

namespace lampos {

/// A cover plus a candidate binary solution; everything needed to recover a
/// feasible point and bound its sub-optimality at any parameter.
struct Strategy {
  Cover cover;
  BitVec y_star;
  std::string id;  // content hash of the canonical boxes and y_star
};

std::string strategy_id(const Cover& canonical, const BitVec& y_star);
Strategy make_strategy(Cover cover, BitVec y_star);
Strategy extract_strategy(const BnbCertificate& cert);

struct StrategyEval {
  double v_lb = 0.0;
  double v_ub = 0.0;
  std::optional<MilpPoint> point;  // recovered from the fixed-y LP

  /// Relative over-estimate (v_ub - v_lb) / |v_lb|; +inf when v_ub is +inf;
  /// absolute difference when |v_lb| is tiny.
  double gap() const;
};

/// Computes the cover lower bound, the fixed-y upper bound and the recovered
/// point at theta.
StrategyEval evaluate_strategy(const LpSolver& solver, const Vec& theta,
                               const Strategy& s);
StrategyEval evaluate_strategy(const MpMilp& p, const Vec& theta,
                               const Strategy& s);

/// Completes a pairwise-disjoint partial box list into a full cover of
/// {0,1}^M by sweeping coordinates in ascending order away from the optimal
/// box; inputs are preserved, added boxes are disjoint from everything.
/// Throws std::invalid_argument when input boxes overlap.
Cover complete_cover(const LpBox& optimal_box, const std::vector<LpBox>& partial,
                     int M);

/// N1/N + (2*sqrt(2)+sqrt(3)) * sqrt(ln(3/beta)/N).
double good_turing_bound(long N, long N1, double beta);

struct DatasetSample {
  Vec theta;
  std::string strategy_id;   // current label (after any relabeling)
  std::string original_id;   // label straight from the sample's certificate
  double relabel_gap = 0.0;  // measured gap of the relabeled strategy at theta
  double cert_value = 0.0;   // optimal value at theta from the certificate
};

struct DatasetMeta {
  double beta = 1e-3;
  double epsilon = 0.1;
  long total = 0;       // accepted samples N
  long singletons = 0;  // N1 at the stopping point (raw labels)
  double final_bound = 0.0;
  std::uint64_t seed = 0;
  long rejected_draws = 0;
  int step_width = 0;  // binaries per horizon step for label decomposition
};

struct StrategyDataset {
  std::vector<DatasetSample> samples;
  std::map<std::string, Strategy> strategies;
  std::map<std::string, long> counts;  // per current label
  DatasetMeta meta;

  void recount();
  void save(const std::string& jsonl_path, const std::string& sidecar_path) const;
  static StrategyDataset load(const std::string& jsonl_path,
                              const std::string& sidecar_path);
};

/// Draws one parameter candidate; may use cheap geometric rejection
/// internally but does not need to guarantee MILP feasibility.
using ParameterSampler = std::function<Vec(SplitMix64&)>;

struct BuildOptions {
  double beta = 1e-3;
  double epsilon = 0.1;
  int cover_cap = 16;
  int knn = 20;
  double gap_tol = 1e-6;
  int draws_per_sample = 200;  // infeasible-draw budget per accepted sample
  std::uint64_t seed = 1;
  int step_width = 0;
  BnbOptions bnb;
  bool verbose = false;
};

/// Samples parameters, labels each with its own certificate strategy until
/// the Good-Turing bound drops to epsilon, then runs the redundancy and
/// cover-cap relabeling passes.
StrategyDataset build_dataset(const LpSolver& solver, const ParameterSampler& sampler,
                              const BuildOptions& options);

nlohmann::json strategy_to_json(const Strategy& s);
Strategy strategy_from_json(const nlohmann::json& j);

}  // namespace lampos

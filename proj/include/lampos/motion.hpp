#pragma once

#include "lampos/online.hpp"

namespace lampos {

struct ObstacleBox {
  Eigen::Vector2d a;  // lower corner
  Eigen::Vector2d b;  // upper corner
};

/// 2-D double integrator steered to the origin around axis-aligned box
/// obstacles; the planning problem is parametric in the current state.
struct BenchConfig {
  int horizon = 20;
  double dt = 0.1;
  std::vector<ObstacleBox> obstacles;
  Eigen::Vector4d state_bound;  // symmetric: -bound <= x <= bound
  Eigen::Vector2d input_bound;
  Mat Q;  // stage state cost, infinity norm
  Mat R;  // stage input cost
  Mat P;  // terminal state cost
  double big_m = 10.0;
  double goal_tol = 0.05;
  int max_steps = 200;

  static BenchConfig defaults();
  void validate() const;

  Eigen::Matrix4d dynamics_a() const;
  Eigen::Matrix<double, 4, 2> dynamics_b() const;
};

BenchConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const BenchConfig& cfg);
BenchConfig load_config(const std::string& path);

struct MotionMilp {
  MpMilp milp;
  CanonicalMap map;
  int param_dim = 4;
  std::vector<int> input_vars;  // original indices of u_{t|t}
  std::vector<int> state_vars;  // original indices of x_{t|t}
};

/// Assembles the standard-form mp-MILP: dynamics and initial-state equality
/// rows (the parameter enters only the latter), state/input box rows,
/// per-obstacle big-M rows with the <=3 indicator budget, and the
/// infinity-norm cost epigraphs. Binary count is 4 * n_obs * N, ordered
/// step-major.
MotionMilp build_motion_milp(const BenchConfig& cfg);

bool inside_any_obstacle(const BenchConfig& cfg, const Eigen::Vector2d& pos);
Vec dynamics_step(const BenchConfig& cfg, const Vec& x, const Vec& u);

/// Uniform draw over the state box (no feasibility guarantee beyond being
/// outside every obstacle interior).
Vec sample_state(const BenchConfig& cfg, SplitMix64& rng);

struct StepRecord {
  Vec state;
  Vec input;
  SolveReport report;
};

struct SimTrace {
  std::vector<StepRecord> steps;
  Vec final_state;
  bool reached_goal = false;
  bool failed = false;  // solver returned infeasible mid-trajectory

  void write_csv(const std::string& path) const;
};

using MpcSolver = std::function<SolveReport(const Vec& state)>;

/// Applies the first-stage input of each solve until the goal tolerance or
/// the step limit; truncates with failed=true on an infeasible solve.
SimTrace simulate_closed_loop(const BenchConfig& cfg, const Vec& x0,
                              const MotionMilp& problem, const MpcSolver& solver,
                              int max_steps = -1);

}  // namespace lampos

#include "lampos/motion.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace lampos {

BenchConfig BenchConfig::defaults() {
  BenchConfig cfg;
  cfg.horizon = 20;
  cfg.dt = 0.1;
  cfg.obstacles = {
      {{0.9, 0.9}, {1.7, 1.7}},
      {{-1.7, 0.9}, {-0.9, 1.7}},
      {{-1.7, -1.7}, {-0.9, -0.9}},
      {{0.9, -1.7}, {1.7, -0.9}},
  };
  cfg.state_bound << 3.0, 3.0, 2.0, 2.0;
  cfg.input_bound << 2.0, 2.0;
  cfg.Q = 1e3 * Mat::Identity(4, 4);
  cfg.R = 50.0 * Mat::Identity(2, 2);
  cfg.P = 1e5 * Mat::Identity(4, 4);
  cfg.big_m = 10.0;
  cfg.goal_tol = 0.05;
  cfg.max_steps = 200;
  return cfg;
}

void BenchConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  for (const auto& obs : obstacles)
    if (obs.a[0] >= obs.b[0] || obs.a[1] >= obs.b[1])
      throw std::invalid_argument("obstacle corners must satisfy a < b");
  const double diameter =
      2.0 * std::max(state_bound[0], state_bound[1]);
  if (big_m <= diameter)
    throw std::invalid_argument("big_m must exceed the workspace diameter");
  if (Q.rows() != 4 || Q.cols() != 4 || P.rows() != 4 || P.cols() != 4 ||
      R.rows() != 2 || R.cols() != 2)
    throw std::invalid_argument("cost matrices must be 4x4, 2x2, 4x4");
  if (goal_tol <= 0.0) throw std::invalid_argument("goal_tol must be positive");
}

Eigen::Matrix4d BenchConfig::dynamics_a() const {
  Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
  A(0, 2) = dt;
  A(1, 3) = dt;
  return A;
}

Eigen::Matrix<double, 4, 2> BenchConfig::dynamics_b() const {
  Eigen::Matrix<double, 4, 2> B = Eigen::Matrix<double, 4, 2>::Zero();
  B(2, 0) = dt;
  B(3, 1) = dt;
  return B;
}

namespace {

Mat cost_matrix_from_json(const nlohmann::json& j, int dim) {
  if (j.is_number()) return j.get<double>() * Mat::Identity(dim, dim);
  Mat m(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

nlohmann::json cost_matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

BenchConfig config_from_json(const nlohmann::json& j) {
  BenchConfig cfg = BenchConfig::defaults();
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.dt = j.value("dt", cfg.dt);
  if (j.contains("obstacles")) {
    cfg.obstacles.clear();
    for (const auto& o : j.at("obstacles")) {
      ObstacleBox box;
      box.a << o.at("a").at(0).get<double>(), o.at("a").at(1).get<double>();
      box.b << o.at("b").at(0).get<double>(), o.at("b").at(1).get<double>();
      cfg.obstacles.push_back(box);
    }
  }
  if (j.contains("state_bound"))
    for (int i = 0; i < 4; ++i) cfg.state_bound[i] = j.at("state_bound").at(i);
  if (j.contains("input_bound"))
    for (int i = 0; i < 2; ++i) cfg.input_bound[i] = j.at("input_bound").at(i);
  if (j.contains("Q")) cfg.Q = cost_matrix_from_json(j.at("Q"), 4);
  if (j.contains("R")) cfg.R = cost_matrix_from_json(j.at("R"), 2);
  if (j.contains("P")) cfg.P = cost_matrix_from_json(j.at("P"), 4);
  cfg.big_m = j.value("big_m", cfg.big_m);
  cfg.goal_tol = j.value("goal_tol", cfg.goal_tol);
  cfg.max_steps = j.value("max_steps", cfg.max_steps);
  cfg.validate();
  return cfg;
}

nlohmann::json config_to_json(const BenchConfig& cfg) {
  nlohmann::json j;
  j["horizon"] = cfg.horizon;
  j["dt"] = cfg.dt;
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& o : cfg.obstacles)
    obstacles.push_back({{"a", {o.a[0], o.a[1]}}, {"b", {o.b[0], o.b[1]}}});
  j["obstacles"] = std::move(obstacles);
  j["state_bound"] = {cfg.state_bound[0], cfg.state_bound[1], cfg.state_bound[2],
                      cfg.state_bound[3]};
  j["input_bound"] = {cfg.input_bound[0], cfg.input_bound[1]};
  j["Q"] = cost_matrix_to_json(cfg.Q);
  j["R"] = cost_matrix_to_json(cfg.R);
  j["P"] = cost_matrix_to_json(cfg.P);
  j["big_m"] = cfg.big_m;
  j["goal_tol"] = cfg.goal_tol;
  j["max_steps"] = cfg.max_steps;
  return j;
}

BenchConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  is >> j;
  return config_from_json(j);
}

MotionMilp build_motion_milp(const BenchConfig& cfg) {
  cfg.validate();
  const int N = cfg.horizon;
  const int n_obs = static_cast<int>(cfg.obstacles.size());

  // Original variable layout: x_0..x_N (4 each), u_0..u_{N-1} (2 each),
  // then step-major binaries: per step k, per obstacle i,
  // [dlo_x, dlo_y, dhi_x, dhi_y].
  const int x_base = 0;
  const int u_base = 4 * (N + 1);
  const int d_base = u_base + 2 * N;
  const int num_vars = d_base + 4 * n_obs * N;

  GeneralModel model = GeneralModel::make(num_vars, 4);
  auto xv = [&](int k, int i) { return x_base + 4 * k + i; };
  auto uv = [&](int k, int i) { return u_base + 2 * k + i; };
  auto dv = [&](int k, int obs, int i) {
    return d_base + 4 * n_obs * k + 4 * obs + i;
  };
  for (int v = d_base; v < num_vars; ++v) model.binaries.push_back(v);

  const Eigen::Matrix4d A = cfg.dynamics_a();
  const Eigen::Matrix<double, 4, 2> B = cfg.dynamics_b();

  // Initial state rows carry the parameter: x_0 = theta.
  for (int i = 0; i < 4; ++i) {
    LinRow row;
    row.terms.push_back({xv(0, i), 1.0});
    row.theta_terms.push_back({i, 1.0});
    model.equalities.push_back(std::move(row));
  }
  // Dynamics rows: x_{k+1} = A x_k + B u_k.
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < 4; ++i) {
      LinRow row;
      row.terms.push_back({xv(k + 1, i), 1.0});
      for (int j = 0; j < 4; ++j)
        if (A(i, j) != 0.0) row.terms.push_back({xv(k, j), -A(i, j)});
      for (int j = 0; j < 2; ++j)
        if (B(i, j) != 0.0) row.terms.push_back({uv(k, j), -B(i, j)});
      model.equalities.push_back(std::move(row));
    }
  }
  // State boxes on x_1..x_N and input boxes on u_0..u_{N-1}.
  for (int k = 1; k <= N; ++k) {
    for (int i = 0; i < 4; ++i) {
      LinRow hi;
      hi.terms.push_back({xv(k, i), 1.0});
      hi.rhs = cfg.state_bound[i];
      model.inequalities.push_back(std::move(hi));
      LinRow lo;
      lo.terms.push_back({xv(k, i), -1.0});
      lo.rhs = cfg.state_bound[i];
      model.inequalities.push_back(std::move(lo));
    }
  }
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < 2; ++i) {
      LinRow hi;
      hi.terms.push_back({uv(k, i), 1.0});
      hi.rhs = cfg.input_bound[i];
      model.inequalities.push_back(std::move(hi));
      LinRow lo;
      lo.terms.push_back({uv(k, i), -1.0});
      lo.rhs = cfg.input_bound[i];
      model.inequalities.push_back(std::move(lo));
    }
  }
  // Obstacle avoidance on the positions of x_{k+1}, with the indicator
  // budget 1'dlo + 1'dhi <= 3 forcing one separating face per obstacle.
  for (int k = 0; k < N; ++k) {
    for (int obs = 0; obs < n_obs; ++obs) {
      const auto& box = cfg.obstacles[static_cast<std::size_t>(obs)];
      for (int i = 0; i < 2; ++i) {
        LinRow low;  // pos_i - M dlo_i <= a_i
        low.terms.push_back({xv(k + 1, i), 1.0});
        low.terms.push_back({dv(k, obs, i), -cfg.big_m});
        low.rhs = box.a[i];
        model.inequalities.push_back(std::move(low));
        LinRow high;  // -pos_i - M dhi_i <= -b_i
        high.terms.push_back({xv(k + 1, i), -1.0});
        high.terms.push_back({dv(k, obs, 2 + i), -cfg.big_m});
        high.rhs = -box.b[i];
        model.inequalities.push_back(std::move(high));
      }
      LinRow budget;
      for (int i = 0; i < 4; ++i) budget.terms.push_back({dv(k, obs, i), 1.0});
      budget.rhs = 3.0;
      model.inequalities.push_back(std::move(budget));
    }
  }
  // Cost: ||P x_N|| + sum_k ||Q x_k|| + ||R u_k||, all infinity norms.
  {
    EpigraphTerm terminal;
    for (int i = 0; i < 4; ++i) {
      std::vector<LinTerm> row;
      for (int j = 0; j < 4; ++j)
        if (cfg.P(i, j) != 0.0) row.push_back({xv(N, j), cfg.P(i, j)});
      terminal.rows.push_back(std::move(row));
    }
    model.epigraphs.push_back(std::move(terminal));
  }
  for (int k = 0; k < N; ++k) {
    EpigraphTerm state_term;
    for (int i = 0; i < 4; ++i) {
      std::vector<LinTerm> row;
      for (int j = 0; j < 4; ++j)
        if (cfg.Q(i, j) != 0.0) row.push_back({xv(k, j), cfg.Q(i, j)});
      state_term.rows.push_back(std::move(row));
    }
    model.epigraphs.push_back(std::move(state_term));
    EpigraphTerm input_term;
    for (int i = 0; i < 2; ++i) {
      std::vector<LinTerm> row;
      for (int j = 0; j < 2; ++j)
        if (cfg.R(i, j) != 0.0) row.push_back({uv(k, j), cfg.R(i, j)});
      input_term.rows.push_back(std::move(row));
    }
    model.epigraphs.push_back(std::move(input_term));
  }

  Canonical canonical = canonicalize(model);
  MotionMilp out;
  out.milp = std::move(canonical.milp);
  out.map = std::move(canonical.map);
  out.input_vars = {uv(0, 0), uv(0, 1)};
  out.state_vars = {xv(0, 0), xv(0, 1), xv(0, 2), xv(0, 3)};
  return out;
}

bool inside_any_obstacle(const BenchConfig& cfg, const Eigen::Vector2d& pos) {
  for (const auto& obs : cfg.obstacles)
    if (pos[0] > obs.a[0] && pos[0] < obs.b[0] && pos[1] > obs.a[1] &&
        pos[1] < obs.b[1])
      return true;
  return false;
}

Vec dynamics_step(const BenchConfig& cfg, const Vec& x, const Vec& u) {
  return cfg.dynamics_a() * x + cfg.dynamics_b() * u;
}

Vec sample_state(const BenchConfig& cfg, SplitMix64& rng) {
  for (;;) {
    Vec x(4);
    for (int i = 0; i < 4; ++i)
      x[i] = rng.uniform(-cfg.state_bound[i], cfg.state_bound[i]);
    if (!inside_any_obstacle(cfg, x.head<2>())) return x;
  }
}

SimTrace simulate_closed_loop(const BenchConfig& cfg, const Vec& x0,
                              const MotionMilp& problem, const MpcSolver& solver,
                              int max_steps) {
  if (max_steps < 0) max_steps = cfg.max_steps;
  SimTrace trace;
  Vec x = x0;
  for (int step = 0; step < max_steps; ++step) {
    if (x.lpNorm<Eigen::Infinity>() <= cfg.goal_tol) break;
    SolveReport report = solver(x);
    if (report.status == SolveStatus::Infeasible || !report.point) {
      trace.failed = true;
      trace.final_state = x;
      return trace;
    }
    Vec u(2);
    u[0] = problem.map.original_value(*report.point, problem.input_vars[0]);
    u[1] = problem.map.original_value(*report.point, problem.input_vars[1]);
    StepRecord record;
    record.state = x;
    record.input = u;
    record.report = std::move(report);
    trace.steps.push_back(std::move(record));
    x = dynamics_step(cfg, x, u);
  }
  trace.final_state = x;
  trace.reached_goal = x.lpNorm<Eigen::Infinity>() <= cfg.goal_tol;
  return trace;
}

void SimTrace::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "step,px,py,vx,vy,ux,uy,lb,ub,gap,us_predict,us_parallel_lp,us_backup,"
        "backup_milps,status\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const char* status = s.report.status == SolveStatus::AcceptedByPrediction
                             ? "accepted"
                             : (s.report.status == SolveStatus::RecoveredByBackup
                                    ? "backup"
                                    : "infeasible");
    os << i << ',' << s.state[0] << ',' << s.state[1] << ',' << s.state[2] << ','
       << s.state[3] << ',' << s.input[0] << ',' << s.input[1] << ','
       << s.report.lb << ',' << s.report.ub << ',' << s.report.gap << ','
       << s.report.us_predict << ',' << s.report.us_parallel_lp << ','
       << s.report.us_backup << ',' << s.report.backup_milps << ',' << status
       << "\n";
  }
}

}  // namespace lampos

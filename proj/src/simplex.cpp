#include "lampos/simplex.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace lampos {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kEtaPivotTol = 1e-7;
constexpr double kDegenerateStep = 1e-12;
constexpr double kFaceTol = 1e-9;
constexpr int kStallLimit = 1000;
constexpr int kMaxTieProbes = 8;

using SpMat = Eigen::SparseMatrix<double>;

}  // namespace

void LpBox::validate(int M) const {
  if (static_cast<int>(lb.size()) != M || static_cast<int>(ub.size()) != M)
    throw std::invalid_argument("box dimension mismatch");
  for (int i = 0; i < M; ++i) {
    if (lb[i] > 1 || ub[i] > 1 || lb[i] > ub[i])
      throw std::invalid_argument("box bounds must satisfy 0 <= lb <= ub <= 1");
  }
}

bool LpBox::contains(const BitVec& y) const {
  if (y.size() != lb.size()) return false;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] < lb[i] || y[i] > ub[i]) return false;
  return true;
}

LpBox root_box(int M) {
  return LpBox{BitVec(static_cast<std::size_t>(M), 0),
               BitVec(static_cast<std::size_t>(M), 1)};
}

LpBox point_box(const BitVec& y) { return LpBox{y, y}; }

int free_count(const LpBox& box) {
  int count = 0;
  for (std::size_t i = 0; i < box.lb.size(); ++i)
    if (box.lb[i] < box.ub[i]) ++count;
  return count;
}

bool boxes_intersect(const LpBox& a, const LpBox& b) {
  for (std::size_t i = 0; i < a.lb.size(); ++i)
    if (std::max(a.lb[i], b.lb[i]) > std::min(a.ub[i], b.ub[i])) return false;
  return true;
}

bool box_subset(const LpBox& inner, const LpBox& outer) {
  for (std::size_t i = 0; i < inner.lb.size(); ++i)
    if (inner.lb[i] < outer.lb[i] || inner.ub[i] > outer.ub[i]) return false;
  return true;
}

bool is_integral(const LpResult& res) {
  if (res.status != LpStatus::Optimal || !res.point)
    throw std::invalid_argument("is_integral requires an Optimal result");
  const Vec& y = res.point->y;
  for (int i = 0; i < y.size(); ++i)
    if (std::abs(y[i] - std::round(y[i])) > kIntTol) return false;
  return true;
}

// --- Immutable per-problem data ----------------------------------------------

struct LpSolver::Impl {
  int m = 0;
  int n_struct = 0;  // n + M structural columns
  int n_z = 0;

  // CSC over structural columns, rows pre-scaled by powers of two.
  std::vector<int> col_start;
  std::vector<int> row_index;
  std::vector<double> value;

  std::vector<double> cost;       // reported objective
  std::vector<double> pert_cost;  // pivoting objective: cost plus a tiny
                                  // deterministic perturbation that makes the
                                  // optimal vertex generically unique
  std::vector<double> row_scale;

  // Per row: singleton columns for the crash, and all columns touching the
  // row (used by the integrality repair pass).
  std::vector<std::vector<int>> row_singletons;
  std::vector<std::vector<int>> row_cols;
  // Antiparallel column partner (split variables), -1 when none.
  std::vector<int> pair_of;
  int first_row(int col) const { return row_index[col_start[col]]; }
};

namespace {

struct Eta {
  int row = 0;
  double diag = 1.0;
  std::vector<std::pair<int, double>> off;
};

enum class VarState : std::uint8_t { Basic, AtLower, AtUpper };

struct Work {
  const LpSolver::Impl& P;
  long max_iterations = 0;
  int refactor_interval = 50;

  int m = 0;
  int n_total = 0;

  std::vector<double> lo, hi;
  std::vector<VarState> state;
  std::vector<double> art_sign;
  std::vector<int> basic;
  Vec x_basic;
  Vec b;

  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  std::vector<Eta> etas;
  int pivots_since_refactor = 0;
  long iterations = 0;
  bool bland = false;
  int degenerate_run = 0;
  bool phase_one = true;

  // Trace counters, reported when LAMPOS_LP_TRACE is set.
  bool trace = false;
  long phase1_iters = 0;
  long polish_moves = 0;
  long flips = 0;
  long probes = 0;
  long factorizations = 0;
  long us_btran = 0, us_price = 0, us_ftran = 0, us_factor = 0;

  explicit Work(const LpSolver::Impl& impl) : P(impl) {}

  std::chrono::steady_clock::time_point tick() const {
    return trace ? std::chrono::steady_clock::now()
                 : std::chrono::steady_clock::time_point{};
  }
  void tock(std::chrono::steady_clock::time_point from, long& bucket) const {
    if (!trace) return;
    bucket += std::chrono::duration_cast<std::chrono::microseconds>(
                  std::chrono::steady_clock::now() - from)
                  .count();
  }

  bool is_artificial(int var) const { return var >= P.n_struct; }
  int artificial_row(int var) const { return var - P.n_struct; }
  bool is_binary(int var) const { return var >= P.n_z && var < P.n_struct; }

  double nonbasic_value(int var) const {
    return state[var] == VarState::AtUpper ? hi[var] : lo[var];
  }

  double phase_cost(int var) const {
    if (phase_one) return is_artificial(var) ? 1.0 : 0.0;
    return is_artificial(var) ? 0.0 : P.pert_cost[var];
  }

  double true_cost(int var) const {
    return is_artificial(var) ? 0.0 : P.pert_cost[var];
  }

  double report_cost(int var) const {
    return is_artificial(var) ? 0.0 : P.cost[var];
  }

  void scatter_column(int var, Vec& out) const {
    out.setZero();
    if (is_artificial(var)) {
      out[artificial_row(var)] = art_sign[artificial_row(var)];
      return;
    }
    for (int k = P.col_start[var]; k < P.col_start[var + 1]; ++k)
      out[P.row_index[k]] += P.value[k];
  }

  double dot_column(int var, const Vec& v) const {
    if (is_artificial(var))
      return art_sign[artificial_row(var)] * v[artificial_row(var)];
    double acc = 0.0;
    for (int k = P.col_start[var]; k < P.col_start[var + 1]; ++k)
      acc += P.value[k] * v[P.row_index[k]];
    return acc;
  }

  // Backward-error scale of the reduced cost of column var.
  double reduced_cost_scale(int var, const Vec& lambda) const {
    double scale = 1.0 + std::abs(true_cost(var));
    if (is_artificial(var)) return scale + std::abs(lambda[artificial_row(var)]);
    for (int k = P.col_start[var]; k < P.col_start[var + 1]; ++k)
      scale += std::abs(P.value[k]) * std::abs(lambda[P.row_index[k]]);
    return scale;
  }

  void factorize() {
    const auto t0 = tick();
    etas.clear();
    pivots_since_refactor = 0;
    ++factorizations;
    if (m == 0) return;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * 4);
    for (int pos = 0; pos < m; ++pos) {
      const int var = basic[pos];
      if (is_artificial(var)) {
        trip.emplace_back(artificial_row(var), pos,
                          art_sign[artificial_row(var)]);
      } else {
        for (int k = P.col_start[var]; k < P.col_start[var + 1]; ++k)
          trip.emplace_back(P.row_index[k], pos, P.value[k]);
      }
    }
    SpMat B(m, m);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    lu.analyzePattern(B);
    lu.factorize(B);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("simplex: singular basis factorization");
    tock(t0, us_factor);
  }

  void ftran(Vec& x) const {
    if (m == 0) return;
    x = lu.solve(x);
    for (const auto& eta : etas) {
      const double pivot = x[eta.row] / eta.diag;
      x[eta.row] = pivot;
      if (pivot != 0.0)
        for (const auto& [pos, wv] : eta.off) x[pos] -= wv * pivot;
    }
  }

  void btran(Vec& x) {
    if (m == 0) return;
    for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
      double dot = 0.0;
      for (const auto& [pos, wv] : it->off) dot += wv * x[pos];
      x[it->row] = (x[it->row] - dot) / it->diag;
    }
    x = lu.adjoint().solve(x);
  }

  void recompute_basics() {
    if (m == 0) return;
    Vec r = b;
    for (int var = 0; var < P.n_struct; ++var) {
      if (state[var] == VarState::Basic) continue;
      const double xv = nonbasic_value(var);
      if (xv == 0.0) continue;
      for (int k = P.col_start[var]; k < P.col_start[var + 1]; ++k)
        r[P.row_index[k]] -= P.value[k] * xv;
    }
    x_basic = r;
    ftran(x_basic);
  }

  double objective() const {
    long double acc = 0.0L;
    for (int var = 0; var < n_total; ++var) {
      const double cost = phase_cost(var);
      if (cost == 0.0 || state[var] == VarState::Basic) continue;
      acc += static_cast<long double>(cost) * nonbasic_value(var);
    }
    for (int pos = 0; pos < m; ++pos) {
      const double cost = phase_cost(basic[pos]);
      if (cost != 0.0) acc += static_cast<long double>(cost) * x_basic[pos];
    }
    return static_cast<double>(acc);
  }

  void apply_flip(int entering, double dir, double range, const Vec& w) {
    ++flips;
    for (int pos = 0; pos < m; ++pos) x_basic[pos] -= dir * range * w[pos];
    state[entering] = state[entering] == VarState::AtLower ? VarState::AtUpper
                                                           : VarState::AtLower;
  }

  void apply_pivot(int entering, double dir, double step, int leave_pos,
                   bool leave_at_upper, const Vec& w) {
    for (int pos = 0; pos < m; ++pos) x_basic[pos] -= dir * step * w[pos];
    const int leave_var = basic[leave_pos];
    const double enter_from = nonbasic_value(entering);
    basic[leave_pos] = entering;
    x_basic[leave_pos] = enter_from + dir * step;
    state[entering] = VarState::Basic;
    state[leave_var] = leave_at_upper ? VarState::AtUpper : VarState::AtLower;
    if (is_artificial(leave_var)) {
      // Once an artificial leaves it is pinned at zero for good.
      lo[leave_var] = 0.0;
      hi[leave_var] = 0.0;
      state[leave_var] = VarState::AtLower;
    }
    const double pivot = w[leave_pos];
    if (std::abs(pivot) < kEtaPivotTol ||
        pivots_since_refactor + 1 >= refactor_interval) {
      factorize();
      recompute_basics();
    } else {
      Eta eta;
      eta.row = leave_pos;
      eta.diag = pivot;
      for (int pos = 0; pos < m; ++pos)
        if (pos != leave_pos && w[pos] != 0.0) eta.off.emplace_back(pos, w[pos]);
      etas.push_back(std::move(eta));
      ++pivots_since_refactor;
    }
  }
};

struct RatioResult {
  double step = kInf;
  int leave_pos = -1;
  bool leave_at_upper = false;
};

// Two-pass Harris ratio test: pass one bounds the step with a small
// feasibility slack, pass two picks the largest pivot inside the bound.
RatioResult ratio_test(const Work& W, const Vec& w, double dir) {
  constexpr double kFeasSlack = 1e-9;
  double limit = kInf;
  for (int pos = 0; pos < W.m; ++pos) {
    const double g = dir * w[pos];
    if (std::abs(g) <= kPivotTol) continue;
    const int var = W.basic[pos];
    double ratio;
    if (g > 0.0) {
      if (W.lo[var] == -kInf) continue;
      ratio = (W.x_basic[pos] - W.lo[var] + kFeasSlack) / g;
    } else {
      if (W.hi[var] == kInf) continue;
      ratio = (W.x_basic[pos] - W.hi[var] - kFeasSlack) / g;
    }
    limit = std::min(limit, ratio);
  }

  RatioResult best;
  if (limit == kInf) return best;

  double best_weight = 0.0;
  for (int pos = 0; pos < W.m; ++pos) {
    const double g = dir * w[pos];
    if (std::abs(g) <= kPivotTol) continue;
    const int var = W.basic[pos];
    double ratio;
    bool at_upper;
    if (g > 0.0) {
      if (W.lo[var] == -kInf) continue;
      ratio = (W.x_basic[pos] - W.lo[var]) / g;
      at_upper = false;
    } else {
      if (W.hi[var] == kInf) continue;
      ratio = (W.x_basic[pos] - W.hi[var]) / g;
      at_upper = true;
    }
    if (ratio > limit) continue;
    const double weight = std::abs(g);
    if (best.leave_pos < 0 || weight > best_weight ||
        (weight == best_weight && var < W.basic[best.leave_pos])) {
      best.step = std::max(ratio, 0.0);
      best.leave_pos = pos;
      best.leave_at_upper = at_upper;
      best_weight = weight;
    }
  }
  return best;
}

enum class PhaseEnd { Optimal, Unbounded, IterationLimit };

PhaseEnd run_phase(Work& W) {
  Vec lambda(W.m);
  Vec w(W.m);
  Vec probe(W.m);
  const long max_iters = W.max_iterations;

  for (;;) {
    if (W.iterations >= max_iters) return PhaseEnd::IterationLimit;

    auto t0 = W.tick();
    for (int pos = 0; pos < W.m; ++pos) lambda[pos] = W.phase_cost(W.basic[pos]);
    W.btran(lambda);
    W.tock(t0, W.us_btran);

    // Pricing: Dantzig with exact-tie probing, or Bland when stalled.
    t0 = W.tick();
    int entering = -1;
    double entering_dir = 1.0;
    double best_score = kDualTol;
    std::vector<std::pair<int, double>> ties;
    for (int var = 0; var < W.n_total; ++var) {
      const VarState st = W.state[var];
      if (st == VarState::Basic) continue;
      if (W.lo[var] == W.hi[var]) continue;
      const double d = W.phase_cost(var) - W.dot_column(var, lambda);
      double dir;
      if (st == VarState::AtLower && d < -kDualTol)
        dir = 1.0;
      else if (st == VarState::AtUpper && d > kDualTol)
        dir = -1.0;
      else
        continue;
      if (W.bland) {
        entering = var;
        entering_dir = dir;
        break;
      }
      const double score = std::abs(d);
      if (score > best_score) {
        best_score = score;
        ties.clear();
        ties.emplace_back(var, dir);
      } else if (score == best_score && !ties.empty() &&
                 static_cast<int>(ties.size()) < kMaxTieProbes) {
        ties.emplace_back(var, dir);
      }
    }
    W.tock(t0, W.us_price);

    bool have_w = false;
    if (!W.bland) {
      if (ties.empty()) return PhaseEnd::Optimal;
      if (ties.size() == 1) {
        entering = ties[0].first;
        entering_dir = ties[0].second;
      } else {
        // Structurally tied candidates: probe the ratio test of each and
        // take the longest step. Full bound flips beat short blocked moves,
        // which keeps indicator-style columns integral.
        double best_step = -1.0;
        for (const auto& [var, dir] : ties) {
          ++W.probes;
          W.scatter_column(var, probe);
          W.ftran(probe);
          RatioResult r = ratio_test(W, probe, dir);
          const double step = std::min(r.step, W.hi[var] - W.lo[var]);
          if (step > best_step) {
            best_step = step;
            entering = var;
            entering_dir = dir;
            w = probe;
            have_w = true;
          }
        }
      }
    } else if (entering < 0) {
      return PhaseEnd::Optimal;
    }

    auto t1 = W.tick();
    if (!have_w) {
      W.scatter_column(entering, w);
      W.ftran(w);
    }
    W.tock(t1, W.us_ftran);

    RatioResult r = ratio_test(W, w, entering_dir);
    const double range = W.hi[entering] - W.lo[entering];
    ++W.iterations;

    if (r.step == kInf && range == kInf) {
      if (W.phase_one) throw std::runtime_error("simplex: unbounded phase-1 ray");
      return PhaseEnd::Unbounded;
    }

    if (range <= r.step) {
      W.apply_flip(entering, entering_dir, range, w);
      W.degenerate_run = range <= kDegenerateStep ? W.degenerate_run + 1 : 0;
    } else {
      const double pivot = w[r.leave_pos];
      if (std::abs(pivot) < kEtaPivotTol && !W.etas.empty()) {
        // Suspicious pivot on a drifted factorization: refresh and redo the
        // iteration with exact numbers.
        W.factorize();
        W.recompute_basics();
        continue;
      }
      W.apply_pivot(entering, entering_dir, r.step, r.leave_pos,
                    r.leave_at_upper, w);
      W.degenerate_run = r.step <= kDegenerateStep ? W.degenerate_run + 1 : 0;
    }

    if (!W.bland && W.degenerate_run > kStallLimit) {
      W.bland = true;
      W.factorize();
      W.recompute_basics();
    }
  }
}

// Optimality must survive a fresh factorization before it counts.
PhaseEnd run_phase_verified(Work& W) {
  for (;;) {
    PhaseEnd end = run_phase(W);
    if (end != PhaseEnd::Optimal) return end;
    if (W.pivots_since_refactor == 0 && W.etas.empty()) return end;
    W.factorize();
    W.recompute_basics();
  }
}

// Walks to alternate optimal vertices with fewer fractional binaries.
// Candidates are nonbasic columns sharing a row with some fractional basic
// binary whose reduced cost is zero up to its own rounding scale (so the
// move stays on the optimal face); a move is applied only when it strictly
// lowers the number of fractional basic binaries, which bounds the pass.
void polish_binaries(Work& W) {
  if (W.m == 0) return;
  Vec lambda2(W.m);
  Vec w(W.m);
  std::vector<int> visited(static_cast<std::size_t>(W.n_total), -1);
  const int max_rounds = 2 * (W.P.n_struct - W.P.n_z) + 8;

  auto fractional = [&](double v) {
    return std::abs(v - std::round(v)) > kIntTol;
  };

  for (int round = 0; round < max_rounds; ++round) {
    std::vector<int> frac_positions;
    for (int pos = 0; pos < W.m; ++pos) {
      const int var = W.basic[pos];
      if (W.is_binary(var) && W.lo[var] < W.hi[var] &&
          fractional(W.x_basic[pos]))
        frac_positions.push_back(pos);
    }
    if (frac_positions.empty()) return;
    const int count_before = static_cast<int>(frac_positions.size());

    for (int pos = 0; pos < W.m; ++pos) lambda2[pos] = W.true_cost(W.basic[pos]);
    W.btran(lambda2);

    auto count_after = [&](double dir, double step, int leave_pos,
                           int enter_var) {
      int count = 0;
      for (int pos = 0; pos < W.m; ++pos) {
        int var = W.basic[pos];
        double v = W.x_basic[pos] - dir * step * w[pos];
        if (pos == leave_pos) {
          var = enter_var;
          v = W.nonbasic_value(enter_var) + dir * step;
        }
        if (W.is_binary(var) && W.lo[var] < W.hi[var] && fractional(v)) ++count;
      }
      return count;
    };

    bool moved = false;
    for (int fpos : frac_positions) {
      const int fvar = W.basic[fpos];
      for (int k = W.P.col_start[fvar]; k < W.P.col_start[fvar + 1] && !moved;
           ++k) {
        for (int q : W.P.row_cols[W.P.row_index[k]]) {
          if (visited[q] == round) continue;
          visited[q] = round;
          if (W.state[q] == VarState::Basic || W.lo[q] >= W.hi[q]) continue;
          const double d2 = W.true_cost(q) - W.dot_column(q, lambda2);
          if (std::abs(d2) > kFaceTol * W.reduced_cost_scale(q, lambda2))
            continue;
          const double dir = W.state[q] == VarState::AtLower ? 1.0 : -1.0;
          ++W.probes;
          W.scatter_column(q, w);
          W.ftran(w);
          RatioResult r = ratio_test(W, w, dir);
          const double range = W.hi[q] - W.lo[q];
          if (range <= r.step) {
            if (!std::isfinite(range)) continue;
            if (count_after(dir, range, -1, q) < count_before) {
              W.apply_flip(q, dir, range, w);
              moved = true;
              ++W.polish_moves;
              break;
            }
          } else if (r.leave_pos >= 0) {
            if (count_after(dir, r.step, r.leave_pos, q) < count_before) {
              W.apply_pivot(q, dir, r.step, r.leave_pos, r.leave_at_upper, w);
              moved = true;
              ++W.polish_moves;
              break;
            }
          }
        }
        if (moved) break;
      }
      if (moved) break;
    }
    if (!moved) return;
  }
}

}  // namespace

LpSolver::LpSolver(const MpMilp& problem, LpOptions options)
    : problem_(problem), options_(options) {
  problem_.validate();
  auto impl = std::make_unique<Impl>();
  const int m = problem_.m();
  const int n = problem_.n();
  const int M = problem_.M();
  impl->m = m;
  impl->n_z = n;
  impl->n_struct = n + M;

  impl->row_scale.assign(static_cast<std::size_t>(m), 1.0);
  for (int i = 0; i < m; ++i) {
    double mx = 0.0;
    for (int j = 0; j < n; ++j) mx = std::max(mx, std::abs(problem_.A(i, j)));
    for (int j = 0; j < M; ++j) mx = std::max(mx, std::abs(problem_.B(i, j)));
    if (mx > 0.0) {
      int exp = 0;
      std::frexp(mx, &exp);
      impl->row_scale[i] = std::ldexp(1.0, -exp + 1);  // scaled max in [1,2)
    }
  }

  impl->col_start.assign(static_cast<std::size_t>(impl->n_struct) + 1, 0);
  auto entry = [&](int row, int col) -> double {
    return col < n ? problem_.A(row, col) : problem_.B(row, col - n);
  };
  for (int col = 0; col < impl->n_struct; ++col) {
    int count = 0;
    for (int row = 0; row < m; ++row)
      if (entry(row, col) != 0.0) ++count;
    impl->col_start[col + 1] = impl->col_start[col] + count;
  }
  impl->row_index.resize(impl->col_start.back());
  impl->value.resize(impl->col_start.back());
  for (int col = 0, k = 0; col < impl->n_struct; ++col) {
    for (int row = 0; row < m; ++row) {
      const double v = entry(row, col);
      if (v == 0.0) continue;
      impl->row_index[k] = row;
      impl->value[k] = v * impl->row_scale[row];
      ++k;
    }
  }

  impl->cost.resize(static_cast<std::size_t>(impl->n_struct));
  for (int j = 0; j < n; ++j) impl->cost[j] = problem_.c[j];
  for (int j = 0; j < M; ++j) impl->cost[n + j] = problem_.d[j];
  impl->pert_cost.resize(impl->cost.size());
  for (int j = 0; j < impl->n_struct; ++j) {
    const double spread =
        0.5 + 0.5 * std::fmod(0.61803398874989485 * (j + 1), 1.0);
    const double eps = 1e-9 * (1.0 + std::abs(impl->cost[j])) * spread;
    // Binaries lean toward their upper bound, continuous columns toward
    // their lower bound; ties between alternate optima break the same way
    // in every sub-problem of the same instance.
    impl->pert_cost[j] = impl->cost[j] + (j >= n ? -eps : eps);
  }

  impl->row_singletons.assign(static_cast<std::size_t>(m), {});
  impl->row_cols.assign(static_cast<std::size_t>(m), {});
  for (int col = 0; col < impl->n_struct; ++col) {
    const int nnz = impl->col_start[col + 1] - impl->col_start[col];
    for (int k = impl->col_start[col]; k < impl->col_start[col + 1]; ++k)
      impl->row_cols[impl->row_index[k]].push_back(col);
    if (nnz == 1)
      impl->row_singletons[impl->row_index[impl->col_start[col]]].push_back(col);
  }

  // Detect antiparallel continuous column pairs (split variables): same
  // sparsity pattern, exactly negated values and costs.
  impl->pair_of.assign(static_cast<std::size_t>(impl->n_struct), -1);
  for (int col = 0; col + 1 < n; ++col) {
    const int next = col + 1;
    const int nnz = impl->col_start[col + 1] - impl->col_start[col];
    if (nnz == 0 || impl->col_start[next + 1] - impl->col_start[next] != nnz)
      continue;
    if (impl->cost[col] != -impl->cost[next]) continue;
    bool anti = true;
    for (int k = 0; k < nnz && anti; ++k) {
      const int ka = impl->col_start[col] + k;
      const int kb = impl->col_start[next] + k;
      if (impl->row_index[ka] != impl->row_index[kb] ||
          impl->value[ka] != -impl->value[kb])
        anti = false;
    }
    if (anti) {
      impl->pair_of[col] = next;
      impl->pair_of[next] = col;
      ++col;  // consume the partner
    }
  }

  impl_ = std::move(impl);
}

LpSolver::~LpSolver() = default;

LpResult LpSolver::solve(const Vec& theta, const LpBox& box) const {
  const Impl& P = *impl_;
  const int m = P.m;
  const int n = P.n_z;
  const int M = P.n_struct - n;
  box.validate(M);

  static const bool trace_env = std::getenv("LAMPOS_LP_TRACE") != nullptr;
  Work W(P);
  W.trace = trace_env;
  W.m = m;
  W.n_total = P.n_struct + m;
  W.max_iterations = options_.max_iterations > 0
                         ? options_.max_iterations
                         : 50L * static_cast<long>(P.n_struct + m);
  W.refactor_interval = std::max(2, options_.refactor_interval);

  W.lo.assign(static_cast<std::size_t>(W.n_total), 0.0);
  W.hi.assign(static_cast<std::size_t>(W.n_total), kInf);
  for (int j = 0; j < M; ++j) {
    W.lo[n + j] = static_cast<double>(box.lb[j]);
    W.hi[n + j] = static_cast<double>(box.ub[j]);
  }

  Vec b_raw = problem_.rhs.at(theta);
  W.b.resize(m);
  for (int i = 0; i < m; ++i) W.b[i] = b_raw[i] * P.row_scale[i];

  // Initial point: bounded variables rest at their upper bound, one-sided
  // ones at their finite bound.
  W.state.assign(static_cast<std::size_t>(W.n_total), VarState::AtLower);
  for (int j = 0; j < P.n_struct; ++j)
    if (W.hi[j] != kInf) W.state[j] = VarState::AtUpper;

  // Crash in row order. Per row, prefer a singleton column whose implied
  // value fits its bounds; otherwise accept a continuous column (or split
  // pair) whose remaining nonzeros all lie in later rows, keeping the basis
  // triangular; otherwise install an artificial. Assigned values propagate
  // into later residuals, so equality chains start already satisfied.
  Vec residual = W.b;
  for (int var = 0; var < P.n_struct; ++var) {
    const double xv = W.nonbasic_value(var);
    if (xv == 0.0) continue;
    for (int k = P.col_start[var]; k < P.col_start[var + 1]; ++k)
      residual[P.row_index[k]] -= P.value[k] * xv;
  }
  W.art_sign.assign(static_cast<std::size_t>(m), 1.0);
  W.basic.assign(static_cast<std::size_t>(m), -1);
  W.x_basic = Vec::Zero(m);
  bool any_artificial = false;
  std::vector<bool> consumed(static_cast<std::size_t>(P.n_struct), false);
  auto propagate = [&](int col, double delta) {
    if (delta == 0.0) return;
    for (int k = P.col_start[col]; k < P.col_start[col + 1]; ++k)
      residual[P.row_index[k]] -= P.value[k] * delta;
  };
  for (int i = 0; i < m; ++i) {
    int chosen = -1;
    double chosen_value = 0.0;
    for (int col : P.row_singletons[i]) {
      if (consumed[col]) continue;
      const double coeff = P.value[P.col_start[col]];
      const double v = W.nonbasic_value(col) + residual[i] / coeff;
      if (v >= W.lo[col] && v <= W.hi[col]) {
        chosen = col;
        chosen_value = v;
        break;
      }
    }
    if (chosen < 0) {
      for (int col : P.row_cols[i]) {
        if (consumed[col] || col >= n) continue;  // binaries stay at bounds
        if (W.state[col] == VarState::Basic) continue;
        if (P.first_row(col) != i) continue;  // forward-only: keeps triangularity
        const int partner = P.pair_of[col];
        double coeff = 0.0;
        for (int k = P.col_start[col]; k < P.col_start[col + 1]; ++k)
          if (P.row_index[k] == i) coeff = P.value[k];
        if (coeff == 0.0) continue;
        const double v = W.nonbasic_value(col) + residual[i] / coeff;
        if (partner >= 0 && !consumed[partner]) {
          // Signed value lands on whichever half of the split is nonnegative.
          const double signed_v = v;  // both halves start at zero
          const int column = signed_v >= 0.0 ? col : partner;
          chosen = column;
          chosen_value = std::abs(signed_v);
          consumed[partner] = true;
          consumed[col] = true;
          break;
        }
        if (v >= W.lo[col] && v <= W.hi[col]) {
          chosen = col;
          chosen_value = v;
          break;
        }
      }
    }
    if (chosen >= 0) {
      consumed[chosen] = true;
      W.basic[i] = chosen;
      const double before = W.nonbasic_value(chosen);
      W.state[chosen] = VarState::Basic;
      W.x_basic[i] = chosen_value;
      propagate(chosen, chosen_value - before);
    } else {
      const int art = P.n_struct + i;
      W.art_sign[i] = residual[i] >= 0.0 ? 1.0 : -1.0;
      W.basic[i] = art;
      W.state[art] = VarState::Basic;
      W.x_basic[i] = std::abs(residual[i]);
      any_artificial = true;
      if (W.x_basic[i] != 0.0) residual[i] = 0.0;
    }
  }
  W.factorize();
  W.recompute_basics();

  LpResult out;
  auto report_trace = [&](const char* outcome) {
    if (!W.trace) return;
    std::fprintf(stderr,
                 "[lp] %s iters=%ld p1=%ld polish=%ld flips=%ld probes=%ld "
                 "fact=%ld us[btran=%ld price=%ld ftran=%ld factor=%ld]\n",
                 outcome, W.iterations, W.phase1_iters, W.polish_moves, W.flips,
                 W.probes, W.factorizations, W.us_btran, W.us_price, W.us_ftran,
                 W.us_factor);
  };

  // Phase 1: minimize the artificial mass.
  W.phase_one = true;
  if (any_artificial) {
    PhaseEnd end = run_phase_verified(W);
    W.phase1_iters = W.iterations;
    if (end == PhaseEnd::IterationLimit) {
      out.status = LpStatus::IterationLimit;
      out.iterations = W.iterations;
      report_trace("iterlimit1");
      return out;
    }
    const double infeas = W.objective();
    const double tol = 1e-7 * (1.0 + W.b.lpNorm<Eigen::Infinity>());
    if (infeas > tol) {
      out.status = LpStatus::Infeasible;
      out.value = kInf;
      out.iterations = W.iterations;
      report_trace("infeasible");
      return out;
    }
  }
  for (int i = 0; i < m; ++i) {
    const int art = P.n_struct + i;
    W.lo[art] = 0.0;
    W.hi[art] = 0.0;
    if (W.state[art] != VarState::Basic) W.state[art] = VarState::AtLower;
  }

  // Phase 2: optimize the true objective.
  W.phase_one = false;
  PhaseEnd end = run_phase_verified(W);
  if (end == PhaseEnd::IterationLimit) {
    out.status = LpStatus::IterationLimit;
    out.iterations = W.iterations;
    report_trace("iterlimit2");
    return out;
  }
  if (end == PhaseEnd::Unbounded) {
    out.status = LpStatus::Unbounded;
    out.value = -kInf;
    out.iterations = W.iterations;
    report_trace("unbounded");
    return out;
  }

  // Phase 3: move to an alternate optimal vertex with fewer fractional
  // binaries where the face allows it.
  bool any_free_binary = false;
  for (int j = 0; j < M && !any_free_binary; ++j)
    if (W.lo[n + j] < W.hi[n + j]) any_free_binary = true;
  if (any_free_binary) {
    W.factorize();
    W.recompute_basics();
    polish_binaries(W);
  }

  // Extraction with iterative refinement against the scaled system.
  W.factorize();
  W.recompute_basics();
  Vec x_full = Vec::Zero(P.n_struct);
  auto fill_x = [&] {
    for (int j = 0; j < P.n_struct; ++j)
      if (W.state[j] != VarState::Basic) x_full[j] = W.nonbasic_value(j);
    for (int pos = 0; pos < m; ++pos)
      if (!W.is_artificial(W.basic[pos])) x_full[W.basic[pos]] = W.x_basic[pos];
  };
  fill_x();
  Vec correction(m);
  for (int pass = 0; pass < 2 && m > 0; ++pass) {
    std::vector<long double> resid(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) resid[static_cast<std::size_t>(i)] = W.b[i];
    for (int j = 0; j < P.n_struct; ++j) {
      const double xv = x_full[j];
      if (xv == 0.0) continue;
      for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
        resid[static_cast<std::size_t>(P.row_index[k])] -=
            static_cast<long double>(P.value[k]) * xv;
    }
    for (int pos = 0; pos < m; ++pos) {
      const int var = W.basic[pos];
      if (W.is_artificial(var))
        resid[static_cast<std::size_t>(W.artificial_row(var))] -=
            static_cast<long double>(W.art_sign[W.artificial_row(var)]) *
            W.x_basic[pos];
    }
    for (int i = 0; i < m; ++i)
      correction[i] = static_cast<double>(resid[static_cast<std::size_t>(i)]);
    correction = W.lu.solve(correction);
    for (int pos = 0; pos < m; ++pos) W.x_basic[pos] += correction[pos];
    fill_x();
  }

  MilpPoint pt;
  pt.z = x_full.head(n);
  pt.y = x_full.segment(n, M);

  out.status = LpStatus::Optimal;
  out.point = std::move(pt);
  out.value = evaluate_cost(problem_, *out.point);
  out.iterations = W.iterations;

  if (m > 0) {
    Vec lambda(m);
    for (int pos = 0; pos < m; ++pos) lambda[pos] = W.report_cost(W.basic[pos]);
    W.btran(lambda);
    out.duals.resize(m);
    for (int i = 0; i < m; ++i) out.duals[i] = lambda[i] * P.row_scale[i];
  } else {
    out.duals = Vec::Zero(0);
  }
  report_trace("optimal");
  return out;
}

LpResult LpSolver::solve_fixed(const Vec& theta, const BitVec& y) const {
  return solve(theta, point_box(y));
}

LpResult solve_lp(const MpMilp& p, const Vec& theta, const LpBox& box,
                  LpOptions options) {
  LpSolver solver(p, options);
  return solver.solve(theta, box);
}

}  // namespace lampos

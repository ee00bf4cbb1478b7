#include "oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-9;

using lampos::Mat;
using lampos::Vec;

struct Tableau {
  // rows x (cols + 1); last column is the rhs.
  Mat t;
  std::vector<int> basis;
  int rows;
  int cols;

  double& at(int r, int c) { return t(r, c); }
  double rhs(int r) const { return t(r, cols); }

  void pivot(int r, int c) {
    t.row(r) /= t(r, c);
    for (int i = 0; i < rows; ++i) {
      if (i == r) continue;
      const double f = t(i, c);
      if (f != 0.0) t.row(i) -= f * t.row(r);
    }
    basis[static_cast<std::size_t>(r)] = c;
  }
};

// Bland's rule phase over an objective row (minimization, reduced costs in
// obj). Returns false when unbounded.
bool run_tableau(Tableau& tab, Vec& obj, double& obj_value,
                 const std::vector<bool>& allowed) {
  for (;;) {
    int enter = -1;
    for (int c = 0; c < tab.cols; ++c) {
      if (!allowed[static_cast<std::size_t>(c)]) continue;
      if (obj[c] < -kEps) {
        enter = c;
        break;
      }
    }
    if (enter < 0) return true;
    int leave = -1;
    double best_ratio = kInf;
    for (int r = 0; r < tab.rows; ++r) {
      const double a = tab.t(r, enter);
      if (a > kEps) {
        const double ratio = tab.rhs(r) / a;
        if (ratio < best_ratio - 1e-12 ||
            (std::abs(ratio - best_ratio) <= 1e-12 &&
             (leave < 0 || tab.basis[static_cast<std::size_t>(r)] <
                               tab.basis[static_cast<std::size_t>(leave)]))) {
          best_ratio = ratio;
          leave = r;
        }
      }
    }
    if (leave < 0) return false;
    tab.pivot(leave, enter);
    // Restore the objective row for the new basis.
    const double f = obj[enter];
    if (f != 0.0) {
      for (int c = 0; c < tab.cols; ++c) obj[c] -= f * tab.t(leave, c);
      obj_value -= f * tab.rhs(leave);
    }
  }
}

}  // namespace

LpOut tableau_lp(const Vec& c, const Mat& A, const Vec& b) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  LpOut out;
  if (m == 0) {
    // Bounds only: x >= 0, minimize c.x.
    out.x = Vec::Zero(n);
    for (int j = 0; j < n; ++j)
      if (c[j] < -kEps) {
        out.status = Status::Unbounded;
        out.value = -kInf;
        return out;
      }
    out.status = Status::Optimal;
    out.value = 0.0;
    return out;
  }

  Tableau tab;
  tab.rows = m;
  tab.cols = n + m;  // structural + artificial
  tab.t = Mat::Zero(m, tab.cols + 1);
  tab.basis.resize(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    const double sign = b[r] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) tab.t(r, j) = sign * A(r, j);
    tab.t(r, n + r) = 1.0;
    tab.t(r, tab.cols) = sign * b[r];
    tab.basis[static_cast<std::size_t>(r)] = n + r;
  }

  // Phase 1: minimize the artificial sum.
  Vec obj = Vec::Zero(tab.cols);
  double obj_value = 0.0;
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) obj[j] -= tab.t(r, j);
    obj_value -= tab.rhs(r);
  }
  std::vector<bool> allowed(static_cast<std::size_t>(tab.cols), true);
  if (!run_tableau(tab, obj, obj_value, allowed))
    throw std::runtime_error("oracle: unbounded phase 1");
  if (-obj_value > 1e-7) {
    out.status = Status::Infeasible;
    out.value = kInf;
    return out;
  }
  // Pivot lingering artificials out when a structural pivot exists.
  for (int r = 0; r < m; ++r) {
    if (tab.basis[static_cast<std::size_t>(r)] < n) continue;
    for (int j = 0; j < n; ++j) {
      if (std::abs(tab.t(r, j)) > 1e-7) {
        tab.pivot(r, j);
        break;
      }
    }
  }
  for (std::size_t j = static_cast<std::size_t>(n); j < allowed.size(); ++j)
    allowed[j] = false;

  // Phase 2.
  Vec obj2 = Vec::Zero(tab.cols);
  double value = 0.0;
  for (int j = 0; j < n; ++j) obj2[j] = c[j];
  for (int r = 0; r < m; ++r) {
    const int bv = tab.basis[static_cast<std::size_t>(r)];
    if (bv < n && obj2[bv] != 0.0) {
      const double f = obj2[bv];
      for (int cc = 0; cc < tab.cols; ++cc) obj2[cc] -= f * tab.t(r, cc);
      value -= f * tab.rhs(r);
    }
  }
  if (!run_tableau(tab, obj2, value, allowed)) {
    out.status = Status::Unbounded;
    out.value = -kInf;
    return out;
  }
  out.status = Status::Optimal;
  out.x = Vec::Zero(n);
  for (int r = 0; r < m; ++r) {
    const int bv = tab.basis[static_cast<std::size_t>(r)];
    if (bv < n) out.x[bv] = tab.rhs(r);
  }
  out.value = c.dot(out.x);
  return out;
}

LpOut bounded_lp(const Vec& c, const Mat& Aeq, const Vec& beq, const Mat& Aineq,
                 const Vec& bineq, const Vec& lo, const Vec& hi) {
  const int n = static_cast<int>(c.size());
  // Collect inequality rows: original ones plus finite bounds.
  std::vector<Vec> ineq_rows;
  std::vector<double> ineq_rhs;
  for (int r = 0; r < Aineq.rows(); ++r) {
    ineq_rows.push_back(Aineq.row(r));
    ineq_rhs.push_back(bineq[r]);
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(hi[j])) {
      Vec row = Vec::Zero(n);
      row[j] = 1.0;
      ineq_rows.push_back(row);
      ineq_rhs.push_back(hi[j]);
    }
    if (std::isfinite(lo[j])) {
      Vec row = Vec::Zero(n);
      row[j] = -1.0;
      ineq_rows.push_back(row);
      ineq_rhs.push_back(-lo[j]);
    }
  }
  const int me = static_cast<int>(Aeq.rows());
  const int mi = static_cast<int>(ineq_rows.size());
  const int m = me + mi;
  // Standard form columns: x+ (n), x- (n), slacks (mi).
  const int cols = 2 * n + mi;
  Mat A = Mat::Zero(m, cols);
  Vec b(m);
  Vec cost = Vec::Zero(cols);
  for (int j = 0; j < n; ++j) {
    cost[j] = c[j];
    cost[n + j] = -c[j];
  }
  for (int r = 0; r < me; ++r) {
    for (int j = 0; j < n; ++j) {
      A(r, j) = Aeq(r, j);
      A(r, n + j) = -Aeq(r, j);
    }
    b[r] = beq[r];
  }
  for (int r = 0; r < mi; ++r) {
    for (int j = 0; j < n; ++j) {
      A(me + r, j) = ineq_rows[static_cast<std::size_t>(r)][j];
      A(me + r, n + j) = -ineq_rows[static_cast<std::size_t>(r)][j];
    }
    A(me + r, 2 * n + r) = 1.0;
    b[me + r] = ineq_rhs[static_cast<std::size_t>(r)];
  }
  LpOut std_out = tableau_lp(cost, A, b);
  LpOut out;
  out.status = std_out.status;
  out.value = std_out.value;
  if (std_out.status == Status::Optimal) {
    out.x = Vec::Zero(n);
    for (int j = 0; j < n; ++j) out.x[j] = std_out.x[j] - std_out.x[n + j];
    out.value = c.dot(out.x);
  }
  return out;
}

namespace {

MilpOut enumerate_box(const lampos::MpMilp& p, const Vec& theta,
                      const lampos::LpBox& box) {
  const int M = p.M();
  std::vector<int> free_idx;
  for (int i = 0; i < M; ++i)
    if (box.lb[i] < box.ub[i]) free_idx.push_back(i);
  if (free_idx.size() > 24)
    throw std::invalid_argument("oracle: too many free binaries to enumerate");

  const Vec b = p.rhs.at(theta);
  MilpOut out;
  out.value = kInf;
  bool any_unbounded = false;
  Vec y(M);
  for (int i = 0; i < M; ++i) y[i] = box.lb[i];
  const std::uint64_t total = 1ULL << free_idx.size();
  for (std::uint64_t code = 0; code < total; ++code) {
    for (std::size_t t = 0; t < free_idx.size(); ++t)
      y[free_idx[t]] = static_cast<double>((code >> t) & 1ULL);
    const Vec rhs = b - p.B * y;
    LpOut lp = tableau_lp(p.c, p.A, rhs);
    if (lp.status == Status::Unbounded) any_unbounded = true;
    if (lp.status != Status::Optimal) continue;
    const double value = lp.value + p.d.dot(y);
    if (value < out.value || out.status != Status::Optimal) {
      out.status = Status::Optimal;
      out.value = value;
      lampos::MilpPoint pt;
      pt.z = lp.x;
      pt.y = y;
      out.point = pt;
    }
  }
  if (out.status != Status::Optimal) {
    out.status = any_unbounded ? Status::Unbounded : Status::Infeasible;
    out.value = any_unbounded ? -kInf : kInf;
  } else if (any_unbounded) {
    out.status = Status::Unbounded;
    out.value = -kInf;
    out.point.reset();
  }
  return out;
}

}  // namespace

MilpOut milp_best(const lampos::MpMilp& p, const Vec& theta) {
  return enumerate_box(p, theta, lampos::root_box(p.M()));
}

MilpOut milp_best_in_box(const lampos::MpMilp& p, const Vec& theta,
                         const lampos::LpBox& box) {
  return enumerate_box(p, theta, box);
}

LpOut relaxation_in_box(const lampos::MpMilp& p, const Vec& theta,
                        const lampos::LpBox& box) {
  const int n = p.n();
  const int M = p.M();
  Vec c(n + M);
  c.head(n) = p.c;
  c.tail(M) = p.d;
  Mat Aeq(p.m(), n + M);
  Aeq.leftCols(n) = p.A;
  Aeq.rightCols(M) = p.B;
  Vec lo(n + M), hi(n + M);
  for (int j = 0; j < n; ++j) {
    lo[j] = 0.0;
    hi[j] = kInf;
  }
  for (int j = 0; j < M; ++j) {
    lo[n + j] = box.lb[j];
    hi[n + j] = box.ub[j];
  }
  return bounded_lp(c, Aeq, p.rhs.at(theta), Mat::Zero(0, n + M), Vec::Zero(0),
                    lo, hi);
}

MilpOut general_model_best(const lampos::GeneralModel& model, const Vec& theta) {
  model.validate();
  const int nb = static_cast<int>(model.binaries.size());
  if (nb > 20) throw std::invalid_argument("oracle: too many binaries");
  const int n = model.num_vars;
  const int ne = static_cast<int>(model.epigraphs.size());

  // Columns: original variables then one epigraph variable per term.
  const int cols = n + ne;
  Vec cost = Vec::Zero(cols);
  for (int j = 0; j < n; ++j) cost[j] = model.cost[j];
  for (int e = 0; e < ne; ++e) cost[n + e] = 1.0;

  std::vector<Vec> eq_rows;
  std::vector<double> eq_rhs;
  for (const auto& row : model.equalities) {
    Vec r = Vec::Zero(cols);
    for (const auto& term : row.terms) r[term.var] += term.coeff;
    double rhs = row.rhs;
    for (const auto& t : row.theta_terms) rhs += t.coeff * theta[t.var];
    eq_rows.push_back(std::move(r));
    eq_rhs.push_back(rhs);
  }
  std::vector<Vec> ineq_rows;
  std::vector<double> ineq_rhs;
  for (const auto& row : model.inequalities) {
    Vec r = Vec::Zero(cols);
    for (const auto& term : row.terms) r[term.var] += term.coeff;
    double rhs = row.rhs;
    for (const auto& t : row.theta_terms) rhs += t.coeff * theta[t.var];
    ineq_rows.push_back(std::move(r));
    ineq_rhs.push_back(rhs);
  }
  for (int e = 0; e < ne; ++e) {
    for (const auto& qrow : model.epigraphs[static_cast<std::size_t>(e)].rows) {
      for (double sign : {1.0, -1.0}) {
        Vec r = Vec::Zero(cols);
        for (const auto& term : qrow) r[term.var] += sign * term.coeff;
        r[n + e] = -1.0;
        ineq_rows.push_back(std::move(r));
        ineq_rhs.push_back(0.0);
      }
    }
  }

  Vec lo(cols), hi(cols);
  for (int j = 0; j < n; ++j) {
    lo[j] = model.lower[j];
    hi[j] = model.upper[j];
  }
  for (int e = 0; e < ne; ++e) {
    lo[n + e] = -kInf;
    hi[n + e] = kInf;
  }

  auto pack = [&](const std::vector<Vec>& rows, const std::vector<double>& rhs,
                  Mat& A, Vec& b) {
    A = Mat::Zero(static_cast<int>(rows.size()), cols);
    b = Vec::Zero(static_cast<int>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      A.row(static_cast<int>(r)) = rows[r];
      b[static_cast<int>(r)] = rhs[r];
    }
  };

  MilpOut out;
  out.value = kInf;
  bool any_unbounded = false;
  const std::uint64_t total = 1ULL << nb;
  for (std::uint64_t code = 0; code < total; ++code) {
    Vec fixed_lo = lo, fixed_hi = hi;
    for (int t = 0; t < nb; ++t) {
      const double v = static_cast<double>((code >> t) & 1ULL);
      fixed_lo[model.binaries[static_cast<std::size_t>(t)]] = v;
      fixed_hi[model.binaries[static_cast<std::size_t>(t)]] = v;
    }
    Mat Aeq, Aineq;
    Vec beq, bineq;
    pack(eq_rows, eq_rhs, Aeq, beq);
    pack(ineq_rows, ineq_rhs, Aineq, bineq);
    LpOut lp = bounded_lp(cost, Aeq, beq, Aineq, bineq, fixed_lo, fixed_hi);
    if (lp.status == Status::Unbounded) any_unbounded = true;
    if (lp.status != Status::Optimal) continue;
    if (lp.value < out.value || out.status != Status::Optimal) {
      out.status = Status::Optimal;
      out.value = lp.value;
      lampos::MilpPoint pt;
      pt.z = lp.x;  // original variables + epigraph tail
      out.point = pt;
    }
  }
  if (out.status != Status::Optimal) {
    out.status = any_unbounded ? Status::Unbounded : Status::Infeasible;
    out.value = any_unbounded ? -kInf : kInf;
  } else if (any_unbounded) {
    out.status = Status::Unbounded;
    out.value = -kInf;
  }
  return out;
}

}  // namespace oracle

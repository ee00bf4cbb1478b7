#include "lampos/problem.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace lampos {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Vec ParametricRhs::at(const Vec& theta) const {
  if (theta.size() != T.cols())
    throw std::invalid_argument("parameter dimension mismatch");
  if (T.cols() == 0) return b0;
  return b0 + T * theta;
}

void MpMilp::validate() const {
  const int rows = static_cast<int>(A.rows());
  if (B.rows() != rows) throw std::invalid_argument("A and B row mismatch");
  if (A.cols() != c.size()) throw std::invalid_argument("c length != A cols");
  if (B.cols() != d.size()) throw std::invalid_argument("d length != B cols");
  if (rhs.b0.size() != rows) throw std::invalid_argument("b0 length != rows");
  if (rhs.T.rows() != rows) throw std::invalid_argument("T rows != rows");
  if (d.size() < 0) throw std::invalid_argument("negative binary count");
}

double evaluate_cost(const MpMilp& p, const MilpPoint& pt) {
  if (pt.z.size() != p.n() || pt.y.size() != p.M())
    throw std::invalid_argument("point dimension mismatch");
  double total = 0.0;
  for (int i = 0; i < pt.z.size(); ++i) total += p.c[i] * pt.z[i];
  for (int i = 0; i < pt.y.size(); ++i) total += p.d[i] * pt.y[i];
  return total;
}

bool check_feasible(const MpMilp& p, const Vec& theta, const MilpPoint& pt,
                    double tol) {
  if (pt.z.size() != p.n() || pt.y.size() != p.M()) return false;
  const Vec b = p.rhs.at(theta);
  const Vec resid = p.A * pt.z + p.B * pt.y - b;
  if (resid.size() > 0 && resid.lpNorm<Eigen::Infinity>() > tol) return false;
  for (int i = 0; i < pt.z.size(); ++i)
    if (pt.z[i] < -tol) return false;
  for (int i = 0; i < pt.y.size(); ++i)
    if (std::abs(pt.y[i] - std::round(pt.y[i])) > kIntTol || pt.y[i] < -kIntTol ||
        pt.y[i] > 1.0 + kIntTol)
      return false;
  return true;
}

GeneralModel GeneralModel::make(int num_vars, int param_dim) {
  GeneralModel model;
  model.num_vars = num_vars;
  model.param_dim = param_dim;
  model.lower = Vec::Constant(num_vars, -kInf);
  model.upper = Vec::Constant(num_vars, kInf);
  model.cost = Vec::Zero(num_vars);
  return model;
}

namespace {

void validate_terms(const std::vector<LinTerm>& terms, int limit,
                    const char* what) {
  for (const auto& t : terms)
    if (t.var < 0 || t.var >= limit)
      throw std::invalid_argument(std::string("index out of range in ") + what);
}

}  // namespace

void GeneralModel::validate() const {
  if (num_vars < 0 || param_dim < 0)
    throw std::invalid_argument("negative dimensions");
  if (lower.size() != num_vars || upper.size() != num_vars ||
      cost.size() != num_vars)
    throw std::invalid_argument("bound/cost vectors must match num_vars");
  for (int b : binaries)
    if (b < 0 || b >= num_vars)
      throw std::invalid_argument("binary index out of range");
  for (const auto& row : equalities) {
    validate_terms(row.terms, num_vars, "equality row");
    validate_terms(row.theta_terms, param_dim, "equality theta terms");
  }
  for (const auto& row : inequalities) {
    validate_terms(row.terms, num_vars, "inequality row");
    validate_terms(row.theta_terms, param_dim, "inequality theta terms");
  }
  for (const auto& term : epigraphs)
    for (const auto& row : term.rows) validate_terms(row, num_vars, "epigraph");
}

Canonical canonicalize(const GeneralModel& model) {
  model.validate();

  std::vector<bool> is_binary(model.num_vars, false);
  for (int b : model.binaries) is_binary[b] = true;

  CanonicalMap map;
  map.vars.resize(model.num_vars);

  // Column layout: original continuous columns (split pairs adjacent), then
  // one epigraph variable per term, then one slack per inequality-like row.
  int z_cols = 0;
  int y_cols = 0;
  for (int v = 0; v < model.num_vars; ++v) {
    if (is_binary[v]) {
      map.vars[v] = {CanonicalMap::Kind::Binary, y_cols++, -1};
    } else if (model.lower[v] == 0.0) {
      map.vars[v] = {CanonicalMap::Kind::NonNeg, z_cols++, -1};
    } else if (model.lower[v] > 0.0 && std::isfinite(model.lower[v])) {
      // Positive lower bound: the column stays nonnegative, the bound
      // itself becomes a row below.
      map.vars[v] = {CanonicalMap::Kind::NonNeg, z_cols++, -1};
    } else {
      map.vars[v] = {CanonicalMap::Kind::Split, z_cols, z_cols + 1};
      z_cols += 2;
    }
  }
  const int epi_base = z_cols;
  z_cols += static_cast<int>(model.epigraphs.size());

  struct StdRow {
    std::vector<std::pair<int, double>> z_terms;  // into z columns
    std::vector<std::pair<int, double>> y_terms;  // into y columns
    double rhs = 0.0;
    std::vector<LinTerm> theta_terms;
    bool inequality = false;  // row (expr) <= rhs, gains a slack
  };
  std::vector<StdRow> rows;

  auto expand_terms = [&](const std::vector<LinTerm>& terms, StdRow& row) {
    for (const auto& t : terms) {
      const auto& e = map.vars[t.var];
      switch (e.kind) {
        case CanonicalMap::Kind::Binary:
          row.y_terms.emplace_back(e.col, t.coeff);
          break;
        case CanonicalMap::Kind::NonNeg:
          row.z_terms.emplace_back(e.col, t.coeff);
          break;
        case CanonicalMap::Kind::Split:
          row.z_terms.emplace_back(e.col, t.coeff);
          row.z_terms.emplace_back(e.neg_col, -t.coeff);
          break;
      }
    }
  };

  for (const auto& src : model.equalities) {
    StdRow row;
    expand_terms(src.terms, row);
    row.rhs = src.rhs;
    row.theta_terms = src.theta_terms;
    rows.push_back(std::move(row));
  }
  for (const auto& src : model.inequalities) {
    StdRow row;
    expand_terms(src.terms, row);
    row.rhs = src.rhs;
    row.theta_terms = src.theta_terms;
    row.inequality = true;
    rows.push_back(std::move(row));
  }
  // Finite declared bounds become rows (binaries excluded: their box is
  // intrinsic to the standard form).
  for (int v = 0; v < model.num_vars; ++v) {
    if (is_binary[v]) continue;
    if (std::isfinite(model.lower[v]) && model.lower[v] != 0.0) {
      StdRow row;  // -v <= -lower
      expand_terms({{v, -1.0}}, row);
      row.rhs = -model.lower[v];
      row.inequality = true;
      rows.push_back(std::move(row));
    }
    if (std::isfinite(model.upper[v])) {
      StdRow row;  // v <= upper
      expand_terms({{v, 1.0}}, row);
      row.rhs = model.upper[v];
      row.inequality = true;
      rows.push_back(std::move(row));
    }
  }
  // Epigraph rows: t >= (Qv)_i and t >= -(Qv)_i, written as <= rows.
  for (std::size_t e = 0; e < model.epigraphs.size(); ++e) {
    const int t_col = epi_base + static_cast<int>(e);
    for (const auto& qrow : model.epigraphs[e].rows) {
      for (double sign : {1.0, -1.0}) {
        StdRow row;  // sign*(Qv)_i - t <= 0
        for (const auto& t : qrow) {
          LinTerm scaled{t.var, sign * t.coeff};
          expand_terms({scaled}, row);
        }
        row.z_terms.emplace_back(t_col, -1.0);
        row.inequality = true;
        rows.push_back(std::move(row));
      }
    }
  }

  const int m = static_cast<int>(rows.size());
  int slack_count = 0;
  for (const auto& row : rows) slack_count += row.inequality ? 1 : 0;
  const int n = z_cols + slack_count;

  MpMilp out;
  out.c = Vec::Zero(n);
  out.d = Vec::Zero(y_cols);
  out.A = Mat::Zero(m, n);
  out.B = Mat::Zero(m, y_cols);
  out.rhs.b0 = Vec::Zero(m);
  out.rhs.T = Mat::Zero(m, model.param_dim);

  for (int v = 0; v < model.num_vars; ++v) {
    const auto& e = map.vars[v];
    const double cost = model.cost[v];
    if (cost == 0.0) continue;
    switch (e.kind) {
      case CanonicalMap::Kind::Binary:
        out.d[e.col] += cost;
        break;
      case CanonicalMap::Kind::NonNeg:
        out.c[e.col] += cost;
        break;
      case CanonicalMap::Kind::Split:
        out.c[e.col] += cost;
        out.c[e.neg_col] -= cost;
        break;
    }
  }
  for (std::size_t e = 0; e < model.epigraphs.size(); ++e)
    out.c[epi_base + static_cast<int>(e)] += 1.0;

  int slack = z_cols;
  for (int i = 0; i < m; ++i) {
    const auto& row = rows[i];
    for (const auto& [col, coeff] : row.z_terms) out.A(i, col) += coeff;
    for (const auto& [col, coeff] : row.y_terms) out.B(i, col) += coeff;
    if (row.inequality) out.A(i, slack++) = 1.0;
    out.rhs.b0[i] = row.rhs;
    for (const auto& t : row.theta_terms) out.rhs.T(i, t.var) += t.coeff;
  }

  return Canonical{std::move(out), std::move(map)};
}

double CanonicalMap::original_value(const MilpPoint& pt, int var) const {
  const auto& e = vars.at(static_cast<std::size_t>(var));
  switch (e.kind) {
    case Kind::Binary:
      return pt.y[e.col];
    case Kind::NonNeg:
      return pt.z[e.col];
    case Kind::Split:
      return pt.z[e.col] - pt.z[e.neg_col];
  }
  return 0.0;
}

Vec CanonicalMap::original_values(const MilpPoint& pt) const {
  Vec out(static_cast<int>(vars.size()));
  for (std::size_t v = 0; v < vars.size(); ++v)
    out[static_cast<int>(v)] = original_value(pt, static_cast<int>(v));
  return out;
}

namespace {

nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const nlohmann::json& j, int rows, int cols) {
  Mat m(rows, cols);
  if (static_cast<int>(j.size()) != rows)
    throw std::invalid_argument("matrix row count mismatch");
  for (int i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (static_cast<int>(row.size()) != cols)
      throw std::invalid_argument("matrix column count mismatch");
    for (int c = 0; c < cols; ++c) m(i, c) = row.at(c).get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Vec& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vector_from_json(const nlohmann::json& j) {
  Vec v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

nlohmann::json to_json(const MpMilp& p) {
  nlohmann::json j;
  j["v"] = 1;
  j["n"] = p.n();
  j["m"] = p.m();
  j["M"] = p.M();
  j["c"] = vector_to_json(p.c);
  j["d"] = vector_to_json(p.d);
  j["A"] = matrix_to_json(p.A);
  j["B"] = matrix_to_json(p.B);
  j["b0"] = vector_to_json(p.rhs.b0);
  j["T"] = matrix_to_json(p.rhs.T);
  return j;
}

MpMilp milp_from_json(const nlohmann::json& j) {
  if (j.value("v", 0) != 1) throw std::invalid_argument("unknown schema version");
  MpMilp p;
  const int n = j.at("n").get<int>();
  const int m = j.at("m").get<int>();
  const int M = j.at("M").get<int>();
  p.c = vector_from_json(j.at("c"));
  p.d = vector_from_json(j.at("d"));
  p.A = matrix_from_json(j.at("A"), m, n);
  p.B = matrix_from_json(j.at("B"), m, M);
  p.rhs.b0 = vector_from_json(j.at("b0"));
  const auto& t = j.at("T");
  const int pdim = m > 0 && t.size() > 0 ? static_cast<int>(t.at(0).size()) : 0;
  p.rhs.T = matrix_from_json(t, m, pdim);
  p.validate();
  return p;
}

void save_milp(const MpMilp& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << to_json(p).dump();
}

MpMilp load_milp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  is >> j;
  return milp_from_json(j);
}

}  // namespace lampos

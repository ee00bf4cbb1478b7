#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "lampos/util.hpp"

namespace lampos {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Affine right-hand side b(theta) = b0 + T * theta.
struct ParametricRhs {
  Vec b0;
  Mat T;  // m x p; p == 0 makes the problem non-parametric

  int param_dim() const { return static_cast<int>(T.cols()); }
  Vec at(const Vec& theta) const;
};

/// Standard-form parametric MILP:
///   min c'z + d'y  s.t.  A z + B y = b(theta),  z >= 0,  y in {0,1}^M.
struct MpMilp {
  Vec c;
  Vec d;
  Mat A;
  Mat B;
  ParametricRhs rhs;

  int n() const { return static_cast<int>(c.size()); }
  int m() const { return static_cast<int>(A.rows()); }
  int M() const { return static_cast<int>(d.size()); }

  /// Throws std::invalid_argument when the dimension invariants fail.
  void validate() const;
};

struct MilpPoint {
  Vec z;
  Vec y;
};

double evaluate_cost(const MpMilp& p, const MilpPoint& pt);

/// True iff ||A z + B y - b(theta)||_inf <= tol, z >= -tol componentwise and
/// every y_i is within kIntTol of {0,1}.
bool check_feasible(const MpMilp& p, const Vec& theta, const MilpPoint& pt,
                    double tol = kFeasTol);

// --- Modeling front-end -----------------------------------------------------

struct LinTerm {
  int var = 0;
  double coeff = 0.0;
};

/// One linear row: sum coeff_j * v_j (cmp) rhs0 + theta_coeffs' theta, where
/// cmp is "=" for equality rows and "<=" for inequality rows.
struct LinRow {
  std::vector<LinTerm> terms;
  double rhs = 0.0;
  std::vector<LinTerm> theta_terms;  // var field indexes theta components
};

/// An epigraph term contributes max_i |row_i . v| to the objective.
struct EpigraphTerm {
  std::vector<std::vector<LinTerm>> rows;
};

/// A general mixed-binary linear model: per-variable bounds (possibly
/// infinite), equality and <= rows with affine-in-theta right-hand sides,
/// a linear cost and infinity-norm epigraph terms.
struct GeneralModel {
  int num_vars = 0;
  int param_dim = 0;
  Vec lower;  // -inf allowed
  Vec upper;  // +inf allowed
  Vec cost;
  std::vector<int> binaries;
  std::vector<LinRow> equalities;
  std::vector<LinRow> inequalities;
  std::vector<EpigraphTerm> epigraphs;

  static GeneralModel make(int num_vars, int param_dim = 0);
  void validate() const;
};

/// Bijective maps between original variables and standard-form columns.
struct CanonicalMap {
  enum class Kind { NonNeg, Split, Binary };
  struct Entry {
    Kind kind;
    int col = -1;      // z column (NonNeg, Split positive part) or y column
    int neg_col = -1;  // Split negative part
  };
  std::vector<Entry> vars;

  double original_value(const MilpPoint& pt, int var) const;
  Vec original_values(const MilpPoint& pt) const;
};

struct Canonical {
  MpMilp milp;
  CanonicalMap map;
};

/// Reduces a GeneralModel to standard form: inequalities gain nonnegative
/// slacks, free/negative-ranged continuous variables split as v+ - v-,
/// finite bounds become rows, epigraph terms become cost-1 variables with
/// two rows per matrix row. Binary variables keep their columns.
Canonical canonicalize(const GeneralModel& model);

// --- Serialization -----------------------------------------------------------

nlohmann::json to_json(const MpMilp& p);
MpMilp milp_from_json(const nlohmann::json& j);
void save_milp(const MpMilp& p, const std::string& path);
MpMilp load_milp(const std::string& path);

}  // namespace lampos

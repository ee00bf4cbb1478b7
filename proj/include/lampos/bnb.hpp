#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lampos/simplex.hpp"

namespace lampos {

/// A finite set of binary boxes whose union is expected to contain {0,1}^M.
struct Cover {
  std::vector<LpBox> boxes;

  std::size_t size() const { return boxes.size(); }
};

/// Exhaustive membership check for M <= max_exhaustive, sampled membership
/// otherwise (deterministic sample stream).
bool covers_all(const Cover& cover, int M, int max_exhaustive = 12,
                int samples = 4096);
/// Sorts boxes lexicographically by (lb, ub) and drops duplicates.
Cover canonical_cover(std::vector<LpBox> boxes);

struct BnbCertificate {
  Cover cover;       // terminal leaves, canonically sorted
  BitVec y_star;     // binary part of the optimal solution
  double value = 0;  // optimal cost
  MilpPoint point;
  long node_count = 0;
  long lp_count = 0;
};

enum class BnbStatus { Optimal, Infeasible, NodeBudget };

struct BnbOutcome {
  BnbStatus status = BnbStatus::Infeasible;
  std::optional<BnbCertificate> certificate;  // Optimal: full certificate;
                                              // NodeBudget: incumbent if any
};

struct BnbOptions {
  long node_budget = 100000;
  double abs_gap = 1e-6;
  double rel_gap = 1e-6;
  LpOptions lp;
};

/// Best-first branch and bound over the binary variables. Branching fixes the
/// most fractional binary (ties to the lowest index); node selection is by
/// LP lower bound with insertion order breaking ties.
BnbOutcome solve_milp(const LpSolver& solver, const Vec& theta,
                      std::optional<Cover> root = std::nullopt,
                      const BnbOptions& options = {});
BnbOutcome solve_milp(const MpMilp& p, const Vec& theta,
                      std::optional<Cover> root = std::nullopt,
                      const BnbOptions& options = {});

/// min over the cover's boxes of the LP value; +inf when every box is
/// infeasible (which certifies MILP infeasibility).
double lower_bound(const LpSolver& solver, const Vec& theta, const Cover& cover);
double lower_bound(const MpMilp& p, const Vec& theta, const Cover& cover);

/// min over boxes whose LP solution is binary-feasible, with the attaining
/// point; +inf and no point when there is none.
std::pair<double, std::optional<MilpPoint>> upper_bound(const LpSolver& solver,
                                                        const Vec& theta,
                                                        const Cover& cover);
std::pair<double, std::optional<MilpPoint>> upper_bound(const MpMilp& p,
                                                        const Vec& theta,
                                                        const Cover& cover);

// Certificate <-> JSON (boxes as bit-string pairs, y* as a bit string).
nlohmann::json certificate_to_json(const BnbCertificate& cert);
BnbCertificate certificate_from_json(const nlohmann::json& j);

}  // namespace lampos

#include "lampos/bnb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <queue>
#include <stdexcept>

namespace lampos {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

bool covers_all(const Cover& cover, int M, int max_exhaustive, int samples) {
  auto member = [&](const BitVec& y) {
    for (const auto& box : cover.boxes)
      if (box.contains(y)) return true;
    return false;
  };
  if (M <= max_exhaustive) {
    BitVec y(static_cast<std::size_t>(M), 0);
    const std::uint64_t total = 1ULL << M;
    for (std::uint64_t code = 0; code < total; ++code) {
      for (int i = 0; i < M; ++i) y[i] = (code >> i) & 1ULL;
      if (!member(y)) return false;
    }
    return true;
  }
  SplitMix64 rng = substream(0x636f766572ULL, static_cast<std::uint64_t>(M));
  BitVec y(static_cast<std::size_t>(M), 0);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < M; ++i) y[i] = rng.next() & 1ULL;
    if (!member(y)) return false;
  }
  return true;
}

Cover canonical_cover(std::vector<LpBox> boxes) {
  std::sort(boxes.begin(), boxes.end());
  boxes.erase(std::unique(boxes.begin(), boxes.end()), boxes.end());
  return Cover{std::move(boxes)};
}

namespace {

struct Node {
  double value;
  long seq;
  std::size_t slot;  // index into node storage
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.value != b.value) return a.value > b.value;
    return a.seq > b.seq;
  }
};

struct StoredNode {
  LpBox box;
  double value;
  Vec y;  // binary part of the node LP solution, kept for branching
};

int most_fractional(const Vec& y, const LpBox& box) {
  int pick = -1;
  double best = -1.0;
  for (int i = 0; i < y.size(); ++i) {
    if (box.lb[i] == box.ub[i]) continue;
    const double frac = std::abs(y[i] - std::round(y[i]));
    if (frac > kIntTol && frac > best) {
      best = frac;
      pick = i;
    }
  }
  return pick;
}

}  // namespace

BnbOutcome solve_milp(const LpSolver& solver, const Vec& theta,
                      std::optional<Cover> root, const BnbOptions& options) {
  const int M = solver.problem().M();
  std::vector<LpBox> roots;
  if (root) {
    if (root->boxes.empty()) throw std::invalid_argument("empty root cover");
    for (const auto& box : root->boxes) box.validate(M);
    roots = root->boxes;
  } else {
    roots.push_back(root_box(M));
  }

  std::vector<StoredNode> store;
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::vector<LpBox> closed_leaves;
  long node_count = 0;
  long lp_count = 0;
  long seq = 0;

  double incumbent_value = kInf;
  struct Incumbent {
    LpBox box;
    MilpPoint point;
  };
  std::vector<Incumbent> incumbents;  // all leaves attaining incumbent_value

  auto gap_closed = [&](double lb) {
    if (incumbent_value == kInf) return false;
    const double gap = incumbent_value - lb;
    return gap <= options.abs_gap ||
           gap <= options.rel_gap * std::abs(incumbent_value);
  };

  auto expand = [&](const LpBox& box) {
    LpResult lp = solver.solve(theta, box);
    ++lp_count;
    ++node_count;
    if (lp.status == LpStatus::IterationLimit)
      throw std::runtime_error("bnb: LP iteration limit hit");
    if (lp.status == LpStatus::Unbounded)
      throw std::runtime_error("bnb: unbounded LP relaxation");
    if (lp.status == LpStatus::Infeasible) {
      closed_leaves.push_back(box);
      return;
    }
    if (is_integral(lp)) {
      if (lp.value < incumbent_value) {
        incumbent_value = lp.value;
        incumbents.clear();
        incumbents.push_back({box, std::move(*lp.point)});
      } else if (lp.value == incumbent_value) {
        incumbents.push_back({box, std::move(*lp.point)});
      }
      closed_leaves.push_back(box);
      return;
    }
    store.push_back({box, lp.value, std::move(lp.point->y)});
    open.push(Node{lp.value, seq++, store.size() - 1});
  };

  for (const auto& box : roots) expand(box);

  BnbOutcome out;
  bool budget_hit = false;
  while (!open.empty()) {
    if (gap_closed(open.top().value)) break;
    if (node_count >= options.node_budget) {
      budget_hit = true;
      break;
    }
    Node top = open.top();
    open.pop();
    StoredNode& node = store[top.slot];
    const int branch = most_fractional(node.y, node.box);
    if (branch < 0) {
      // All free binaries integral within tolerance but is_integral said no:
      // cannot happen, guard anyway.
      closed_leaves.push_back(node.box);
      continue;
    }
    LpBox low = node.box;
    low.ub[branch] = 0;
    LpBox high = node.box;
    high.lb[branch] = 1;
    node.y.resize(0);  // branched node no longer needed
    expand(low);
    expand(high);
  }

  // Terminal cover: closed leaves plus whatever remains open.
  std::vector<LpBox> leaves = closed_leaves;
  while (!open.empty()) {
    leaves.push_back(store[open.top().slot].box);
    open.pop();
  }

  if (incumbent_value == kInf) {
    if (budget_hit) {
      out.status = BnbStatus::NodeBudget;
      return out;
    }
    out.status = BnbStatus::Infeasible;
    return out;
  }

  BnbCertificate cert;
  cert.cover = canonical_cover(std::move(leaves));
  // When several leaves attain the incumbent, take the first in the cover's
  // sorted order so certificates do not depend on the search path.
  std::sort(incumbents.begin(), incumbents.end(),
            [](const Incumbent& a, const Incumbent& b) { return a.box < b.box; });
  const Incumbent& best = incumbents.front();
  cert.value = incumbent_value;
  cert.point = best.point;
  cert.y_star.resize(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i)
    cert.y_star[i] = best.point.y[i] >= 0.5 ? 1 : 0;
  cert.node_count = node_count;
  cert.lp_count = lp_count;
  out.status = budget_hit ? BnbStatus::NodeBudget : BnbStatus::Optimal;
  out.certificate = std::move(cert);
  return out;
}

BnbOutcome solve_milp(const MpMilp& p, const Vec& theta,
                      std::optional<Cover> root, const BnbOptions& options) {
  LpSolver solver(p, options.lp);
  return solve_milp(solver, theta, std::move(root), options);
}

double lower_bound(const LpSolver& solver, const Vec& theta,
                   const Cover& cover) {
  double best = kInf;
  for (const auto& box : cover.boxes) {
    LpResult lp = solver.solve(theta, box);
    if (lp.status == LpStatus::Unbounded) return -kInf;
    if (lp.status == LpStatus::Optimal) best = std::min(best, lp.value);
    if (lp.status == LpStatus::IterationLimit)
      throw std::runtime_error("lower_bound: LP iteration limit hit");
  }
  return best;
}

double lower_bound(const MpMilp& p, const Vec& theta, const Cover& cover) {
  LpSolver solver(p);
  return lower_bound(solver, theta, cover);
}

std::pair<double, std::optional<MilpPoint>> upper_bound(const LpSolver& solver,
                                                        const Vec& theta,
                                                        const Cover& cover) {
  double best = kInf;
  std::optional<MilpPoint> best_point;
  for (const auto& box : cover.boxes) {
    LpResult lp = solver.solve(theta, box);
    if (lp.status == LpStatus::IterationLimit)
      throw std::runtime_error("upper_bound: LP iteration limit hit");
    if (lp.status != LpStatus::Optimal) continue;
    if (!is_integral(lp)) continue;
    if (lp.value < best) {
      best = lp.value;
      best_point = std::move(lp.point);
    }
  }
  return {best, std::move(best_point)};
}

std::pair<double, std::optional<MilpPoint>> upper_bound(const MpMilp& p,
                                                        const Vec& theta,
                                                        const Cover& cover) {
  LpSolver solver(p);
  return upper_bound(solver, theta, cover);
}

nlohmann::json certificate_to_json(const BnbCertificate& cert) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& box : cert.cover.boxes)
    boxes.push_back({bits_to_string(box.lb), bits_to_string(box.ub)});
  nlohmann::json j;
  j["boxes"] = std::move(boxes);
  j["y_star"] = bits_to_string(cert.y_star);
  j["value"] = cert.value;
  j["node_count"] = cert.node_count;
  j["lp_count"] = cert.lp_count;
  return j;
}

BnbCertificate certificate_from_json(const nlohmann::json& j) {
  BnbCertificate cert;
  for (const auto& pair : j.at("boxes"))
    cert.cover.boxes.push_back(LpBox{bits_from_string(pair.at(0)),
                                     bits_from_string(pair.at(1))});
  cert.y_star = bits_from_string(j.at("y_star"));
  cert.value = j.at("value").get<double>();
  cert.node_count = j.value("node_count", 0L);
  cert.lp_count = j.value("lp_count", 0L);
  return cert;
}

}  // namespace lampos

#include "lampos/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <stdexcept>

namespace lampos {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string strategy_id(const Cover& canonical, const BitVec& y_star) {
  std::string bytes;
  for (const auto& box : canonical.boxes) {
    bytes += bits_to_string(box.lb);
    bytes += '|';
    bytes += bits_to_string(box.ub);
    bytes += ';';
  }
  bytes += "Y:";
  bytes += bits_to_string(y_star);
  return hex64(fnv1a(bytes));
}

Strategy make_strategy(Cover cover, BitVec y_star) {
  Strategy s;
  s.cover = canonical_cover(std::move(cover.boxes));
  s.y_star = std::move(y_star);
  s.id = strategy_id(s.cover, s.y_star);
  return s;
}

Strategy extract_strategy(const BnbCertificate& cert) {
  return make_strategy(cert.cover, cert.y_star);
}

double StrategyEval::gap() const {
  if (v_ub == kInf) return kInf;
  const double diff = v_ub - v_lb;
  if (std::abs(v_lb) < 1e-9) return std::max(0.0, diff);
  return std::max(0.0, diff / std::abs(v_lb));
}

StrategyEval evaluate_strategy(const LpSolver& solver, const Vec& theta,
                               const Strategy& s) {
  StrategyEval eval;
  eval.v_lb = lower_bound(solver, theta, s.cover);
  LpResult fixed = solver.solve_fixed(theta, s.y_star);
  if (fixed.status == LpStatus::Optimal) {
    eval.v_ub = fixed.value;
    eval.point = std::move(fixed.point);
  } else if (fixed.status == LpStatus::Unbounded) {
    eval.v_ub = -kInf;
  } else {
    eval.v_ub = kInf;
  }
  return eval;
}

StrategyEval evaluate_strategy(const MpMilp& p, const Vec& theta,
                               const Strategy& s) {
  LpSolver solver(p);
  return evaluate_strategy(solver, theta, s);
}

namespace {

// R \ S as disjoint boxes, sweeping coordinates ascending. R and S intersect.
void subtract_box(const LpBox& R, const LpBox& S, std::vector<LpBox>& out) {
  LpBox cur = R;
  const int M = R.dim();
  for (int i = 0; i < M; ++i) {
    if (S.lb[i] == S.ub[i] && cur.lb[i] < cur.ub[i]) {
      LpBox piece = cur;
      piece.lb[i] = piece.ub[i] = 1 - S.lb[i];
      out.push_back(std::move(piece));
      cur.lb[i] = cur.ub[i] = S.lb[i];
    }
  }
  // cur is now contained in S and is dropped.
}

}  // namespace

Cover complete_cover(const LpBox& optimal_box, const std::vector<LpBox>& partial,
                     int M) {
  optimal_box.validate(M);
  for (const auto& box : partial) box.validate(M);
  for (std::size_t i = 0; i < partial.size(); ++i)
    for (std::size_t j = i + 1; j < partial.size(); ++j)
      if (boxes_intersect(partial[i], partial[j]))
        throw std::invalid_argument("complete_cover: overlapping input boxes");

  std::vector<LpBox> inputs;
  inputs.push_back(optimal_box);
  for (const auto& box : partial) {
    if (box == optimal_box) continue;
    if (boxes_intersect(box, optimal_box))
      throw std::invalid_argument("complete_cover: overlapping input boxes");
    inputs.push_back(box);
  }

  std::vector<LpBox> remaining{root_box(M)};
  for (const auto& s : inputs) {
    std::vector<LpBox> next;
    for (const auto& r : remaining) {
      if (!boxes_intersect(r, s))
        next.push_back(r);
      else
        subtract_box(r, s, next);
    }
    remaining = std::move(next);
  }

  Cover cover;
  cover.boxes = partial;
  if (std::find(partial.begin(), partial.end(), optimal_box) == partial.end())
    cover.boxes.insert(cover.boxes.begin(), optimal_box);
  for (auto& box : remaining) cover.boxes.push_back(std::move(box));
  return cover;
}

double good_turing_bound(long N, long N1, double beta) {
  if (N < 1 || N1 < 0 || N1 > N || beta <= 0.0 || beta >= 1.0)
    throw std::invalid_argument("good_turing_bound: domain violation");
  static const double c = 2.0 * std::sqrt(2.0) + std::sqrt(3.0);
  return static_cast<double>(N1) / static_cast<double>(N) +
         c * std::sqrt(std::log(3.0 / beta) / static_cast<double>(N));
}

void StrategyDataset::recount() {
  counts.clear();
  for (const auto& s : samples) ++counts[s.strategy_id];
}

namespace {

struct SlotResult {
  Vec theta;
  BnbCertificate cert;
  long rejects = 0;
};

SlotResult run_slot(const LpSolver& solver, const ParameterSampler& sampler,
                    const BuildOptions& options, std::uint64_t slot) {
  SlotResult result;
  SplitMix64 rng = substream(options.seed, slot);
  for (int attempt = 0; attempt < options.draws_per_sample; ++attempt) {
    Vec theta = sampler(rng);
    BnbOutcome outcome = solve_milp(solver, theta, std::nullopt, options.bnb);
    if (outcome.status == BnbStatus::NodeBudget)
      throw std::runtime_error("build_dataset: node budget exhausted");
    if (outcome.status == BnbStatus::Infeasible) {
      ++result.rejects;
      continue;
    }
    result.theta = std::move(theta);
    result.cert = std::move(*outcome.certificate);
    return result;
  }
  throw std::runtime_error(
      "build_dataset: sampler produced no feasible parameter within budget");
}

// Candidate relabel evaluation: the certificate value is a cheap prefilter
// for the fixed-y LP before the full cover evaluation.
bool certifies(const LpSolver& solver, const Vec& theta, const Strategy& s,
               double v_opt, double gap_tol, double* measured_gap) {
  LpResult fixed = solver.solve_fixed(theta, s.y_star);
  if (fixed.status != LpStatus::Optimal) return false;
  if (std::abs(fixed.value - v_opt) > gap_tol * std::max(1.0, std::abs(v_opt)))
    return false;
  StrategyEval eval = evaluate_strategy(solver, theta, s);
  if (eval.gap() > gap_tol) return false;
  *measured_gap = eval.gap();
  return true;
}

std::vector<std::vector<int>> nearest_prior(const std::vector<DatasetSample>& samples,
                                            int k) {
  std::vector<std::vector<int>> idx(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    if (i == 0) return;
    std::vector<std::pair<double, int>> dist;
    dist.reserve(i);
    for (std::size_t j = 0; j < i; ++j) {
      const double d2 = (samples[i].theta - samples[j].theta).squaredNorm();
      dist.emplace_back(d2, static_cast<int>(j));
    }
    const std::size_t keep = std::min<std::size_t>(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + keep, dist.end());
    idx[i].reserve(keep);
    for (std::size_t t = 0; t < keep; ++t) idx[i].push_back(dist[t].second);
  });
  return idx;
}

}  // namespace

StrategyDataset build_dataset(const LpSolver& solver, const ParameterSampler& sampler,
                              const BuildOptions& options) {
  StrategyDataset ds;
  ds.meta.beta = options.beta;
  ds.meta.epsilon = options.epsilon;
  ds.meta.seed = options.seed;
  ds.meta.step_width = options.step_width;

  std::map<std::string, long> raw_counts;
  long N = 0;
  long N1 = 0;
  double bound = kInf;
  bool stopped = false;
  std::uint64_t slot_base = 0;
  const int chunk = std::max(2 * worker_count(), 4);

  while (!stopped) {
    std::vector<SlotResult> results(static_cast<std::size_t>(chunk));
    parallel_for(results.size(), [&](std::size_t k) {
      results[k] = run_slot(solver, sampler, options, slot_base + k);
    });
    for (auto& r : results) {
      Strategy s = extract_strategy(r.cert);
      long& count = raw_counts[s.id];
      if (count == 0)
        ++N1;
      else if (count == 1)
        --N1;
      ++count;
      if (ds.strategies.find(s.id) == ds.strategies.end())
        ds.strategies.emplace(s.id, s);
      DatasetSample sample;
      sample.theta = std::move(r.theta);
      sample.strategy_id = s.id;
      sample.original_id = s.id;
      sample.cert_value = r.cert.value;
      ds.samples.push_back(std::move(sample));
      ds.meta.rejected_draws += r.rejects;
      ++N;
      bound = good_turing_bound(N, N1, options.beta);
      if (options.verbose && N % 1000 == 0)
        std::cerr << "[gen-data] N=" << N << " N1=" << N1 << " bound=" << bound
                  << " strategies=" << raw_counts.size() << "\n";
      if (bound <= options.epsilon) {
        stopped = true;
        break;
      }
    }
    slot_base += static_cast<std::uint64_t>(chunk);
  }
  ds.samples.resize(static_cast<std::size_t>(N));
  ds.meta.total = N;
  ds.meta.singletons = N1;
  ds.meta.final_bound = bound;

  // Redundancy pass: relabel each sample with the smallest-cover strategy
  // among its K nearest prior samples that still certifies optimality there.
  const auto knn = nearest_prior(ds.samples, options.knn);
  auto cover_size = [&](const std::string& id) {
    return ds.strategies.at(id).cover.size();
  };
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    DatasetSample& sample = ds.samples[i];
    const std::string& current = sample.strategy_id;
    const std::size_t current_size = cover_size(current);
    std::set<std::string> seen{current};
    std::vector<std::string> candidates;
    for (int j : knn[i]) {
      const std::string& cand = ds.samples[static_cast<std::size_t>(j)].strategy_id;
      if (!seen.insert(cand).second) continue;
      const std::size_t size = cover_size(cand);
      if (size < current_size || (size == current_size && cand < current))
        candidates.push_back(cand);
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](const std::string& a, const std::string& b) {
                const auto sa = cover_size(a), sb = cover_size(b);
                if (sa != sb) return sa < sb;
                return a < b;
              });
    for (const std::string& cand : candidates) {
      double gap = 0.0;
      if (certifies(solver, sample.theta, ds.strategies.at(cand),
                    sample.cert_value, options.gap_tol, &gap)) {
        sample.strategy_id = cand;
        sample.relabel_gap = gap;
        break;
      }
    }
  }

  // Cap pass: samples still labeled with oversized covers move to the least
  // sub-optimal small-cover strategy among nearby and globally frequent ones.
  ds.recount();
  if (options.cover_cap > 0) {
    std::vector<std::pair<long, std::string>> by_count;
    for (const auto& [id, count] : ds.counts)
      if (cover_size(id) <= static_cast<std::size_t>(options.cover_cap))
        by_count.emplace_back(-count, id);
    std::sort(by_count.begin(), by_count.end());
    std::vector<std::string> frequent;
    for (std::size_t t = 0; t < by_count.size() && t < 50; ++t)
      frequent.push_back(by_count[t].second);

    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      DatasetSample& sample = ds.samples[i];
      if (cover_size(sample.strategy_id) <=
          static_cast<std::size_t>(options.cover_cap))
        continue;
      std::set<std::string> seen;
      std::vector<std::string> candidates;
      auto add = [&](const std::string& id) {
        if (cover_size(id) > static_cast<std::size_t>(options.cover_cap)) return;
        if (seen.insert(id).second) candidates.push_back(id);
      };
      for (int j : knn[i]) add(ds.samples[static_cast<std::size_t>(j)].strategy_id);
      for (const auto& id : frequent) add(id);
      std::sort(candidates.begin(), candidates.end(),
                [&](const std::string& a, const std::string& b) {
                  const auto sa = cover_size(a), sb = cover_size(b);
                  if (sa != sb) return sa < sb;
                  return a < b;
                });
      if (candidates.empty()) continue;
      std::vector<double> gaps(candidates.size(), kInf);
      parallel_for(candidates.size(), [&](std::size_t t) {
        StrategyEval eval = evaluate_strategy(solver, sample.theta,
                                              ds.strategies.at(candidates[t]));
        gaps[t] = eval.gap();
      });
      std::size_t best = 0;
      for (std::size_t t = 1; t < candidates.size(); ++t)
        if (gaps[t] < gaps[best]) best = t;  // candidates pre-sorted for ties
      if (gaps[best] == kInf) continue;
      sample.strategy_id = candidates[best];
      sample.relabel_gap = gaps[best];
    }
  }

  ds.recount();
  // Keep only strategies referenced by a current or original label.
  std::set<std::string> referenced;
  for (const auto& s : ds.samples) {
    referenced.insert(s.strategy_id);
    referenced.insert(s.original_id);
  }
  for (auto it = ds.strategies.begin(); it != ds.strategies.end();)
    it = referenced.count(it->first) ? std::next(it) : ds.strategies.erase(it);
  return ds;
}

nlohmann::json strategy_to_json(const Strategy& s) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& box : s.cover.boxes)
    boxes.push_back({bits_to_string(box.lb), bits_to_string(box.ub)});
  return nlohmann::json{{"boxes", std::move(boxes)},
                        {"y_star", bits_to_string(s.y_star)}};
}

Strategy strategy_from_json(const nlohmann::json& j) {
  Cover cover;
  for (const auto& pair : j.at("boxes"))
    cover.boxes.push_back(
        LpBox{bits_from_string(pair.at(0)), bits_from_string(pair.at(1))});
  return make_strategy(std::move(cover), bits_from_string(j.at("y_star")));
}

void StrategyDataset::save(const std::string& jsonl_path,
                           const std::string& sidecar_path) const {
  std::ofstream os(jsonl_path);
  if (!os) throw std::runtime_error("cannot open " + jsonl_path);
  nlohmann::json header{{"v", 1},
                        {"beta", meta.beta},
                        {"epsilon", meta.epsilon},
                        {"N", meta.total},
                        {"N1", meta.singletons},
                        {"final_bound", meta.final_bound},
                        {"seed", meta.seed},
                        {"rejected_draws", meta.rejected_draws},
                        {"step_width", meta.step_width}};
  os << header.dump() << "\n";
  for (const auto& s : samples) {
    nlohmann::json theta = nlohmann::json::array();
    for (int i = 0; i < s.theta.size(); ++i) theta.push_back(s.theta[i]);
    nlohmann::json row{{"theta", std::move(theta)},
                       {"strategy_id", s.strategy_id},
                       {"original_id", s.original_id},
                       {"relabel_gap", s.relabel_gap},
                       {"cert_value", s.cert_value}};
    os << row.dump() << "\n";
  }

  std::ofstream side(sidecar_path);
  if (!side) throw std::runtime_error("cannot open " + sidecar_path);
  nlohmann::json table;
  for (const auto& [id, s] : strategies) table[id] = strategy_to_json(s);
  side << nlohmann::json{{"v", 1}, {"strategies", std::move(table)}}.dump();
}

StrategyDataset StrategyDataset::load(const std::string& jsonl_path,
                                      const std::string& sidecar_path) {
  std::ifstream is(jsonl_path);
  if (!is) throw std::runtime_error("cannot open " + jsonl_path);
  StrategyDataset ds;
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("empty dataset file " + jsonl_path);
  nlohmann::json header = nlohmann::json::parse(line);
  ds.meta.beta = header.at("beta").get<double>();
  ds.meta.epsilon = header.at("epsilon").get<double>();
  ds.meta.total = header.at("N").get<long>();
  ds.meta.singletons = header.at("N1").get<long>();
  ds.meta.final_bound = header.at("final_bound").get<double>();
  ds.meta.seed = header.at("seed").get<std::uint64_t>();
  ds.meta.rejected_draws = header.value("rejected_draws", 0L);
  ds.meta.step_width = header.value("step_width", 0);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line);
    DatasetSample s;
    const auto& theta = row.at("theta");
    s.theta.resize(static_cast<int>(theta.size()));
    for (int i = 0; i < s.theta.size(); ++i) s.theta[i] = theta.at(i).get<double>();
    s.strategy_id = row.at("strategy_id").get<std::string>();
    s.original_id = row.at("original_id").get<std::string>();
    s.relabel_gap = row.value("relabel_gap", 0.0);
    s.cert_value = row.value("cert_value", 0.0);
    ds.samples.push_back(std::move(s));
  }

  std::ifstream side(sidecar_path);
  if (!side) throw std::runtime_error("cannot open " + sidecar_path);
  nlohmann::json sidecar;
  side >> sidecar;
  for (const auto& [id, body] : sidecar.at("strategies").items()) {
    Strategy s = strategy_from_json(body);
    if (s.id != id) s.id = id;  // trust the stored key
    ds.strategies.emplace(id, std::move(s));
  }
  ds.recount();
  return ds;
}

}  // namespace lampos

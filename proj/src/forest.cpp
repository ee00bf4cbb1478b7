#include "lampos/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

namespace lampos {

double gini(const Vec& fractions) {
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < fractions.size(); ++i) {
    if (fractions[i] < -1e-12)
      throw std::invalid_argument("gini: negative class fraction");
    sum += fractions[i];
    sq += fractions[i] * fractions[i];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("gini: fractions must sum to one");
  return 1.0 - sq;
}

int DecisionTree::predict(const Vec& features) const {
  int at = 0;
  for (;;) {
    const TreeNode& node = nodes[static_cast<std::size_t>(at)];
    if (node.feature < 0) {
      int best_class = -1;
      double best_weight = -1.0;
      for (const auto& [cls, w] : node.histogram)
        if (w > best_weight) {
          best_weight = w;
          best_class = cls;
        }
      return best_class;
    }
    at = features[node.feature] < node.threshold ? node.left : node.right;
  }
}

int ForestModel::predict(const Vec& features) const {
  std::vector<int> votes(static_cast<std::size_t>(n_classes), 0);
  for (const auto& tree : trees) {
    const int cls = tree.predict(features);
    if (cls >= 0 && cls < n_classes) ++votes[static_cast<std::size_t>(cls)];
  }
  int best = 0;
  for (int c = 1; c < n_classes; ++c)
    if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)])
      best = c;
  return best;
}

std::vector<int> LabelCodec::encode_binary(const BitVec& y) const {
  std::vector<int> out;
  out.reserve(step_blocks.size());
  for (int s = 0; s < n_steps(); ++s) {
    const int offset = s * step_width;
    BitVec block(y.begin() + offset, y.begin() + offset + step_width);
    auto it = step_class[static_cast<std::size_t>(s)].find(bits_to_string(block));
    if (it == step_class[static_cast<std::size_t>(s)].end())
      throw std::invalid_argument("encode_binary: unseen block");
    out.push_back(it->second);
  }
  return out;
}

BitVec LabelCodec::decode_binary(const std::vector<int>& classes) const {
  BitVec out;
  out.reserve(static_cast<std::size_t>(n_steps() * step_width));
  for (int s = 0; s < n_steps(); ++s) {
    const auto& block =
        step_blocks[static_cast<std::size_t>(s)].at(static_cast<std::size_t>(classes[s]));
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

namespace {

struct TrainData {
  const std::vector<Vec>* features;
  const std::vector<int>* labels;
  const std::vector<double>* weights;
  int n_features = 0;
  int n_classes = 0;
};

struct Builder {
  const TrainData& data;
  const TrainOptions& opts;
  SplitMix64 rng;
  DecisionTree tree;

  Builder(const TrainData& d, const TrainOptions& o, std::uint64_t seed)
      : data(d), opts(o), rng(seed) {}

  int grow(std::vector<int>& idx, int begin, int end, int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    std::map<int, double> hist;
    for (int t = begin; t < end; ++t) {
      const int i = idx[static_cast<std::size_t>(t)];
      hist[(*data.labels)[static_cast<std::size_t>(i)]] +=
          (*data.weights)[static_cast<std::size_t>(i)];
    }
    const bool pure = hist.size() <= 1;
    const bool small = end - begin < 2 * opts.min_leaf;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = 0.0;
    if (!pure && !small && depth < opts.max_depth) {
      double total_w = 0.0;
      double total_sq = 0.0;
      for (const auto& [cls, w] : hist) {
        total_w += w;
        total_sq += w * w;
      }
      const double parent_impurity = total_w - total_sq / total_w;

      // Feature subsampling: sqrt(p) distinct features per split.
      const int p = data.n_features;
      int k = std::max(1, static_cast<int>(std::floor(std::sqrt(p))));
      std::vector<int> feats(static_cast<std::size_t>(p));
      std::iota(feats.begin(), feats.end(), 0);
      for (int t = 0; t < k; ++t) {
        const auto swap_at =
            t + static_cast<int>(rng.below(static_cast<std::uint64_t>(p - t)));
        std::swap(feats[static_cast<std::size_t>(t)],
                  feats[static_cast<std::size_t>(swap_at)]);
      }
      feats.resize(static_cast<std::size_t>(k));
      std::sort(feats.begin(), feats.end());

      std::vector<int> order(idx.begin() + begin, idx.begin() + end);
      std::vector<double> left_w(static_cast<std::size_t>(data.n_classes), 0.0);
      std::vector<double> right_w(static_cast<std::size_t>(data.n_classes), 0.0);
      for (int f : feats) {
        std::sort(order.begin(), order.end(), [&](int a, int b) {
          const double va = (*data.features)[static_cast<std::size_t>(a)][f];
          const double vb = (*data.features)[static_cast<std::size_t>(b)][f];
          if (va != vb) return va < vb;
          return a < b;
        });
        std::fill(left_w.begin(), left_w.end(), 0.0);
        std::fill(right_w.begin(), right_w.end(), 0.0);
        for (const auto& [cls, w] : hist) right_w[static_cast<std::size_t>(cls)] = w;
        double lw = 0.0, lsq = 0.0;
        double rw = total_w;
        double rsq = total_sq;
        for (std::size_t t = 0; t + 1 < order.size(); ++t) {
          const int i = order[t];
          const int cls = (*data.labels)[static_cast<std::size_t>(i)];
          const double w = (*data.weights)[static_cast<std::size_t>(i)];
          const double lbefore = left_w[static_cast<std::size_t>(cls)];
          const double rbefore = right_w[static_cast<std::size_t>(cls)];
          lsq += 2 * lbefore * w + w * w;
          rsq += -2 * rbefore * w + w * w;
          left_w[static_cast<std::size_t>(cls)] = lbefore + w;
          right_w[static_cast<std::size_t>(cls)] = rbefore - w;
          lw += w;
          rw -= w;
          const double va = (*data.features)[static_cast<std::size_t>(i)][f];
          const double vb =
              (*data.features)[static_cast<std::size_t>(order[t + 1])][f];
          if (va == vb) continue;
          if (lw <= 0.0 || rw <= 0.0) continue;
          const double child_impurity = (lw - lsq / lw) + (rw - rsq / rw);
          const double gain = parent_impurity - child_impurity;
          if (gain > best_gain + 1e-15) {
            best_gain = gain;
            best_feature = f;
            best_threshold = 0.5 * (va + vb);
          }
        }
      }
    }

    if (best_feature < 0) {
      TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
      node.feature = -1;
      node.histogram.assign(hist.begin(), hist.end());
      return node_id;
    }

    const auto mid = std::stable_partition(
        idx.begin() + begin, idx.begin() + end, [&](int i) {
          return (*data.features)[static_cast<std::size_t>(i)][best_feature] <
                 best_threshold;
        });
    const int split = static_cast<int>(mid - idx.begin());
    if (split == begin || split == end) {
      TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
      node.feature = -1;
      node.histogram.assign(hist.begin(), hist.end());
      return node_id;
    }
    const int left = grow(idx, begin, split, depth + 1);
    const int right = grow(idx, split, end, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left;
    node.right = right;
    return node_id;
  }
};

ForestModel train_forest(const std::vector<Vec>& features,
                         const std::vector<int>& labels, int n_classes,
                         const TrainOptions& opts, std::uint64_t forest_seed) {
  const std::size_t n = features.size();
  std::vector<double> weights(n, 1.0);
  if (opts.class_weighting && n_classes > 1) {
    std::vector<long> counts(static_cast<std::size_t>(n_classes), 0);
    for (int cls : labels) ++counts[static_cast<std::size_t>(cls)];
    for (std::size_t i = 0; i < n; ++i) {
      const long c = counts[static_cast<std::size_t>(labels[i])];
      weights[i] = static_cast<double>(n) /
                   (static_cast<double>(n_classes) * static_cast<double>(c));
    }
  }

  TrainData data;
  data.features = &features;
  data.labels = &labels;
  data.weights = &weights;
  data.n_features = static_cast<int>(features.front().size());
  data.n_classes = n_classes;

  ForestModel model;
  model.n_classes = n_classes;
  model.trees.resize(static_cast<std::size_t>(opts.n_trees));
  model.tree_seeds.resize(static_cast<std::size_t>(opts.n_trees));
  for (int t = 0; t < opts.n_trees; ++t)
    model.tree_seeds[static_cast<std::size_t>(t)] =
        substream(forest_seed, static_cast<std::uint64_t>(t)).state;

  parallel_for(static_cast<std::size_t>(opts.n_trees), [&](std::size_t t) {
    SplitMix64 rng(model.tree_seeds[t]);
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i)
      idx[i] = static_cast<int>(rng.below(n));  // bootstrap with replacement
    std::sort(idx.begin(), idx.end());
    Builder builder(data, opts, rng.next());
    builder.grow(idx, 0, static_cast<int>(n), 0);
    model.trees[t] = std::move(builder.tree);
  });
  return model;
}

}  // namespace

PredictorModel train(const StrategyDataset& ds, const TrainOptions& options) {
  if (ds.samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (ds.samples.size() == 1)
    std::cerr << "[train] warning: single-sample dataset, constant predictor\n";

  PredictorModel model;
  model.options = options;
  model.strategies = ds.strategies;

  LabelCodec& codec = model.codec;
  const int M = static_cast<int>(
      ds.strategies.at(ds.samples.front().strategy_id).y_star.size());
  codec.step_width = ds.meta.step_width > 0 ? ds.meta.step_width : M;
  if (codec.step_width <= 0) codec.step_width = std::max(M, 1);
  if (M % codec.step_width != 0)
    throw std::invalid_argument("train: step width must divide binary count");
  const int n_steps = M == 0 ? 0 : M / codec.step_width;
  codec.step_blocks.resize(static_cast<std::size_t>(n_steps));
  codec.step_class.resize(static_cast<std::size_t>(n_steps));

  std::vector<Vec> features;
  features.reserve(ds.samples.size());
  std::vector<int> cover_labels;
  std::vector<std::vector<int>> step_labels(static_cast<std::size_t>(n_steps));
  for (const auto& sample : ds.samples) {
    features.push_back(sample.theta);
    auto [it, inserted] = codec.cover_class.try_emplace(
        sample.strategy_id, static_cast<int>(codec.cover_ids.size()));
    if (inserted) codec.cover_ids.push_back(sample.strategy_id);
    cover_labels.push_back(it->second);

    const BitVec& y = ds.strategies.at(sample.strategy_id).y_star;
    for (int s = 0; s < n_steps; ++s) {
      BitVec block(y.begin() + s * codec.step_width,
                   y.begin() + (s + 1) * codec.step_width);
      auto& lookup = codec.step_class[static_cast<std::size_t>(s)];
      auto [bit, binserted] = lookup.try_emplace(
          bits_to_string(block),
          static_cast<int>(codec.step_blocks[static_cast<std::size_t>(s)].size()));
      if (binserted)
        codec.step_blocks[static_cast<std::size_t>(s)].push_back(std::move(block));
      step_labels[static_cast<std::size_t>(s)].push_back(bit->second);
    }
  }

  model.cover_forest =
      train_forest(features, cover_labels,
                   static_cast<int>(codec.cover_ids.size()), options,
                   substream(options.seed, 0xc0fe).state);
  model.step_forests.resize(static_cast<std::size_t>(n_steps));
  for (int s = 0; s < n_steps; ++s)
    model.step_forests[static_cast<std::size_t>(s)] = train_forest(
        features, step_labels[static_cast<std::size_t>(s)],
        static_cast<int>(codec.step_blocks[static_cast<std::size_t>(s)].size()),
        options, substream(options.seed, 0x1000 + static_cast<std::uint64_t>(s)).state);

  if (n_steps > 62)
    throw std::invalid_argument("train: more than 62 horizon steps unsupported");
  long cover_hits = 0;
  std::vector<long> step_hits(static_cast<std::size_t>(n_steps), 0);
  std::vector<std::uint64_t> hits_buffer(ds.samples.size(), 0);
  parallel_for(ds.samples.size(), [&](std::size_t i) {
    std::uint64_t packed =
        model.cover_forest.predict(features[i]) == cover_labels[i] ? 1 : 0;
    for (int s = 0; s < n_steps; ++s)
      if (model.step_forests[static_cast<std::size_t>(s)].predict(features[i]) ==
          step_labels[static_cast<std::size_t>(s)][i])
        packed |= (1ULL << (s + 1));
    hits_buffer[i] = packed;
  });
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    cover_hits += hits_buffer[i] & 1;
    for (int s = 0; s < n_steps; ++s)
      step_hits[static_cast<std::size_t>(s)] += (hits_buffer[i] >> (s + 1)) & 1;
  }
  const double n = static_cast<double>(ds.samples.size());
  model.cover_accuracy = static_cast<double>(cover_hits) / n;
  if (n_steps == 0) {
    model.binary_accuracy = 1.0;
    model.binary_accuracy_min = 1.0;
  } else {
    double acc_sum = 0.0;
    double acc_min = 1.0;
    for (int s = 0; s < n_steps; ++s) {
      const double acc = static_cast<double>(step_hits[static_cast<std::size_t>(s)]) / n;
      acc_sum += acc;
      acc_min = std::min(acc_min, acc);
    }
    model.binary_accuracy = acc_sum / n_steps;
    model.binary_accuracy_min = acc_min;
  }
  return model;
}

Strategy predict(const PredictorModel& model, const Vec& theta) {
  const int cover_class = model.cover_forest.predict(theta);
  const std::string& id =
      model.codec.cover_ids.at(static_cast<std::size_t>(cover_class));
  Cover cover = model.strategies.at(id).cover;

  std::vector<int> step_classes;
  step_classes.reserve(model.step_forests.size());
  for (const auto& forest : model.step_forests)
    step_classes.push_back(forest.predict(theta));
  BitVec y = model.codec.decode_binary(step_classes);
  return make_strategy(std::move(cover), std::move(y));
}

namespace {

nlohmann::json forest_to_json(const ForestModel& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : f.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
      nlohmann::json hist = nlohmann::json::array();
      for (const auto& [cls, w] : node.histogram) hist.push_back({cls, w});
      nodes.push_back({node.feature, node.threshold, node.left, node.right,
                       std::move(hist)});
    }
    trees.push_back(std::move(nodes));
  }
  nlohmann::json seeds = nlohmann::json::array();
  for (auto s : f.tree_seeds) seeds.push_back(s);
  return nlohmann::json{
      {"n_classes", f.n_classes}, {"seeds", std::move(seeds)}, {"trees", trees}};
}

ForestModel forest_from_json(const nlohmann::json& j) {
  ForestModel f;
  f.n_classes = j.at("n_classes").get<int>();
  for (const auto& s : j.at("seeds")) f.tree_seeds.push_back(s.get<std::uint64_t>());
  for (const auto& tj : j.at("trees")) {
    DecisionTree tree;
    for (const auto& nj : tj) {
      TreeNode node;
      node.feature = nj.at(0).get<int>();
      node.threshold = nj.at(1).get<double>();
      node.left = nj.at(2).get<int>();
      node.right = nj.at(3).get<int>();
      for (const auto& h : nj.at(4))
        node.histogram.emplace_back(h.at(0).get<int>(), h.at(1).get<double>());
      tree.nodes.push_back(std::move(node));
    }
    f.trees.push_back(std::move(tree));
  }
  return f;
}

}  // namespace

void PredictorModel::save(const std::string& path) const {
  nlohmann::json j;
  j["v"] = 1;
  j["options"] = {{"n_trees", options.n_trees},
                  {"max_depth", options.max_depth},
                  {"min_leaf", options.min_leaf},
                  {"class_weighting", options.class_weighting},
                  {"seed", options.seed}};
  j["cover_accuracy"] = cover_accuracy;
  j["binary_accuracy"] = binary_accuracy;
  j["binary_accuracy_min"] = binary_accuracy_min;
  j["cover_forest"] = forest_to_json(cover_forest);
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& f : step_forests) steps.push_back(forest_to_json(f));
  j["step_forests"] = std::move(steps);
  nlohmann::json codec_json;
  codec_json["cover_ids"] = codec.cover_ids;
  codec_json["step_width"] = codec.step_width;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& step : codec.step_blocks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : step) arr.push_back(bits_to_string(b));
    blocks.push_back(std::move(arr));
  }
  codec_json["step_blocks"] = std::move(blocks);
  j["codec"] = std::move(codec_json);
  nlohmann::json table;
  for (const auto& [id, s] : strategies) table[id] = strategy_to_json(s);
  j["strategies"] = std::move(table);

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << j.dump();
}

PredictorModel PredictorModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  is >> j;
  if (j.value("v", 0) != 1) throw std::runtime_error("unknown model version");
  PredictorModel model;
  const auto& oj = j.at("options");
  model.options.n_trees = oj.at("n_trees").get<int>();
  model.options.max_depth = oj.at("max_depth").get<int>();
  model.options.min_leaf = oj.at("min_leaf").get<int>();
  model.options.class_weighting = oj.at("class_weighting").get<bool>();
  model.options.seed = oj.at("seed").get<std::uint64_t>();
  model.cover_accuracy = j.at("cover_accuracy").get<double>();
  model.binary_accuracy = j.at("binary_accuracy").get<double>();
  model.binary_accuracy_min = j.value("binary_accuracy_min", 0.0);
  model.cover_forest = forest_from_json(j.at("cover_forest"));
  for (const auto& f : j.at("step_forests"))
    model.step_forests.push_back(forest_from_json(f));
  const auto& cj = j.at("codec");
  model.codec.cover_ids = cj.at("cover_ids").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < model.codec.cover_ids.size(); ++i)
    model.codec.cover_class[model.codec.cover_ids[i]] = static_cast<int>(i);
  model.codec.step_width = cj.at("step_width").get<int>();
  for (const auto& step : cj.at("step_blocks")) {
    std::vector<BitVec> blocks;
    std::map<std::string, int> lookup;
    for (const auto& b : step) {
      lookup[b.get<std::string>()] = static_cast<int>(blocks.size());
      blocks.push_back(bits_from_string(b.get<std::string>()));
    }
    model.codec.step_blocks.push_back(std::move(blocks));
    model.codec.step_class.push_back(std::move(lookup));
  }
  for (const auto& [id, body] : j.at("strategies").items()) {
    Strategy s = strategy_from_json(body);
    s.id = id;
    model.strategies.emplace(id, std::move(s));
  }
  return model;
}

}  // namespace lampos

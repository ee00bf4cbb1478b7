#pragma once

#include <map>
#include <string>
#include <vector>

#include "lampos/strategy.hpp"

namespace lampos {

/// Gini impurity sum p_i (1 - p_i) of a class-fraction vector.
/// Throws when the fractions are negative or do not sum to one.
double gini(const Vec& fractions);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<std::pair<int, double>> histogram;  // (class, weight), leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int predict(const Vec& features) const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_classes = 0;
  std::vector<std::uint64_t> tree_seeds;

  /// Majority vote over the trees' leaf classes, ties to the smaller index.
  int predict(const Vec& features) const;
};

/// Label maps: strategy ids to dense cover classes and per-step binary
/// blocks to dense class indices, both ordered by first appearance.
struct LabelCodec {
  std::vector<std::string> cover_ids;          // class -> id
  std::map<std::string, int> cover_class;      // id -> class
  int step_width = 0;
  std::vector<std::vector<BitVec>> step_blocks;       // step -> class -> bits
  std::vector<std::map<std::string, int>> step_class;  // step -> bits -> class

  int n_steps() const { return static_cast<int>(step_blocks.size()); }
  std::vector<int> encode_binary(const BitVec& y) const;
  BitVec decode_binary(const std::vector<int>& classes) const;
};

struct TrainOptions {
  int n_trees = 10;
  int max_depth = 24;
  int min_leaf = 1;
  bool class_weighting = true;
  std::uint64_t seed = 1;
};

struct PredictorModel {
  ForestModel cover_forest;
  std::vector<ForestModel> step_forests;
  LabelCodec codec;
  std::map<std::string, Strategy> strategies;
  TrainOptions options;
  double cover_accuracy = 0.0;
  double binary_accuracy = 0.0;      // mean per-step training accuracy
  double binary_accuracy_min = 0.0;  // worst step

  void save(const std::string& path) const;
  static PredictorModel load(const std::string& path);
};

/// Trains the cover classifier and one classifier per horizon step on the
/// dataset's current labels. step_width comes from the dataset metadata; a
/// value of zero treats the whole binary vector as a single step.
PredictorModel train(const StrategyDataset& ds, const TrainOptions& options);

/// Assembles the predicted strategy: cover by majority vote, binary vector
/// from the per-step block predictions.
Strategy predict(const PredictorModel& model, const Vec& theta);

}  // namespace lampos

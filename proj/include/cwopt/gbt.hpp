#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwopt/dataset.hpp"

namespace cwopt {

// A node is a leaf when `feature < 0`. Internal nodes send x[feature] <=
// threshold to `left`, everything else to `right`. Children always have a
// larger index than their parent, so the node array is acyclic.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, int max_depth);

  double predict(std::span<const double> features) const;
  double max_leaf() const;
  double min_leaf() const;
  int depth() const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int max_depth() const { return max_depth_; }

  /// Structural check used after deserialization; throws ErrorKind::Bundle.
  void validate(std::size_t n_features) const;

 private:
  std::vector<TreeNode> nodes_;
  int max_depth_ = 0;
};

struct Hyperparams {
  int n_trees = 300;
  int max_depth = 6;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Metrics {
  double rmse = 0.0;
  double mbe_percent = 0.0;
  double cv_rmse_percent = 0.0;
};

struct GBTModel {
  double base_prediction = 0.0;
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  std::vector<std::string> feature_names;
  std::string target_name;
  Metrics training_metrics;
  bool constant_target = false;  // warning: target had no variance, zero trees fitted

  /// base + learning_rate * sum of tree outputs. Throws on arity mismatch.
  double predict(std::span<const double> features) const;
  /// Same as predict without the arity check, for hot loops.
  double predict_unchecked(const double* features) const;

  /// Bounds on any prediction: base + lr * sum of per-tree extreme leaves.
  double upper_bound() const;
  double lower_bound() const;
};

/// Column-major design matrix: columns[f][row].
struct TrainingData {
  std::vector<std::vector<double>> columns;
  std::vector<double> target;
  std::vector<double> weights;  // empty means unit weights
  std::vector<std::string> feature_names;
  std::string target_name;

  std::size_t rows() const { return target.size(); }
};

TrainingData training_data(const Dataset& data, Column target, const std::vector<Column>& features);

struct FitResult {
  GBTModel model;
  std::vector<double> training_rmse;  // weighted RMSE after each tree
};

/// Least-squares gradient boosting with exact greedy splits.
FitResult fit_with_trace(const TrainingData& data, const Hyperparams& hp);
GBTModel fit(const TrainingData& data, const Hyperparams& hp);
GBTModel fit(const Dataset& data, Column target, const std::vector<Column>& features, const Hyperparams& hp);

struct WetBulbBin {
  int t_wb = 0;  // integer °F bin (nearest)
  double avg_percent_difference = 0.0;
  std::size_t count = 0;
};

struct Evaluation {
  Metrics metrics;
  std::size_t rows = 0;
  std::vector<WetBulbBin> wet_bulb_table;
};

Metrics compute_metrics(std::span<const double> predicted, std::span<const double> actual);
Evaluation evaluate(const GBTModel& model, const Dataset& data);

}  // namespace cwopt

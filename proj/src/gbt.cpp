#include "cwopt/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "cwopt/error.hpp"

namespace cwopt {

// ---------------------------------------------------------------------------
// RegressionTree
// ---------------------------------------------------------------------------

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, int max_depth)
    : nodes_(std::move(nodes)), max_depth_(max_depth) {}

double RegressionTree::predict(std::span<const double> x) const {
  int idx = 0;
  while (!nodes_[idx].is_leaf()) {
    const TreeNode& n = nodes_[idx];
    idx = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[idx].value;
}

double RegressionTree::max_leaf() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& n : nodes_)
    if (n.is_leaf()) m = std::max(m, n.value);
  return m;
}

double RegressionTree::min_leaf() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& n : nodes_)
    if (n.is_leaf()) m = std::min(m, n.value);
  return m;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

void RegressionTree::validate(std::size_t n_features) const {
  if (nodes_.empty()) fail(ErrorKind::Bundle, "tree has no nodes");
  std::vector<int> parents(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    if (n.is_leaf()) {
      if (!std::isfinite(n.value)) fail(ErrorKind::Bundle, "tree leaf " + std::to_string(i) + " is not finite");
      continue;
    }
    auto here = static_cast<int>(i);
    auto size = static_cast<int>(nodes_.size());
    if (static_cast<std::size_t>(n.feature) >= n_features)
      fail(ErrorKind::Bundle, "tree node " + std::to_string(i) + " splits on unknown feature");
    if (!std::isfinite(n.threshold)) fail(ErrorKind::Bundle, "tree node " + std::to_string(i) + " has non-finite threshold");
    if (n.left <= here || n.right <= here || n.left >= size || n.right >= size || n.left == n.right)
      fail(ErrorKind::Bundle, "tree node " + std::to_string(i) + " has invalid children");
    ++parents[static_cast<std::size_t>(n.left)];
    ++parents[static_cast<std::size_t>(n.right)];
  }
  for (std::size_t i = 1; i < nodes_.size(); ++i)
    if (parents[i] != 1) fail(ErrorKind::Bundle, "tree node " + std::to_string(i) + " is not reachable exactly once");
  if (depth() > max_depth_) fail(ErrorKind::Bundle, "tree deeper than its declared max_depth");
}

// ---------------------------------------------------------------------------
// GBTModel
// ---------------------------------------------------------------------------

double GBTModel::predict(std::span<const double> features) const {
  if (features.size() != feature_names.size())
    fail(ErrorKind::Schema, "model for '" + target_name + "' expects " + std::to_string(feature_names.size()) +
                                " features, got " + std::to_string(features.size()));
  return predict_unchecked(features.data());
}

double GBTModel::predict_unchecked(const double* x) const {
  double sum = 0.0;
  for (const auto& tree : trees) {
    const auto& nodes = tree.nodes();
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
      idx = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    sum += nodes[static_cast<std::size_t>(idx)].value;
  }
  return base_prediction + learning_rate * sum;
}

double GBTModel::upper_bound() const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.max_leaf();
  return base_prediction + learning_rate * sum;
}

double GBTModel::lower_bound() const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.min_leaf();
  return base_prediction + learning_rate * sum;
}

void Hyperparams::validate() const {
  if (n_trees < 0) fail(ErrorKind::Config, "n_trees must be >= 0");
  if (max_depth < 0) fail(ErrorKind::Config, "max_depth must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) fail(ErrorKind::Config, "learning_rate must lie in (0, 1]");
  if (min_samples_leaf < 1) fail(ErrorKind::Config, "min_samples_leaf must be >= 1");
}

TrainingData training_data(const Dataset& data, Column target, const std::vector<Column>& features) {
  TrainingData td;
  for (Column c : features) {
    td.columns.push_back(data.column(c));
    td.feature_names.emplace_back(column_name(c));
  }
  td.target = data.column(target);
  td.target_name = column_name(target);
  return td;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct NodeStats {
  double weight = 0.0;
  double sum = 0.0;      // weighted residual sum
  double sum_sq = 0.0;   // weighted residual sum of squares
  std::size_t count = 0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct ScanState {
  double weight = 0.0;
  double sum = 0.0;
  std::size_t count = 0;
  double last = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingData& data, const std::vector<double>& weights,
              const std::vector<std::vector<std::uint32_t>>& sorted, const Hyperparams& hp)
      : data_(data), weights_(weights), sorted_(sorted), hp_(hp), node_of_(data.rows(), 0) {}

  // Fits one tree to `residual`; leaves each row's leaf index in node_of().
  RegressionTree build(const std::vector<double>& residual) {
    const std::size_t n = data_.rows();
    std::fill(node_of_.begin(), node_of_.end(), 0u);
    nodes_.assign(1, TreeNode{});
    stats_.assign(1, NodeStats{});
    for (std::size_t i = 0; i < n; ++i) accumulate(stats_[0], i, residual[i]);

    std::vector<std::uint32_t> frontier{0};
    for (int depth = 0; depth < hp_.max_depth && !frontier.empty(); ++depth) {
      auto best = find_splits(frontier, residual);
      std::vector<std::uint32_t> next;
      std::vector<int> split_of(nodes_.size(), -1);
      for (std::uint32_t nd : frontier) {
        const SplitCandidate& c = best[nd];
        if (c.feature < 0) continue;
        double scale = stats_[nd].sum_sq + std::numeric_limits<double>::min();
        if (!(c.gain > 1e-12 * scale)) continue;
        auto left = static_cast<std::uint32_t>(nodes_.size());
        nodes_[nd].feature = c.feature;
        nodes_[nd].threshold = c.threshold;
        nodes_[nd].left = static_cast<int>(left);
        nodes_[nd].right = static_cast<int>(left + 1);
        nodes_.push_back(TreeNode{});
        nodes_.push_back(TreeNode{});
        stats_.push_back(NodeStats{});
        stats_.push_back(NodeStats{});
        split_of[nd] = c.feature;
        next.push_back(left);
        next.push_back(left + 1);
      }
      if (next.empty()) break;
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t nd = node_of_[i];
        if (nd >= split_of.size() || split_of[nd] < 0) continue;
        const TreeNode& node = nodes_[nd];
        auto child = static_cast<std::uint32_t>(
            data_.columns[static_cast<std::size_t>(node.feature)][i] <= node.threshold ? node.left : node.right);
        node_of_[i] = child;
        accumulate(stats_[child], i, residual[i]);
      }
      frontier = std::move(next);
    }
    for (std::size_t k = 0; k < nodes_.size(); ++k)
      if (nodes_[k].is_leaf()) nodes_[k].value = stats_[k].weight > 0 ? stats_[k].sum / stats_[k].weight : 0.0;
    return RegressionTree(nodes_, hp_.max_depth);
  }

  const std::vector<std::uint32_t>& node_of() const { return node_of_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  void accumulate(NodeStats& s, std::size_t i, double r) const {
    double w = weights_[i];
    s.weight += w;
    s.sum += w * r;
    s.sum_sq += w * r * r;
    ++s.count;
  }

  std::vector<SplitCandidate> find_splits(const std::vector<std::uint32_t>& frontier,
                                          const std::vector<double>& residual) const {
    const std::size_t min_leaf = static_cast<std::size_t>(hp_.min_samples_leaf);
    std::vector<char> active(nodes_.size(), 0);
    for (std::uint32_t nd : frontier)
      if (stats_[nd].count >= 2 * min_leaf) active[nd] = 1;
    std::vector<SplitCandidate> best(nodes_.size());
    std::vector<ScanState> scan(nodes_.size());
    // Features in ascending order and thresholds in ascending order; only a
    // strictly larger gain replaces the incumbent, which gives the lowest
    // feature index and then the lowest threshold on ties.
    for (std::size_t f = 0; f < data_.columns.size(); ++f) {
      std::fill(scan.begin(), scan.end(), ScanState{});
      const auto& x = data_.columns[f];
      for (std::uint32_t i : sorted_[f]) {
        std::uint32_t nd = node_of_[i];
        if (!active[nd]) continue;
        ScanState& st = scan[nd];
        double v = x[i];
        if (st.count >= min_leaf && v != st.last && stats_[nd].count - st.count >= min_leaf) {
          const NodeStats& tot = stats_[nd];
          double wr = tot.weight - st.weight;
          double sr = tot.sum - st.sum;
          double gain = st.sum * st.sum / st.weight + sr * sr / wr - tot.sum * tot.sum / tot.weight;
          if (gain > best[nd].gain) {
            double mid = st.last + (v - st.last) / 2.0;
            if (!(mid < v)) mid = st.last;
            best[nd] = SplitCandidate{gain, static_cast<int>(f), mid};
          }
        }
        double w = weights_[i];
        st.weight += w;
        st.sum += w * residual[i];
        ++st.count;
        st.last = v;
      }
    }
    return best;
  }

  const TrainingData& data_;
  const std::vector<double>& weights_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  const Hyperparams& hp_;
  std::vector<std::uint32_t> node_of_;
  std::vector<TreeNode> nodes_;
  std::vector<NodeStats> stats_;
};

double weighted_rmse(const std::vector<double>& y, const std::vector<double>& pred, const std::vector<double>& w) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double d = pred[i] - y[i];
    num += w[i] * d * d;
    den += w[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

FitResult fit_with_trace(const TrainingData& data, const Hyperparams& hp) {
  hp.validate();
  const std::size_t n = data.rows();
  if (data.columns.empty()) fail(ErrorKind::Training, "no features selected");
  if (data.feature_names.size() != data.columns.size())
    fail(ErrorKind::Training, "feature names do not match feature columns");
  {
    auto names = data.feature_names;
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
      fail(ErrorKind::Training, "feature names must be distinct");
  }
  for (const auto& col : data.columns)
    if (col.size() != n) fail(ErrorKind::Training, "feature column length differs from target length");
  if (n < 2 * static_cast<std::size_t>(hp.min_samples_leaf))
    fail(ErrorKind::Training, "training '" + data.target_name + "' needs at least " +
                                  std::to_string(2 * hp.min_samples_leaf) + " rows, got " + std::to_string(n));
  for (const auto& col : data.columns)
    for (double v : col)
      if (!std::isfinite(v)) fail(ErrorKind::Training, "non-finite feature value");
  for (double v : data.target)
    if (!std::isfinite(v)) fail(ErrorKind::Training, "non-finite target value");

  std::vector<double> weights = data.weights.empty() ? std::vector<double>(n, 1.0) : data.weights;
  if (weights.size() != n) fail(ErrorKind::Training, "weight vector length differs from row count");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) fail(ErrorKind::Training, "sample weights must be positive and finite");

  FitResult result;
  GBTModel& model = result.model;
  model.learning_rate = hp.learning_rate;
  model.feature_names = data.feature_names;
  model.target_name = data.target_name;

  double wsum = 0.0, wy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wsum += weights[i];
    wy += weights[i] * data.target[i];
  }
  model.base_prediction = wy / wsum;

  auto [lo, hi] = std::minmax_element(data.target.begin(), data.target.end());
  std::vector<double> pred(n, model.base_prediction);
  if (*lo == *hi) {
    model.base_prediction = *lo;
    model.constant_target = true;
    model.training_metrics = compute_metrics(std::vector<double>(n, *lo), data.target);
    return result;
  }

  std::vector<std::vector<std::uint32_t>> sorted(data.columns.size());
  for (std::size_t f = 0; f < data.columns.size(); ++f) {
    auto& order = sorted[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    const auto& x = data.columns[f];
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return x[a] < x[b]; });
  }

  TreeBuilder builder(data, weights, sorted, hp);
  std::vector<double> residual(n);
  model.trees.reserve(static_cast<std::size_t>(hp.n_trees));
  for (int k = 0; k < hp.n_trees; ++k) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = data.target[i] - pred[i];
    model.trees.push_back(builder.build(residual));
    const auto& nodes = builder.nodes();
    const auto& leaf = builder.node_of();
    for (std::size_t i = 0; i < n; ++i) pred[i] += hp.learning_rate * nodes[leaf[i]].value;
    result.training_rmse.push_back(weighted_rmse(data.target, pred, weights));
  }
  model.training_metrics = compute_metrics(pred, data.target);
  return result;
}

GBTModel fit(const TrainingData& data, const Hyperparams& hp) { return fit_with_trace(data, hp).model; }

GBTModel fit(const Dataset& data, Column target, const std::vector<Column>& features, const Hyperparams& hp) {
  return fit(training_data(data, target, features), hp);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

Metrics compute_metrics(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) fail(ErrorKind::Schema, "prediction and actual lengths differ");
  if (actual.empty()) fail(ErrorKind::Domain, "cannot evaluate on empty data");
  double n = static_cast<double>(actual.size());
  double sum_actual = 0.0, sum_err = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    double e = predicted[i] - actual[i];
    sum_actual += actual[i];
    sum_err += e;
    sum_sq += e * e;
  }
  double mean_actual = sum_actual / n;
  if (mean_actual == 0.0) fail(ErrorKind::UndefinedMetric, "mean of actual values is zero; MBE and CV(RMSE) undefined");
  Metrics m;
  m.rmse = std::sqrt(sum_sq / n);
  m.mbe_percent = 100.0 * (sum_err / n) / mean_actual;
  m.cv_rmse_percent = 100.0 * m.rmse / mean_actual;
  return m;
}

Evaluation evaluate(const GBTModel& model, const Dataset& data) {
  if (data.empty()) fail(ErrorKind::Domain, "cannot evaluate on empty data");
  std::vector<Column> features;
  for (const auto& name : model.feature_names) {
    auto c = column_from_name(name);
    if (!c) fail(ErrorKind::Schema, "dataset has no feature column '" + name + "'");
    features.push_back(*c);
  }
  auto target = column_from_name(model.target_name);
  if (!target) fail(ErrorKind::Schema, "dataset has no target column '" + model.target_name + "'");

  std::vector<double> pred, actual;
  pred.reserve(data.size());
  actual.reserve(data.size());
  std::map<int, std::pair<double, std::size_t>> bins;
  std::vector<double> x(features.size());
  for (const auto& r : data.records) {
    for (std::size_t f = 0; f < features.size(); ++f) x[f] = column_value(r, features[f]);
    double p = model.predict_unchecked(x.data());
    double a = column_value(r, *target);
    pred.push_back(p);
    actual.push_back(a);
    if (a != 0.0) {
      auto& bin = bins[static_cast<int>(std::lround(r.t_wb))];
      bin.first += 100.0 * std::abs(p - a) / std::abs(a);
      ++bin.second;
    }
  }
  Evaluation ev;
  ev.rows = data.size();
  ev.metrics = compute_metrics(pred, actual);
  for (const auto& [t_wb, acc] : bins)
    ev.wet_bulb_table.push_back(WetBulbBin{t_wb, acc.first / static_cast<double>(acc.second), acc.second});
  return ev;
}

}  // namespace cwopt

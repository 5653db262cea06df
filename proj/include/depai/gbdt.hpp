#pragma once

// Histogram-based gradient-boosted decision trees over sparse rows.
//
// Trees grow leaf-wise: the leaf with the largest split gain is split next
// until `max_leaves` is reached or no split improves the objective. Split
// candidates come from per-feature quantile histograms over nonzero values;
// zero (absent) entries live in their own bin and follow a learned default
// direction. Everything is single-threaded with a fixed traversal order
// (features ascending, thresholds ascending, default-left before
// default-right, earlier leaves first on equal gain), so training is
// bit-reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "depai/error.hpp"
#include "depai/featurize.hpp"

namespace depai {

enum class Objective { BinaryLogistic, MulticlassSoftmax };

inline const char* to_string(Objective o) {
  return o == Objective::BinaryLogistic ? "binary-logistic" : "multiclass-softmax";
}

struct Hyperparameters {
  int num_rounds = 100;
  double learning_rate = 0.1;
  int max_leaves = 31;
  int min_samples_per_leaf = 20;
  double min_gain_to_split = 0.0;
  int histogram_bins = 255;
  double lambda_l2 = 1.0;

  void validate() const {
    if (num_rounds < 0) throw ValidationError("num_rounds must be >= 0");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (max_leaves < 1) throw ValidationError("max_leaves must be >= 1");
    if (min_samples_per_leaf < 1) throw ValidationError("min_samples_per_leaf must be >= 1");
    if (!(min_gain_to_split >= 0.0)) throw ValidationError("min_gain_to_split must be >= 0");
    if (histogram_bins < 1 || histogram_bins > 65535) throw ValidationError("histogram_bins must be in [1, 65535]");
    if (!(lambda_l2 > 0.0)) throw ValidationError("lambda_l2 must be > 0");
  }
  bool operator==(const Hyperparameters&) const = default;
};

struct TreeNode {
  bool is_leaf = true;
  std::uint32_t feature = 0;
  double threshold = 0.0;
  bool default_left = true;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double split_gain = 0.0;
  double value = 0.0;  // leaves only

  bool operator==(const TreeNode&) const = default;
};

// Nodes in pre-order; nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  template <typename Lookup>
  double evaluate(Lookup&& value_of) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf) {
      const auto& n = nodes[i];
      const double v = value_of(n.feature);
      const bool go_left = (v == 0.0) ? n.default_left : (v <= n.threshold);
      i = static_cast<std::size_t>(go_left ? n.left : n.right);
    }
    return nodes[i].value;
  }

  bool operator==(const Tree&) const = default;
};

struct GbdtModel {
  Objective objective = Objective::BinaryLogistic;
  std::vector<std::string> class_names;
  // Round-major: trees[round * trees_per_round() + class].
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  // One raw score per tree slot: class-1 log-odds (binary) or log prior per class.
  std::vector<double> base_score;
  std::size_t feature_dim = 0;
  Hyperparameters hyperparameters;
  std::vector<double> feature_gain;  // gain ledger, one entry per feature

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t trees_per_round() const { return objective == Objective::BinaryLogistic ? 1 : class_names.size(); }
  std::size_t num_rounds() const { return trees.empty() ? 0 : trees.size() / trees_per_round(); }

  // Throws ValidationError when the structural invariants do not hold.
  void validate() const {
    const auto k = class_names.size();
    if (k < 2) throw ValidationError("model needs at least two classes");
    if ((objective == Objective::BinaryLogistic) != (k == 2))
      throw ValidationError("binary objective requires exactly two classes, multiclass three or more");
    if (base_score.size() != trees_per_round()) throw ValidationError("base score size mismatch");
    if (trees.size() % trees_per_round() != 0) throw ValidationError("tree count not a multiple of classes");
    if (feature_gain.size() != feature_dim) throw ValidationError("gain ledger size mismatch");
    for (const auto& t : trees) {
      if (t.nodes.empty()) throw ValidationError("empty tree");
      for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const auto& n = t.nodes[i];
        if (n.is_leaf) continue;
        if (n.feature >= feature_dim) throw ValidationError("tree feature index out of range");
        if (n.split_gain < 0.0) throw ValidationError("negative split gain");
        const auto sz = static_cast<std::int32_t>(t.nodes.size());
        if (n.left <= static_cast<std::int32_t>(i) || n.right <= static_cast<std::int32_t>(i) || n.left >= sz ||
            n.right >= sz)
          throw ValidationError("tree child index out of range");
      }
    }
  }

  bool operator==(const GbdtModel&) const = default;
};

namespace detail {

inline double midpoint_between(double a, double b) {
  double t = a + (b - a) / 2.0;
  if (!(t < b) || t < a) t = a;
  return t;
}

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Quantile bin boundaries for one feature's nonzero values.
// bounds[0] lies below every nonzero value; bounds[k] (k >= 1) separates
// bin k from bin k + 1. Nonzero bins are numbered 1..bounds.size().
inline std::vector<double> bin_boundaries(std::vector<double> values, int max_bins) {
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, std::size_t>> distinct;
  for (double v : values) {
    if (!distinct.empty() && distinct.back().first == v)
      ++distinct.back().second;
    else
      distinct.emplace_back(v, 1);
  }
  std::vector<double> bounds;
  const double vmin = distinct.front().first;
  bounds.push_back(vmin > 0.0 ? 0.0 : std::nextafter(vmin, -std::numeric_limits<double>::infinity()));

  const auto max_nonzero_bins = static_cast<std::size_t>(max_bins);
  if (distinct.size() <= max_nonzero_bins) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
      bounds.push_back(midpoint_between(distinct[i].first, distinct[i + 1].first));
    return bounds;
  }
  const double per_bin = static_cast<double>(values.size()) / static_cast<double>(max_nonzero_bins);
  std::size_t seen = 0;
  std::size_t closed = 0;
  for (std::size_t i = 0; i + 1 < distinct.size() && closed + 1 < max_nonzero_bins; ++i) {
    seen += distinct[i].second;
    if (static_cast<double>(seen) >= per_bin * static_cast<double>(closed + 1)) {
      bounds.push_back(midpoint_between(distinct[i].first, distinct[i + 1].first));
      ++closed;
    }
  }
  return bounds;
}

// Training matrix with every nonzero replaced by its histogram bin.
struct BinnedMatrix {
  std::vector<std::vector<double>> bounds;  // per feature
  std::vector<std::size_t> offset;          // histogram slot of each feature's zero bin
  std::size_t total_bins = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> feature;
  std::vector<std::uint32_t> bin;

  BinnedMatrix(const SparseMatrix& x, int max_bins) {
    const auto dim = x.cols();
    std::vector<std::vector<double>> columns(dim);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (const auto& e : x.row(r))
        if (e.value != 0.0) columns[e.index].push_back(e.value);
    bounds.resize(dim);
    offset.resize(dim);
    for (std::size_t f = 0; f < dim; ++f) {
      bounds[f] = bin_boundaries(std::move(columns[f]), max_bins);
      offset[f] = total_bins;
      total_bins += bounds[f].size() + 1;
    }
    row_ptr.push_back(0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (const auto& e : x.row(r)) {
        if (e.value == 0.0) continue;
        feature.push_back(e.index);
        bin.push_back(bin_of(e.index, e.value));
      }
      row_ptr.push_back(feature.size());
    }
  }

  std::uint32_t bin_of(std::uint32_t f, double v) const {
    const auto& b = bounds[f];
    return static_cast<std::uint32_t>(std::lower_bound(b.begin() + 1, b.end(), v) - (b.begin() + 1)) + 1;
  }

  // Bin of feature f in row r; 0 when the entry is absent.
  std::uint32_t lookup(std::size_t r, std::uint32_t f) const {
    const auto first = feature.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
    const auto last = feature.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
    auto it = std::lower_bound(first, last, f);
    if (it == last || *it != f) return 0;
    return bin[static_cast<std::size_t>(it - feature.begin())];
  }
};

struct SplitCandidate {
  bool valid = false;
  double gain = 0.0;
  std::uint32_t feature = 0;
  std::uint32_t last_left_bin = 0;  // nonzero bins 1..last_left_bin go left
  double threshold = 0.0;
  bool default_left = true;
};

struct HistBin {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;
};

class TreeGrower {
 public:
  TreeGrower(const BinnedMatrix& data, const Hyperparameters& hp)
      : data_(data), hp_(hp), hist_(data.total_bins), stamp_(data.bounds.size(), 0) {}

  // Grows one tree on (grad, hess). Adds each row's leaf output to `scores`
  // (stride/offset select the class column) and split gains to `ledger`.
  Tree grow(std::span<const double> grad, std::span<const double> hess, std::span<double> scores, std::size_t stride,
            std::size_t column, std::vector<double>& ledger) {
    grad_ = grad;
    hess_ = hess;
    std::vector<TreeNode> nodes(1);
    std::vector<Leaf> leaves;
    Leaf root;
    root.node = 0;
    root.rows.resize(data_.row_ptr.size() - 1);
    for (std::size_t r = 0; r < root.rows.size(); ++r) root.rows[r] = static_cast<std::uint32_t>(r);
    evaluate(root);
    leaves.push_back(std::move(root));
    std::size_t active = 1;

    while (active < static_cast<std::size_t>(hp_.max_leaves)) {
      std::ptrdiff_t pick = -1;
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (!leaves[i].active || !leaves[i].best.valid) continue;
        if (pick < 0 || leaves[i].best.gain > leaves[static_cast<std::size_t>(pick)].best.gain)
          pick = static_cast<std::ptrdiff_t>(i);
      }
      if (pick < 0) break;
      Leaf& parent = leaves[static_cast<std::size_t>(pick)];
      const SplitCandidate split = parent.best;
      Leaf left, right;
      for (auto r : parent.rows) {
        const auto b = data_.lookup(r, split.feature);
        const bool go_left = (b == 0) ? split.default_left : (b <= split.last_left_bin);
        (go_left ? left.rows : right.rows).push_back(r);
      }
      auto& node = nodes[static_cast<std::size_t>(parent.node)];
      node.is_leaf = false;
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.default_left = split.default_left;
      node.split_gain = split.gain;
      node.left = static_cast<std::int32_t>(nodes.size());
      node.right = static_cast<std::int32_t>(nodes.size() + 1);
      left.node = node.left;
      right.node = node.right;
      nodes.resize(nodes.size() + 2);
      ledger[split.feature] += split.gain;
      parent.active = false;
      parent.rows.clear();
      parent.rows.shrink_to_fit();
      evaluate(left);
      evaluate(right);
      leaves.push_back(std::move(left));
      leaves.push_back(std::move(right));
      ++active;
    }

    for (auto& leaf : leaves) {
      if (!leaf.active) continue;
      double g = 0.0, h = 0.0;
      for (auto r : leaf.rows) {
        g += grad_[r];
        h += hess_[r];
      }
      const double value = -hp_.learning_rate * g / (h + hp_.lambda_l2);
      nodes[static_cast<std::size_t>(leaf.node)].value = value;
      for (auto r : leaf.rows) scores[r * stride + column] += value;
    }
    return Tree{to_preorder(nodes)};
  }

 private:
  struct Leaf {
    std::vector<std::uint32_t> rows;
    std::int32_t node = 0;
    bool active = true;
    SplitCandidate best;
  };

  void evaluate(Leaf& leaf) {
    leaf.best = {};
    const auto min_n = static_cast<std::size_t>(hp_.min_samples_per_leaf);
    if (leaf.rows.size() < 2 * min_n) return;
    ++generation_;
    touched_.clear();
    double total_g = 0.0, total_h = 0.0;
    for (auto r : leaf.rows) {
      const double g = grad_[r], h = hess_[r];
      total_g += g;
      total_h += h;
      for (std::size_t k = data_.row_ptr[r]; k < data_.row_ptr[r + 1]; ++k) {
        const auto f = data_.feature[k];
        if (stamp_[f] != generation_) {
          stamp_[f] = generation_;
          touched_.push_back(f);
          std::fill_n(hist_.begin() + static_cast<std::ptrdiff_t>(data_.offset[f]), data_.bounds[f].size() + 1,
                      HistBin{});
        }
        auto& slot = hist_[data_.offset[f] + data_.bin[k]];
        slot.g += g;
        slot.h += h;
        ++slot.n;
      }
    }
    std::sort(touched_.begin(), touched_.end());

    const double lambda = hp_.lambda_l2;
    const std::size_t total_n = leaf.rows.size();
    const double parent_term = total_g * total_g / (total_h + lambda);
    double best_gain = hp_.min_gain_to_split;

    for (auto f : touched_) {
      const auto* bins = hist_.data() + data_.offset[f];
      const auto& bounds = data_.bounds[f];
      const std::size_t m = bounds.size();
      double nz_g = 0.0, nz_h = 0.0;
      std::size_t nz_n = 0;
      for (std::size_t b = 1; b <= m; ++b) {
        nz_g += bins[b].g;
        nz_h += bins[b].h;
        nz_n += bins[b].n;
      }
      const double zero_g = total_g - nz_g;
      const double zero_h = total_h - nz_h;
      const std::size_t zero_n = total_n - nz_n;

      double cum_g = 0.0, cum_h = 0.0;
      std::size_t cum_n = 0;
      for (std::size_t k = 0; k < m; ++k) {
        if (k > 0) {
          cum_g += bins[k].g;
          cum_h += bins[k].h;
          cum_n += bins[k].n;
        }
        const double threshold = bounds[k];
        for (int dir = 0; dir < 2; ++dir) {
          bool zero_left = (dir == 0);
          if (zero_n == 0) {
            if (dir == 1) break;
            zero_left = 0.0 <= threshold;
          }
          const double gl = zero_left ? cum_g + zero_g : cum_g;
          const double hl = zero_left ? cum_h + zero_h : cum_h;
          const std::size_t nl = zero_left ? cum_n + zero_n : cum_n;
          const std::size_t nr = total_n - nl;
          if (nl < min_n || nr < min_n) continue;
          const double gr = total_g - gl;
          const double hr = total_h - hl;
          const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_term;
          if (gain > best_gain) {
            best_gain = gain;
            leaf.best = {true, gain, f, static_cast<std::uint32_t>(k), threshold, zero_left};
          }
        }
      }
    }
  }

  static std::vector<TreeNode> to_preorder(const std::vector<TreeNode>& nodes) {
    std::vector<TreeNode> out;
    out.reserve(nodes.size());
    auto visit = [&](auto&& self, std::int32_t i) -> std::int32_t {
      const auto pos = static_cast<std::int32_t>(out.size());
      out.push_back(nodes[static_cast<std::size_t>(i)]);
      if (!out.back().is_leaf) {
        const auto l = self(self, nodes[static_cast<std::size_t>(i)].left);
        const auto r = self(self, nodes[static_cast<std::size_t>(i)].right);
        out[static_cast<std::size_t>(pos)].left = l;
        out[static_cast<std::size_t>(pos)].right = r;
      }
      return pos;
    };
    visit(visit, 0);
    return out;
  }

  const BinnedMatrix& data_;
  const Hyperparameters& hp_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  std::vector<HistBin> hist_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
  std::vector<std::uint32_t> touched_;
};

// Mean training log-loss for raw scores laid out row-major with `k` columns.
inline double mean_log_loss(Objective objective, std::span<const double> scores, std::span<const int> y,
                            std::size_t k) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (objective == Objective::BinaryLogistic) {
      const double s = scores[i];
      total += y[i] == 1 ? softplus(-s) : softplus(s);
    } else {
      const double* row = scores.data() + i * k;
      const double mx = *std::max_element(row, row + k);
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += std::exp(row[c] - mx);
      total += mx + std::log(z) - row[static_cast<std::size_t>(y[i])];
    }
  }
  return total / static_cast<double>(y.size());
}

}  // namespace detail

// Called once before the first round (round 0) and after every round with
// the mean training log-loss and the raw training scores (row-major, one
// column per tree slot).
using TrainingObserver = std::function<void(int round, double train_loss, std::span<const double> raw_scores)>;

inline GbdtModel train(const SparseMatrix& x, std::span<const int> y, std::vector<std::string> class_names,
                       const Hyperparameters& hp = {}, const TrainingObserver& observer = {}) {
  hp.validate();
  if (x.rows() != y.size())
    throw ValidationError("row count " + std::to_string(x.rows()) + " does not match label count " +
                          std::to_string(y.size()));
  const std::size_t k = class_names.size();
  if (k < 2) throw TrainingError("need at least two class names");
  std::vector<std::size_t> class_count(k, 0);
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw ValidationError("label index " + std::to_string(label) + " out of range");
    ++class_count[static_cast<std::size_t>(label)];
  }
  if (std::count_if(class_count.begin(), class_count.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw TrainingError("training labels contain a single class");

  GbdtModel model;
  model.objective = k == 2 ? Objective::BinaryLogistic : Objective::MulticlassSoftmax;
  model.class_names = std::move(class_names);
  model.learning_rate = hp.learning_rate;
  model.feature_dim = x.cols();
  model.hyperparameters = hp;
  model.feature_gain.assign(x.cols(), 0.0);

  const std::size_t n = y.size();
  const double total = static_cast<double>(n);
  if (model.objective == Objective::BinaryLogistic) {
    const double p = static_cast<double>(class_count[1]) / total;
    model.base_score = {std::log(p / (1.0 - p))};
  } else {
    for (std::size_t c = 0; c < k; ++c)
      model.base_score.push_back(std::log(std::max(static_cast<double>(class_count[c]) / total, 1e-15)));
  }

  const std::size_t tpr = model.trees_per_round();
  std::vector<double> scores(n * tpr);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < tpr; ++c) scores[i * tpr + c] = model.base_score[c];

  const detail::BinnedMatrix binned(x, hp.histogram_bins);
  detail::TreeGrower grower(binned, hp);
  std::vector<double> grad(n * tpr), hess(n * tpr);
  std::vector<double> g_col(n), h_col(n);

  if (observer) observer(0, detail::mean_log_loss(model.objective, scores, y, tpr), scores);
  for (int round = 1; round <= hp.num_rounds; ++round) {
    if (model.objective == Objective::BinaryLogistic) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-scores[i]));
        grad[i] = p - (y[i] == 1 ? 1.0 : 0.0);
        hess[i] = p * (1.0 - p);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = scores.data() + i * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += std::exp(row[c] - mx);
        for (std::size_t c = 0; c < k; ++c) {
          const double p = std::exp(row[c] - mx) / z;
          grad[i * k + c] = p - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
          hess[i * k + c] = p * (1.0 - p);
        }
      }
    }
    for (std::size_t c = 0; c < tpr; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        g_col[i] = grad[i * tpr + c];
        h_col[i] = hess[i * tpr + c];
      }
      model.trees.push_back(grower.grow(g_col, h_col, scores, tpr, c, model.feature_gain));
    }
    if (observer) observer(round, detail::mean_log_loss(model.objective, scores, y, tpr), scores);
  }
  return model;
}

// Raw (pre-link) scores, one per tree slot.
inline std::vector<double> predict_raw(const GbdtModel& model, std::span<const SparseEntry> x) {
  for (const auto& e : x) {
    if (e.index >= model.feature_dim)
      throw ValidationError("feature index " + std::to_string(e.index) + " exceeds model dimension " +
                            std::to_string(model.feature_dim));
  }
  auto value_of = [&](std::uint32_t f) {
    auto it = std::lower_bound(x.begin(), x.end(), f, [](const SparseEntry& e, std::uint32_t i) { return e.index < i; });
    return (it != x.end() && it->index == f) ? it->value : 0.0;
  };
  const std::size_t tpr = model.trees_per_round();
  std::vector<double> raw = model.base_score;
  for (std::size_t t = 0; t < model.trees.size(); ++t) raw[t % tpr] += model.trees[t].evaluate(value_of);
  return raw;
}

inline std::vector<double> scores_from_raw(Objective objective, std::span<const double> raw) {
  if (objective == Objective::BinaryLogistic) {
    const double p1 = 1.0 / (1.0 + std::exp(-raw[0]));
    return {1.0 - p1, p1};
  }
  const double mx = *std::max_element(raw.begin(), raw.end());
  std::vector<double> p(raw.size());
  double z = 0.0;
  for (std::size_t c = 0; c < raw.size(); ++c) z += (p[c] = std::exp(raw[c] - mx));
  for (auto& v : p) v /= z;
  return p;
}

// Class probabilities in class_names order.
inline std::vector<double> predict_scores(const GbdtModel& model, std::span<const SparseEntry> x) {
  return scores_from_raw(model.objective, predict_raw(model, x));
}
inline std::vector<double> predict_scores(const GbdtModel& model, const SparseVector& x) {
  return predict_scores(model, std::span<const SparseEntry>(x.entries));
}

// Index of the largest probability; the lowest index wins ties.
inline std::size_t argmax(std::span<const double> probabilities) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probabilities.size(); ++i)
    if (probabilities[i] > probabilities[best]) best = i;
  return best;
}

inline std::size_t predict_class_index(const GbdtModel& model, const SparseVector& x) {
  return argmax(predict_scores(model, x));
}

inline const std::string& predict_class(const GbdtModel& model, const SparseVector& x) {
  return model.class_names[predict_class_index(model, x)];
}

struct FeatureGain {
  std::string ngram;
  double gain = 0.0;
  bool operator==(const FeatureGain&) const = default;
};

// Features by total gain, descending (ties: lower index first). Features that
// were never split on are left out.
inline std::vector<FeatureGain> gain_importance(const GbdtModel& model, const FeatureSpace& space,
                                                std::size_t top_k) {
  if (space.size() != model.feature_dim)
    throw ValidationError("feature space has " + std::to_string(space.size()) + " features but model expects " +
                          std::to_string(model.feature_dim));
  std::vector<std::size_t> order;
  for (std::size_t f = 0; f < model.feature_gain.size(); ++f)
    if (model.feature_gain[f] > 0.0) order.push_back(f);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return model.feature_gain[a] > model.feature_gain[b]; });
  if (order.size() > top_k) order.resize(top_k);
  std::vector<FeatureGain> out;
  out.reserve(order.size());
  for (auto f : order) out.push_back({space.terms()[f], model.feature_gain[f]});
  return out;
}

}  // namespace depai

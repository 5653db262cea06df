#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "depai/gbdt.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using depai::GbdtModel;
using depai::Hyperparameters;
using depai::SparseMatrix;
using depai::SparseVector;

namespace {

SparseMatrix column(const std::vector<double>& x) {
  SparseMatrix m(1);
  for (double v : x) {
    SparseVector row;
    if (v != 0.0) row.entries.push_back({0, v});
    m.add_row(row);
  }
  return m;
}

Hyperparameters tiny(int rounds, int leaves) {
  Hyperparameters hp;
  hp.num_rounds = rounds;
  hp.max_leaves = leaves;
  hp.min_samples_per_leaf = 1;
  return hp;
}

SparseVector one(double v) {
  SparseVector s;
  if (v != 0.0) s.entries.push_back({0, v});
  return s;
}

struct Dataset {
  SparseMatrix x;
  std::vector<int> y;
  std::size_t classes;
};

// Sparse rows whose label depends on a few informative features plus noise.
Dataset random_dataset(std::mt19937& rng, std::size_t rows, std::size_t dim, std::size_t classes) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d{SparseMatrix(dim), {}, classes};
  for (std::size_t r = 0; r < rows; ++r) {
    SparseVector v;
    double signal = 0.0;
    for (std::uint32_t f = 0; f < dim; ++f) {
      if (u(rng) < 0.15) {
        const double val = u(rng);
        v.entries.push_back({f, val});
        if (f < 3) signal += val * (f + 1);
      }
    }
    d.x.add_row(v);
    auto label = static_cast<std::size_t>(signal * 1.5 + u(rng)) % classes;
    d.y.push_back(static_cast<int>(label));
  }
  for (std::size_t c = 0; c < classes; ++c) d.y[c] = static_cast<int>(c);  // all classes present
  return d;
}

std::vector<std::string> names(std::size_t k) {
  std::vector<std::string> n;
  for (std::size_t i = 0; i < k; ++i) n.push_back("c" + std::to_string(i));
  return n;
}

}  // namespace

TEST(Train, OneDimensionalSplit) {
  const auto x = column({0, 1, 2, 3});
  const std::vector<int> y{0, 0, 1, 1};
  const auto model = depai::train(x, y, {"a", "b"}, tiny(1, 2));
  ASSERT_EQ(model.trees.size(), 1u);
  const auto& root = model.trees[0].nodes[0];
  ASSERT_FALSE(root.is_leaf);
  EXPECT_EQ(root.feature, 0u);
  EXPECT_GT(root.threshold, 1.0);
  EXPECT_LT(root.threshold, 2.0);
  EXPECT_TRUE(root.default_left);
  // g = (.5,.5,-.5,-.5), h = .25: 1/1.5 + 1/1.5 - 0
  EXPECT_DOUBLE_EQ(root.split_gain, 4.0 / 3.0);
  for (double v : {0.0, 1.0}) EXPECT_EQ(depai::predict_class_index(model, one(v)), 0u);
  for (double v : {2.0, 3.0}) EXPECT_EQ(depai::predict_class_index(model, one(v)), 1u);

  // leaf outputs by hand: -0.1 * (+-1) / (0.5 + 1)
  const auto p0 = depai::predict_scores(model, one(0.0));
  const double raw = -0.1 * 1.0 / 1.5;
  EXPECT_NEAR(p0[1], 1.0 / (1.0 + std::exp(-raw)), 1e-15);
  EXPECT_GT(p0[0], 0.5);
}

TEST(Train, RejectsSingleClass) {
  const auto x = column({0, 1, 2});
  const std::vector<int> y{1, 1, 1};
  EXPECT_THROW(depai::train(x, y, {"a", "b"}, tiny(1, 2)), depai::TrainingError);
}

TEST(Train, RejectsBadShapes) {
  const auto x = column({0, 1, 2});
  EXPECT_THROW(depai::train(x, std::vector<int>{0, 1}, {"a", "b"}), depai::ValidationError);
  EXPECT_THROW(depai::train(x, std::vector<int>{0, 1, 2}, {"a", "b"}), depai::ValidationError);
  EXPECT_THROW(depai::train(x, std::vector<int>{0, 1, 0}, {"a"}), depai::TrainingError);
  Hyperparameters bad;
  bad.max_leaves = 0;
  EXPECT_THROW(depai::train(x, std::vector<int>{0, 1, 0}, {"a", "b"}, bad), depai::ValidationError);
}

TEST(Train, ConstantFeatureEarnsNoGain) {
  SparseMatrix x(2);
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    const bool pos = i % 2;
    SparseVector v;
    if (pos) v.entries.push_back({0, 0.5 + 0.01 * i});
    v.entries.push_back({1, 0.7});
    x.add_row(v);
    y.push_back(pos);
  }
  Hyperparameters hp;
  hp.num_rounds = 20;
  hp.min_samples_per_leaf = 5;
  const auto model = depai::train(x, y, {"a", "b"}, hp);
  EXPECT_GT(model.feature_gain[0], 0.0);
  EXPECT_EQ(model.feature_gain[1], 0.0);
}

TEST(Train, MultiwayUsesOneTreePerClassPerRound) {
  std::mt19937 rng(1);
  auto d = random_dataset(rng, 120, 10, 4);
  Hyperparameters hp;
  hp.num_rounds = 7;
  hp.min_samples_per_leaf = 5;
  const auto model = depai::train(d.x, d.y, names(4), hp);
  EXPECT_EQ(model.objective, depai::Objective::MulticlassSoftmax);
  EXPECT_EQ(model.trees.size(), 28u);
  EXPECT_EQ(model.num_rounds(), 7u);
  EXPECT_NO_THROW(model.validate());
}

TEST(PredictScores, ZeroTreesUniformPrior) {
  GbdtModel m;
  m.objective = depai::Objective::MulticlassSoftmax;
  m.class_names = {"a", "b", "c"};
  m.base_score = {std::log(1.0 / 3), std::log(1.0 / 3), std::log(1.0 / 3)};
  m.feature_dim = 4;
  m.feature_gain.assign(4, 0.0);
  const auto p = depai::predict_scores(m, SparseVector{});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3, 1e-15);
  EXPECT_EQ(depai::predict_class_index(m, SparseVector{}), 0u);
}

TEST(PredictScores, OutOfRangeFeature) {
  GbdtModel m;
  m.class_names = {"a", "b"};
  m.base_score = {0.0};
  m.feature_dim = 2;
  SparseVector v;
  v.entries.push_back({2, 1.0});
  EXPECT_THROW(depai::predict_scores(m, v), depai::ValidationError);
}

TEST(PredictClass, ArgmaxAndTies) {
  EXPECT_EQ(depai::argmax(std::vector<double>{0.2, 0.5, 0.3}), 1u);
  EXPECT_EQ(depai::argmax(std::vector<double>{0.5, 0.5}), 0u);
  GbdtModel m;
  m.class_names = {"human", "ai"};
  m.base_score = {0.0};
  m.feature_dim = 1;
  m.feature_gain = {0.0};
  EXPECT_EQ(depai::predict_class(m, SparseVector{}), "human");
  EXPECT_EQ(depai::predict_class(m, one(3.0)), "human");
}

TEST(GainImportance, OnlySplitFeaturesReported) {
  GbdtModel m;
  m.class_names = {"a", "b"};
  m.base_score = {0.0};
  m.feature_dim = 3;
  m.feature_gain = {0.0, 2.5, 0.0};
  const depai::FeatureSpace space({1, 1}, false, {"amod", "dep", "nsubj"}, {1.0, 1.0, 1.0}, 1);
  const auto top = depai::gain_importance(m, space, 5);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].ngram, "dep");
  EXPECT_EQ(top[0].gain, 2.5);
  EXPECT_TRUE(depai::gain_importance(m, space, 0).empty());
  const depai::FeatureSpace small({1, 1}, false, {"dep"}, {1.0}, 1);
  EXPECT_THROW(depai::gain_importance(m, small, 5), depai::ValidationError);
}

TEST(GainImportance, TiesBreakByIndex) {
  GbdtModel m;
  m.class_names = {"a", "b"};
  m.base_score = {0.0};
  m.feature_dim = 3;
  m.feature_gain = {1.0, 2.0, 2.0};
  const depai::FeatureSpace space({1, 1}, false, {"x", "y", "z"}, {1.0, 1.0, 1.0}, 1);
  const auto top = depai::gain_importance(m, space, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].ngram, "y");
  EXPECT_EQ(top[1].ngram, "z");
}

TEST(GainImportance, PlantedBigramDominates) {
  const auto docs = synth::planted_bigram_corpus(150, 21);
  const auto space = depai::FeatureSpace::fit(docs, {1, 2});
  const auto x = space.transform(docs);
  std::vector<int> y;
  for (const auto& d : docs) y.push_back(d.class_label == "ai" ? 1 : 0);
  const auto model = depai::train(x, y, {"human", "ai"});
  const auto top = depai::gain_importance(model, space, 5);
  ASSERT_FALSE(top.empty());
  EXPECT_EQ(top[0].ngram, "punct dep");
  const double total = std::accumulate(model.feature_gain.begin(), model.feature_gain.end(), 0.0);
  EXPECT_GE(top[0].gain / total, 0.9);
}

TEST(SplitOracle, BalancedLabelsMatchExactly) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 * (1 + rng() % 32);
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng) < 0.3 ? 0.0 : std::round(u(rng) * 20) / 8.0;
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i < n / 2;
    std::shuffle(y.begin(), y.end(), rng);
    const auto expect = oracle::best_first_split(x, y, 1.0, 1);
    const auto model = depai::train(column(x), y, {"a", "b"}, tiny(1, 2));
    const auto& root = model.trees[0].nodes[0];
    ASSERT_EQ(!root.is_leaf, expect.found) << "trial " << trial;
    if (!expect.found) continue;
    EXPECT_EQ(root.threshold, expect.threshold) << "trial " << trial;
    EXPECT_EQ(root.default_left, expect.default_left) << "trial " << trial;
    EXPECT_EQ(root.split_gain, expect.gain) << "trial " << trial;
  }
}

TEST(SplitOracle, UnbalancedLabelsMatchGain) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 63;
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng) < 0.3 ? 0.0 : u(rng);
    std::vector<int> y(n);
    for (auto& v : y) v = u(rng) < 0.3;
    y[0] = 0;
    y[1] = 1;
    const auto expect = oracle::best_first_split(x, y, 1.0, 1);
    const auto model = depai::train(column(x), y, {"a", "b"}, tiny(1, 2));
    const auto& root = model.trees[0].nodes[0];
    ASSERT_EQ(!root.is_leaf, expect.found);
    if (!expect.found) continue;
    // summation order differs between histogram and direct sums
    EXPECT_NEAR(root.split_gain, expect.gain, 1e-12 * std::max(1.0, expect.gain)) << "trial " << trial;
  }
}

TEST(TrainProperties, DeterministicAndLedgerConsistent) {
  std::mt19937 rng(29);
  for (std::size_t k : {2u, 3u}) {
    auto d = random_dataset(rng, 300, 40, k);
    Hyperparameters hp;
    hp.num_rounds = 30;
    hp.min_gain_to_split = 0.01;
    const auto a = depai::train(d.x, d.y, names(k), hp);
    const auto b = depai::train(d.x, d.y, names(k), hp);
    EXPECT_EQ(a, b);
    double from_nodes = 0.0;
    for (const auto& t : a.trees)
      for (const auto& n : t.nodes)
        if (!n.is_leaf) {
          EXPECT_GE(n.split_gain, hp.min_gain_to_split);
          from_nodes += n.split_gain;
        }
    const double ledger = std::accumulate(a.feature_gain.begin(), a.feature_gain.end(), 0.0);
    EXPECT_NEAR(ledger, from_nodes, 1e-9 * std::max(1.0, from_nodes));
    for (std::size_t f = 0; f < a.feature_gain.size(); ++f) EXPECT_GE(a.feature_gain[f], 0.0);
  }
}

TEST(TrainProperties, LossNonIncreasing) {
  std::mt19937 rng(31);
  for (std::size_t k : {2u, 3u, 5u}) {
    auto d = random_dataset(rng, 400, 60, k);
    std::vector<double> losses;
    depai::train(d.x, d.y, names(k), {}, [&](int, double loss, std::span<const double>) { losses.push_back(loss); });
    ASSERT_EQ(losses.size(), 101u);
    for (std::size_t r = 1; r < losses.size(); ++r) EXPECT_LE(losses[r], losses[r - 1]) << "round " << r;
  }
}

TEST(TrainProperties, SeparableReachesFullAccuracy) {
  std::vector<double> x;
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    x.push_back(0.01 * (i + 1));
    y.push_back(i >= 50);
  }
  Hyperparameters hp;
  hp.num_rounds = 10;
  const auto model = depai::train(column(x), y, {"a", "b"}, hp);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_EQ(depai::predict_class_index(model, one(x[i])), static_cast<std::size_t>(y[i]));
}

TEST(TrainProperties, PredictionsReproduceTrainingScores) {
  std::mt19937 rng(37);
  for (std::size_t k : {2u, 4u}) {
    for (int bins : {3, 255}) {
      auto d = random_dataset(rng, 250, 30, k);
      Hyperparameters hp;
      hp.num_rounds = 15;
      hp.histogram_bins = bins;
      hp.min_samples_per_leaf = 3;
      std::vector<double> final_scores;
      const auto model = depai::train(d.x, d.y, names(k), hp, [&](int, double, std::span<const double> s) {
        final_scores.assign(s.begin(), s.end());
      });
      const auto tpr = model.trees_per_round();
      for (std::size_t r = 0; r < d.x.rows(); ++r) {
        const auto raw = depai::predict_raw(model, d.x.row(r));
        for (std::size_t c = 0; c < tpr; ++c) ASSERT_EQ(raw[c], final_scores[r * tpr + c]) << "row " << r;
        const auto p = depai::predict_scores(model, d.x.row(r));
        EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
        for (double v : p) EXPECT_GE(v, 0.0);
      }
    }
  }
}

TEST(Binning, RespectsBinBudget) {
  std::vector<double> values;
  for (int i = 1; i <= 1000; ++i) values.push_back(i * 0.001);
  const auto bounds = depai::detail::bin_boundaries(values, 16);
  EXPECT_LE(bounds.size(), 16u);
  EXPECT_GE(bounds.size(), 8u);
  EXPECT_EQ(bounds[0], 0.0);
  EXPECT_TRUE(std::is_sorted(bounds.begin(), bounds.end()));
  // adjacent doubles still separate
  const double a = 0.5, b = std::nextafter(0.5, 1.0);
  const auto tight = depai::detail::bin_boundaries({a, b}, 255);
  ASSERT_EQ(tight.size(), 2u);
  EXPECT_TRUE(a <= tight[1] && b > tight[1]);
}

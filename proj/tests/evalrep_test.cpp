#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "depai/evalrep.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using depai::ConfusionMatrix;
using depai::evaluate;

namespace {
using Labels = std::vector<std::string>;
}

TEST(Evaluate, PerfectPredictions) {
  const Labels t{"A", "B", "C", "A"};
  const auto r = evaluate(t, t, Labels{"A", "B", "C"});
  EXPECT_EQ(r.precision, 100.0);
  EXPECT_EQ(r.recall, 100.0);
  EXPECT_EQ(r.f1, 100.0);
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_TRUE(r.errors.no_errors);
  EXPECT_EQ(depai::metrics_row(r), "100.00 100.00 100.00 100.00");
}

TEST(Evaluate, WorkedExample) {
  const auto r = evaluate(Labels{"A", "A", "B", "B"}, Labels{"A", "B", "B", "B"}, Labels{"A", "B"});
  // A: P=1 R=.5 F=2/3; B: P=2/3 R=1 F=.8
  EXPECT_NEAR(r.precision, 250.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.recall, 75.0, 1e-12);
  EXPECT_NEAR(r.f1, (200.0 / 3.0 + 80.0) / 2.0, 1e-12);
  EXPECT_NEAR(r.accuracy, 75.0, 1e-12);
  EXPECT_EQ(depai::metrics_row(r), "83.33 75.00 73.33 75.00");
  EXPECT_NEAR(r.micro_f1, 75.0, 1e-12);
}

TEST(Evaluate, AbsentClassContributesZero) {
  const auto r = evaluate(Labels{"A", "B"}, Labels{"A", "B"}, Labels{"A", "B", "C"});
  EXPECT_NEAR(r.precision, 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.f1, 200.0 / 3.0, 1e-12);
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_EQ(r.per_class[2].f1, 0.0);
}

TEST(Evaluate, Errors) {
  EXPECT_THROW(evaluate(Labels{"A"}, Labels{"A", "B"}, Labels{"A", "B"}), depai::ValidationError);
  EXPECT_THROW(evaluate(Labels{"A"}, Labels{"Z"}, Labels{"A", "B"}), depai::ValidationError);
  EXPECT_THROW(evaluate(Labels{}, Labels{}, Labels{"A", "B"}), depai::ValidationError);
}

TEST(ErrorDistribution, ColumnsOfOffDiagonalMass) {
  ConfusionMatrix cm({"A", "B"});
  cm.counts = {{3, 1}, {2, 4}};
  const auto d = depai::error_distribution(cm);
  ASSERT_FALSE(d.no_errors);
  ASSERT_EQ(d.shares.size(), 2u);
  EXPECT_EQ(d.shares[0].first, "A");
  EXPECT_NEAR(d.shares[0].second, 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(d.shares[1].second, 100.0 / 3.0, 1e-12);
}

TEST(ErrorDistribution, NoErrorsMarker) {
  ConfusionMatrix cm({"A", "B", "C"});
  cm.counts = {{3, 0, 0}, {0, 4, 0}, {0, 0, 0}};
  const auto d = depai::error_distribution(cm);
  EXPECT_TRUE(d.no_errors);
  EXPECT_TRUE(d.shares.empty());
}

TEST(ErrorDistribution, ConcentratedColumn) {
  // most mistakes land on one generator
  ConfusionMatrix cm({"human", "chatgpt", "dolly"});
  cm.counts = {{10, 1, 12}, {0, 8, 14}, {0, 0, 9}};
  const auto d = depai::error_distribution(cm);
  EXPECT_NEAR(d.shares[2].second, 100.0 * 26.0 / 27.0, 1e-12);
  EXPECT_EQ(d.shares[0].second, 0.0);
}

TEST(EvaluateProperties, MatchesCountingOracle) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng() % 6;
    const std::size_t n = 1 + rng() % 50;
    Labels classes;
    for (std::size_t c = 0; c < k; ++c) classes.push_back("c" + std::to_string(c));
    Labels t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = classes[rng() % k];
      p[i] = rng() % 3 ? t[i] : classes[rng() % k];
    }
    const auto r = evaluate(t, p, classes);
    const auto o = oracle::metrics(t, p, classes);
    EXPECT_EQ(r.precision, o.precision);
    EXPECT_EQ(r.recall, o.recall);
    EXPECT_EQ(r.f1, o.f1);
    EXPECT_EQ(r.accuracy, o.accuracy);
    EXPECT_EQ(r.confusion.total(), n);

    const double off = 100.0 * static_cast<double>(r.confusion.errors()) / static_cast<double>(n);
    EXPECT_NEAR(r.accuracy, 100.0 - off, 1e-9);
    if (!r.errors.no_errors) {
      double sum = 0;
      for (const auto& [_, pct] : r.errors.shares) sum += pct;
      EXPECT_NEAR(sum, 100.0, 0.01);
    }

    // relabeling permutation leaves macro F1 unchanged
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto relabel = [&](const std::string& s) { return "x" + std::to_string(perm[std::stoul(s.substr(1))]); };
    Labels t2, p2, c2;
    for (const auto& s : t) t2.push_back(relabel(s));
    for (const auto& s : p) p2.push_back(relabel(s));
    for (const auto& s : classes) c2.push_back(relabel(s));
    EXPECT_NEAR(evaluate(t2, p2, c2).f1, r.f1, 1e-9);
  }
}

TEST(RenderReports, TextAndJson) {
  const auto r = evaluate(Labels{"A", "A", "B", "B"}, Labels{"A", "B", "B", "B"}, Labels{"A", "B"});
  const std::vector<depai::FeatureGain> imp{{"dep", 12.5}};
  const auto text = depai::render_text(r, imp);
  EXPECT_NE(text.find("Prec Recall F1 Acc\n83.33 75.00 73.33 75.00"), std::string::npos);
  EXPECT_NE(text.find("1. dep\t12.500000"), std::string::npos);
  EXPECT_NE(text.find("[error-distribution]\nA 0.00%\nB 100.00%"), std::string::npos);

  const auto j = depai::report_to_json(r, imp);
  EXPECT_EQ(j["importance"][0]["ngram"], "dep");
  EXPECT_EQ(j["confusion"]["counts"][0][1], 1);
  EXPECT_EQ(j["error_distribution"]["no_errors"], false);
  EXPECT_TRUE(j.contains("micro"));
}

TEST(RenderReports, EmptyImportanceKeepsHeader) {
  const Labels t{"A", "B"};
  const auto text = depai::render_text(evaluate(t, t, t), {});
  EXPECT_NE(text.find("[importance] top-0 by gain\n"), std::string::npos);
  EXPECT_NE(text.find("no errors"), std::string::npos);
}

TEST(RenderReports, WritesFilesAndReportsIoErrors) {
  const auto dir = synth::fresh_dir("render");
  const Labels t{"A", "B"};
  const auto r = evaluate(t, t, t);
  depai::render_reports(r, {}, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
  std::ofstream(dir / "blocker") << "x";
  EXPECT_THROW(depai::render_reports(r, {}, dir / "blocker" / "sub"), depai::IoError);
}

#pragma once

// Experiment drivers: data splits, train/evaluate orchestration, n-gram
// sweeps and batch prediction.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "depai/bundle.hpp"
#include "depai/config.hpp"
#include "depai/detail/random.hpp"
#include "depai/error.hpp"
#include "depai/evalrep.hpp"
#include "depai/featurize.hpp"
#include "depai/gbdt.hpp"
#include "depai/manifest.hpp"

namespace depai {

struct RecordSplit {
  std::vector<std::size_t> train;  // record indices, manifest order
  std::vector<std::size_t> test;
};

// Test = every record of `held_out`; train = everything else.
inline RecordSplit split_leave_one_domain_out(const DatasetManifest& m, const std::string& held_out) {
  if (!detail::contains(m.domains, held_out)) throw ValidationError("unknown domain '" + held_out + "'");
  RecordSplit s;
  for (std::size_t i = 0; i < m.records.size(); ++i) (m.records[i].domain == held_out ? s.test : s.train).push_back(i);
  if (s.test.empty()) throw ValidationError("held-out domain '" + held_out + "' has no records");
  if (s.train.empty()) throw ValidationError("no training records remain after holding out '" + held_out + "'");
  return s;
}

// Per-class random split. Within a class, records are ordered by doc_id and
// shuffled with a seeded Mersenne Twister; the first round(n * fraction)
// go to test, keeping at least one record of every class in train.
inline RecordSplit split_stratified(const DatasetManifest& m, std::span<const std::size_t> pool,
                                    std::span<const std::string> labels, double test_fraction, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t k = 0; k < pool.size(); ++k) by_class[labels[k]].push_back(pool[k]);
  std::mt19937_64 rng(seed);
  RecordSplit s;
  for (auto& [label, members] : by_class) {
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return m.records[a].doc_id < m.records[b].doc_id; });
    detail::shuffle(members, rng);
    auto n_test = static_cast<std::size_t>(static_cast<double>(members.size()) * test_fraction + 0.5);
    if (n_test >= members.size()) n_test = members.size() - 1;
    s.test.insert(s.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.insert(s.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  if (s.test.empty()) throw ValidationError("stratified split produced an empty test set");
  return s;
}

// Maps manifest classes onto the classes the model is trained on.
struct LabelScheme {
  std::vector<std::string> class_names;
  std::string human;
  std::string machine;
  bool collapse = false;

  std::string map(const std::string& cls) const {
    if (!collapse) return cls;
    return cls == human ? human : machine;
  }
  std::size_t index(const std::string& mapped) const {
    return static_cast<std::size_t>(std::find(class_names.begin(), class_names.end(), mapped) - class_names.begin());
  }
};

// Split, label scheme and descriptor for one experiment.
struct ExperimentPlan {
  RecordSplit split;
  LabelScheme labels;
  SplitDescriptor descriptor;
};

inline ExperimentPlan plan_experiment(const ExperimentConfig& config, const DatasetManifest& m) {
  config.validate();
  const bool language_mode =
      config.task == Task::Multilingual || (config.task == Task::NgramSweep && !config.language.empty());

  ExperimentPlan plan;
  plan.descriptor.task = to_string(config.task);
  plan.descriptor.seed = config.seed;
  if (language_mode) {
    if (m.classes.size() == 2) {
      plan.labels.class_names = m.classes;
    } else {
      if (!detail::contains(m.classes, config.human_label))
        throw ValidationError("binary detection needs the human class '" + config.human_label +
                              "' to be declared in the manifest");
      if (detail::contains(m.classes, config.machine_label))
        throw ValidationError("machine label '" + config.machine_label + "' collides with a declared class");
      plan.labels = {{config.human_label, config.machine_label}, config.human_label, config.machine_label, true};
    }
  } else {
    plan.labels.class_names = m.classes;
  }

  const std::string pct = format_fixed(100.0 * (1.0 - config.test_fraction), 0) + "/" +
                          format_fixed(100.0 * config.test_fraction, 0);
  auto stratified = [&](std::vector<std::size_t> pool) {
    std::vector<std::string> labels;
    for (auto i : pool) labels.push_back(plan.labels.map(m.records[i].class_label));
    plan.split = split_stratified(m, pool, labels, config.test_fraction, config.seed);
    plan.descriptor.protocol =
        "stratified " + pct + " random split by class, seed " + std::to_string(config.seed);
  };

  if (language_mode) {
    std::vector<std::size_t> pool;
    if (config.language == kPooled && !detail::contains(m.languages, kPooled)) {
      for (std::size_t i = 0; i < m.records.size(); ++i) pool.push_back(i);
      plan.descriptor.train_groups = m.languages;
    } else {
      if (!detail::contains(m.languages, config.language))
        throw ValidationError("unknown language '" + config.language + "'");
      for (std::size_t i = 0; i < m.records.size(); ++i)
        if (m.records[i].language == config.language) pool.push_back(i);
      if (pool.empty()) throw ValidationError("language '" + config.language + "' has no records");
      plan.descriptor.train_groups = {config.language};
    }
    plan.descriptor.test_group = config.language;
    stratified(std::move(pool));
  } else if (config.held_out_domain.empty() ||
             (config.held_out_domain == kPooled && !detail::contains(m.domains, kPooled))) {
    std::vector<std::size_t> pool(m.records.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    plan.descriptor.train_groups = m.domains;
    plan.descriptor.test_group = kPooled;
    stratified(std::move(pool));
  } else {
    plan.split = split_leave_one_domain_out(m, config.held_out_domain);
    for (const auto& d : m.domains)
      if (d != config.held_out_domain) plan.descriptor.train_groups.push_back(d);
    plan.descriptor.test_group = config.held_out_domain;
    plan.descriptor.protocol = "leave-one-domain-out";
  }

  std::set<std::string> present;
  for (auto i : plan.split.train) present.insert(plan.labels.map(m.records[i].class_label));
  if (present.size() < 2)
    throw TrainingError("training split contains " + std::to_string(present.size()) +
                        " class(es); at least two are required");
  return plan;
}

struct Prediction {
  std::string doc_id;
  std::size_t class_index = 0;
  std::string class_name;
  std::vector<double> probabilities;
};

inline Prediction predict_document(const ModelBundle& bundle, const DepDocument& doc) {
  const auto x = bundle.space.transform(doc);
  auto probs = predict_scores(bundle.model, x);
  const auto best = argmax(probs);
  return {doc.doc_id, best, bundle.model.class_names[best], std::move(probs)};
}

inline std::vector<Prediction> predict_documents(const ModelBundle& bundle, std::span<const DepDocument> docs) {
  std::vector<Prediction> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(predict_document(bundle, d));
  return out;
}

struct ExperimentResult {
  EvaluationReport report;
  std::vector<FeatureGain> importance;
  ModelBundle bundle;
};

inline EvaluationReport evaluate_documents(const ModelBundle& bundle, const ExperimentPlan& plan,
                                           std::span<const DepDocument> test_docs) {
  std::vector<std::string> truth, predicted;
  for (const auto& d : test_docs) {
    truth.push_back(plan.labels.map(d.class_label));
    predicted.push_back(predict_document(bundle, d).class_name);
  }
  auto report = evaluate(truth, predicted, bundle.model.class_names);
  report.split = plan.descriptor;
  return report;
}

namespace detail {

inline ExperimentResult train_and_evaluate(const ExperimentConfig& config, const ExperimentPlan& plan,
                                           std::span<const DepDocument> train_docs,
                                           std::span<const DepDocument> test_docs, NgramRange range) {
  ModelBundle bundle;
  bundle.config = config;
  bundle.config.ngram = range;
  bundle.config.out_dir.clear();
  bundle.space = FeatureSpace::fit(train_docs, range, config.cross_sentences);
  const auto x = bundle.space.transform(train_docs);
  std::vector<int> y;
  y.reserve(train_docs.size());
  for (const auto& d : train_docs) y.push_back(static_cast<int>(plan.labels.index(plan.labels.map(d.class_label))));
  bundle.model = train(x, y, plan.labels.class_names, config.gbdt);
  bundle.train_fingerprint = fingerprint(train_docs);

  ExperimentResult result;
  result.report = evaluate_documents(bundle, plan, test_docs);
  result.importance = gain_importance(bundle.model, bundle.space, config.top_k);
  result.bundle = std::move(bundle);
  return result;
}

inline void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
  save_bundle(r.bundle, dir / "bundle.depai");
  render_reports(r.report, r.importance, dir, "report");
}

}  // namespace detail

// Split -> fit -> train -> predict -> evaluate. Writes bundle.depai,
// report.txt and report.json into config.out_dir when it is set.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetManifest& m) {
  if (config.task == Task::NgramSweep) throw ValidationError("use run_sweep for the ngram-sweep task");
  const auto plan = plan_experiment(config, m);
  const auto train_docs = load_documents(m, plan.split.train);
  const auto test_docs = load_documents(m, plan.split.test);
  auto result = detail::train_and_evaluate(config, plan, train_docs, test_docs, config.ngram);
  if (!config.out_dir.empty()) detail::write_outputs(result, config.out_dir);
  return result;
}

// Re-runs a bundle on the test split its config describes. Refuses when the
// manifest no longer yields the training set the bundle was fitted on.
inline ExperimentResult evaluate_bundle(const ModelBundle& bundle, const DatasetManifest& m) {
  auto config = bundle.config;
  const auto plan = plan_experiment(config, m);
  const auto train_docs = load_documents(m, plan.split.train);
  if (fingerprint(train_docs) != bundle.train_fingerprint)
    throw ValidationError("manifest does not reproduce the bundle's training set (fingerprint mismatch)");
  const auto test_docs = load_documents(m, plan.split.test);
  ExperimentResult r;
  r.report = evaluate_documents(bundle, plan, test_docs);
  r.importance = gain_importance(bundle.model, bundle.space, config.top_k);
  r.bundle = bundle;
  return r;
}

struct SweepRow {
  NgramRange range;
  ExperimentResult result;
};

inline std::string render_sweep_text(std::span<const SweepRow> rows) {
  std::ostringstream out;
  if (!rows.empty()) {
    const auto& d = rows.front().result.report.split;
    out << "# task: ngram-sweep\n# test: " << d.test_group << "\n# protocol: " << d.protocol << "\n# seed: " << d.seed
        << "\n\n";
  }
  out << "range Prec Recall F1 Acc\n";
  for (const auto& r : rows)
    out << "(" << r.range.min_n << "," << r.range.max_n << ") " << metrics_row(r.result.report) << '\n';
  return out.str();
}

inline nlohmann::ordered_json sweep_to_json(std::span<const SweepRow> rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"ngram_min", r.range.min_n},
                 {"ngram_max", r.range.max_n},
                 {"report", report_to_json(r.result.report, r.result.importance)}});
  }
  return j;
}

// One experiment per (ngram.min_n, max_n) in config.sweep_max_n, same split
// throughout. Writes sweep.txt / sweep.json plus one subdirectory per range.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const DatasetManifest& m) {
  const auto plan = plan_experiment(config, m);
  const auto train_docs = load_documents(m, plan.split.train);
  const auto test_docs = load_documents(m, plan.split.test);
  std::vector<SweepRow> rows;
  for (int hi : config.sweep_max_n) {
    const NgramRange range(config.ngram.min_n, hi);
    rows.push_back({range, detail::train_and_evaluate(config, plan, train_docs, test_docs, range)});
  }
  if (!config.out_dir.empty()) {
    for (const auto& r : rows)
      detail::write_outputs(r.result, config.out_dir / ("ngram_" + std::to_string(r.range.min_n) + "_" +
                                                        std::to_string(r.range.max_n)));
    write_text_file(config.out_dir / "sweep.txt", render_sweep_text(rows));
    write_text_file(config.out_dir / "sweep.json", sweep_to_json(rows).dump(2) + "\n");
  }
  return rows;
}

}  // namespace depai

// depai: command-line front end for dependency-label AI-text detection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "depai/depai.hpp"

namespace fs = std::filesystem;

namespace {

struct ExperimentFlags {
  std::string manifest;
  std::string config;
  std::string task;
  std::string held_out_domain;
  std::string language;
  int ngram_min = 0;
  int ngram_max = 0;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t top_k = 0;
  bool cross_sentences = false;
  int num_rounds = 0;
  int max_leaves = 0;
  int min_samples_per_leaf = 0;
  double learning_rate = 0.0;

  std::map<std::string, CLI::Option*> opts;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f, bool with_task) {
  f.opts["manifest"] = cmd->add_option("--manifest", f.manifest, "Dataset manifest (JSON lines)");
  f.opts["config"] = cmd->add_option("--config", f.config, "JSON config file; flags override its values");
  if (with_task)
    f.opts["task"] = cmd->add_option("--task", f.task, "multiway-loco | multilingual");
  f.opts["held_out_domain"] =
      cmd->add_option("--held-out-domain", f.held_out_domain, "Domain excluded from training ('all' = pooled split)");
  f.opts["language"] = cmd->add_option("--language", f.language, "Target language ('all' = every language)");
  f.opts["ngram_min"] = cmd->add_option("--ngram-min", f.ngram_min, "Smallest n-gram length");
  f.opts["ngram_max"] = cmd->add_option("--ngram-max", f.ngram_max, "Largest n-gram length");
  f.opts["out_dir"] = cmd->add_option("--out-dir", f.out_dir, "Output directory for bundle and reports");
  f.opts["seed"] = cmd->add_option("--seed", f.seed, "Seed for random splits (default 42)");
  f.opts["top_k"] = cmd->add_option("--top-k", f.top_k, "Features in the importance report (default 5)");
  f.opts["cross_sentences"] = cmd->add_flag("--cross-sentences", f.cross_sentences, "Let n-grams span sentences");
  f.opts["num_rounds"] = cmd->add_option("--num-rounds", f.num_rounds, "Boosting rounds (default 100)");
  f.opts["max_leaves"] = cmd->add_option("--max-leaves", f.max_leaves, "Leaves per tree (default 31)");
  f.opts["min_samples_per_leaf"] =
      cmd->add_option("--min-samples-per-leaf", f.min_samples_per_leaf, "Minimum rows per leaf (default 20)");
  f.opts["learning_rate"] = cmd->add_option("--learning-rate", f.learning_rate, "Shrinkage (default 0.1)");
}

bool given(const ExperimentFlags& f, const std::string& name) {
  auto it = f.opts.find(name);
  return it != f.opts.end() && it->second->count() > 0;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw depai::ValidationError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw depai::ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

// Config file first, then explicit flags on top.
std::pair<depai::ExperimentConfig, std::string> resolve(const ExperimentFlags& f) {
  depai::ExperimentConfig c;
  std::string manifest;
  if (given(f, "config")) {
    const auto j = read_json_file(f.config);
    depai::merge_json(c, j);
    if (j.contains("manifest")) {
      manifest = j["manifest"].get<std::string>();
      if (fs::path(manifest).is_relative()) manifest = (fs::path(f.config).parent_path() / manifest).string();
    }
  }
  if (given(f, "manifest")) manifest = f.manifest;
  if (given(f, "task")) c.task = depai::parse_task(f.task);
  if (given(f, "held_out_domain")) c.held_out_domain = f.held_out_domain;
  if (given(f, "language")) c.language = f.language;
  const int lo = given(f, "ngram_min") ? f.ngram_min : c.ngram.min_n;
  const int hi = given(f, "ngram_max") ? f.ngram_max : c.ngram.max_n;
  c.ngram = depai::NgramRange(lo, hi);
  if (given(f, "out_dir")) c.out_dir = f.out_dir;
  if (given(f, "seed")) c.seed = f.seed;
  if (given(f, "top_k")) c.top_k = f.top_k;
  if (given(f, "cross_sentences")) c.cross_sentences = f.cross_sentences;
  if (given(f, "num_rounds")) c.gbdt.num_rounds = f.num_rounds;
  if (given(f, "max_leaves")) c.gbdt.max_leaves = f.max_leaves;
  if (given(f, "min_samples_per_leaf")) c.gbdt.min_samples_per_leaf = f.min_samples_per_leaf;
  if (given(f, "learning_rate")) c.gbdt.learning_rate = f.learning_rate;
  if (manifest.empty()) throw depai::ValidationError("--manifest is required (flag or config key)");
  return {c, manifest};
}

void print_prediction(std::ostream& out, const depai::Prediction& p, const std::vector<std::string>& names) {
  out << p.doc_id << '\t' << p.class_name;
  for (std::size_t i = 0; i < names.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", p.probabilities[i]);
    out << '\t' << names[i] << '=' << buf;
  }
  out << '\n';
}

int cmd_ingest_check(const std::string& manifest_path) {
  const auto m = depai::load_manifest(manifest_path);
  std::map<std::string, std::size_t> by_class, by_domain, by_language;
  std::size_t sentences = 0, labels = 0;
  for (const auto& r : m.records) {
    const auto doc = depai::load_document(r);
    ++by_class[r.class_label];
    ++by_domain[r.domain];
    ++by_language[r.language];
    sentences += doc.sentences.size();
    for (const auto& s : doc.sentences) labels += s.size();
  }
  std::cout << "documents " << m.records.size() << "\nsentences " << sentences << "\nlabels " << labels << '\n';
  auto dump = [](const char* title, const std::vector<std::string>& declared,
                 std::map<std::string, std::size_t>& counts) {
    std::cout << title << '\n';
    for (const auto& k : declared) std::cout << "  " << k << ' ' << counts[k] << '\n';
  };
  dump("classes", m.classes, by_class);
  dump("domains", m.domains, by_domain);
  dump("languages", m.languages, by_language);
  std::cout << "ok\n";
  return 0;
}

int cmd_train(const ExperimentFlags& f) {
  auto [config, manifest_path] = resolve(f);
  if (config.task == depai::Task::NgramSweep) throw depai::ValidationError("use the 'sweep' subcommand for ngram-sweep");
  if (config.out_dir.empty()) throw depai::ValidationError("--out-dir is required");
  const auto m = depai::load_manifest(manifest_path);
  const auto r = depai::run_experiment(config, m);
  std::cout << "Prec Recall F1 Acc\n" << depai::metrics_row(r.report) << '\n';
  std::cout << "bundle " << (config.out_dir / "bundle.depai").string() << '\n';
  return 0;
}

int cmd_sweep(const ExperimentFlags& f) {
  auto [config, manifest_path] = resolve(f);
  config.task = depai::Task::NgramSweep;
  const auto m = depai::load_manifest(manifest_path);
  const auto rows = depai::run_sweep(config, m);
  std::cout << depai::render_sweep_text(rows);
  return 0;
}

int cmd_predict(const std::string& bundle_path, const std::string& input, const std::string& manifest_path,
                const std::string& output) {
  const auto bundle = depai::load_bundle(bundle_path);
  std::vector<depai::DepDocument> docs;
  if (!manifest_path.empty()) {
    const auto m = depai::load_manifest(manifest_path);
    for (const auto& r : m.records) docs.push_back(depai::load_document(r));
  } else {
    std::vector<depai::ConlluSentence> sentences;
    std::string default_id = "stdin";
    if (input.empty() || input == "-") {
      sentences = depai::parse_conllu(std::cin);
    } else {
      std::ifstream in(input, std::ios::binary);
      if (!in) throw depai::IoError("cannot open '" + input + "'");
      default_id = fs::path(input).stem().string();
      sentences = depai::parse_conllu(in);
    }
    for (auto& d : depai::split_documents(std::move(sentences), default_id))
      docs.push_back(depai::extract_dep_document(d.sentences, d.doc_id, "", "", ""));
  }
  std::ofstream file;
  if (!output.empty()) {
    file.open(output, std::ios::binary | std::ios::trunc);
    if (!file) throw depai::IoError("cannot open '" + output + "' for writing");
  }
  std::ostream& out = output.empty() ? std::cout : file;
  for (const auto& p : depai::predict_documents(bundle, docs)) print_prediction(out, p, bundle.model.class_names);
  return 0;
}

int cmd_evaluate(const std::string& bundle_path, const std::string& manifest_path, const std::string& out_dir) {
  const auto bundle = depai::load_bundle(bundle_path);
  const auto m = depai::load_manifest(manifest_path);
  const auto r = depai::evaluate_bundle(bundle, m);
  if (!out_dir.empty()) depai::render_reports(r.report, r.importance, out_dir, "report");
  std::cout << "Prec Recall F1 Acc\n" << depai::metrics_row(r.report) << '\n';
  return 0;
}

int cmd_importance(const std::string& bundle_path, std::optional<std::size_t> top_k, bool json) {
  const auto bundle = depai::load_bundle(bundle_path);
  const auto list = depai::gain_importance(bundle.model, bundle.space, top_k.value_or(bundle.config.top_k));
  if (json) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& f : list) j.push_back({{"ngram", f.ngram}, {"gain", f.gain}});
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "[importance] top-" << list.size() << " by gain\n";
    for (std::size_t i = 0; i < list.size(); ++i)
      std::cout << (i + 1) << ". " << list[i].ngram << '\t' << depai::format_fixed(list[i].gain, 6) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dependency-relation n-gram detector for AI-generated text"};
  app.require_subcommand(1);

  std::string manifest_only;
  auto* ingest = app.add_subcommand("ingest-check", "Validate a manifest and parse every referenced CoNLL-U file");
  ingest->add_option("--manifest", manifest_only, "Dataset manifest")->required();

  ExperimentFlags train_flags;
  auto* train = app.add_subcommand("train", "Train on a split, evaluate on its test side, write bundle + report");
  add_experiment_flags(train, train_flags, true);

  ExperimentFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Accuracy across n-gram ranges (1,1), (1,2), (1,3)");
  add_experiment_flags(sweep, sweep_flags, false);

  std::string bundle_path, input, predict_manifest, output;
  auto* predict = app.add_subcommand("predict", "Classify CoNLL-U documents with a trained bundle");
  predict->add_option("--bundle", bundle_path, "Model bundle")->required();
  auto* in_opt = predict->add_option("--input", input, "CoNLL-U file ('-' for stdin); '# newdoc' splits documents");
  auto* man_opt = predict->add_option("--manifest", predict_manifest, "Predict every record of a manifest instead");
  in_opt->excludes(man_opt);
  predict->add_option("--output", output, "Write predictions here instead of stdout");

  std::string eval_bundle, eval_manifest, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Re-evaluate a bundle on the test split recorded in it");
  evaluate->add_option("--bundle", eval_bundle, "Model bundle")->required();
  evaluate->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
  evaluate->add_option("--out-dir", eval_out, "Write report.txt/report.json here");

  std::string imp_bundle;
  std::optional<std::size_t> imp_top_k;
  bool imp_json = false;
  auto* importance = app.add_subcommand("importance", "Top features of a bundle by total split gain");
  importance->add_option("--bundle", imp_bundle, "Model bundle")->required();
  importance->add_option("--top-k", imp_top_k, "Number of features (default from bundle config)");
  importance->add_flag("--json", imp_json, "Emit JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest_check(manifest_only);
    if (*train) return cmd_train(train_flags);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*predict) return cmd_predict(bundle_path, input, predict_manifest, output);
    if (*evaluate) return cmd_evaluate(eval_bundle, eval_manifest, eval_out);
    if (*importance) return cmd_importance(imp_bundle, imp_top_k, imp_json);
  } catch (const depai::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "depai/error.hpp"
#include "depai/featurize.hpp"
#include "depai/gbdt.hpp"

namespace depai {

enum class Task { MultiwayLoco, Multilingual, NgramSweep };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::MultiwayLoco:
      return "multiway-loco";
    case Task::Multilingual:
      return "multilingual";
    case Task::NgramSweep:
      return "ngram-sweep";
  }
  return "?";
}

inline Task parse_task(const std::string& s) {
  if (s == "multiway-loco") return Task::MultiwayLoco;
  if (s == "multilingual") return Task::Multilingual;
  if (s == "ngram-sweep") return Task::NgramSweep;
  throw ValidationError("unknown task '" + s + "' (expected multiway-loco, multilingual or ngram-sweep)");
}

// Held-out domain / target language value that selects the pooled
// configuration: stratified random split over every record.
inline constexpr const char* kPooled = "all";

struct ExperimentConfig {
  Task task = Task::MultiwayLoco;
  NgramRange ngram{1, 2};
  Hyperparameters gbdt;
  std::string held_out_domain;
  std::string language;
  bool cross_sentences = false;
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  // Binary tasks collapse every other class into `machine_label`.
  std::string human_label = "human";
  std::string machine_label = "machine";
  std::size_t top_k = 5;
  std::vector<int> sweep_max_n{1, 2, 3};
  std::filesystem::path out_dir;  // not part of the snapshot

  void validate() const {
    gbdt.validate();
    if (task == Task::MultiwayLoco && held_out_domain.empty())
      throw ValidationError("multiway-loco requires a held-out domain (use '" + std::string(kPooled) +
                            "' for the pooled split)");
    if (task != Task::MultiwayLoco && task != Task::NgramSweep && !held_out_domain.empty())
      throw ValidationError("a held-out domain is only valid for multiway-loco or ngram-sweep");
    if (task == Task::Multilingual && language.empty())
      throw ValidationError("multilingual requires a target language (use '" + std::string(kPooled) +
                            "' for all languages)");
    if (task == Task::MultiwayLoco && !language.empty())
      throw ValidationError("a target language is not valid for multiway-loco");
    if (task == Task::NgramSweep && !held_out_domain.empty() && !language.empty())
      throw ValidationError("ngram-sweep takes a held-out domain or a language, not both");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must be in (0, 1)");
    if (human_label.empty() || machine_label.empty() || human_label == machine_label)
      throw ValidationError("human_label and machine_label must be distinct and non-empty");
    if (task == Task::NgramSweep) {
      if (sweep_max_n.empty()) throw ValidationError("sweep_max_n must not be empty");
      for (int hi : sweep_max_n) NgramRange(ngram.min_n, hi);
    }
  }
};

inline nlohmann::ordered_json to_json(const Hyperparameters& hp) {
  return {{"num_rounds", hp.num_rounds},
          {"learning_rate", hp.learning_rate},
          {"max_leaves", hp.max_leaves},
          {"min_samples_per_leaf", hp.min_samples_per_leaf},
          {"min_gain_to_split", hp.min_gain_to_split},
          {"histogram_bins", hp.histogram_bins},
          {"lambda_l2", hp.lambda_l2}};
}

inline void merge_json(Hyperparameters& hp, const nlohmann::json& j) {
  for (const auto& [key, v] : j.items()) {
    if (key == "num_rounds")
      hp.num_rounds = v.get<int>();
    else if (key == "learning_rate")
      hp.learning_rate = v.get<double>();
    else if (key == "max_leaves")
      hp.max_leaves = v.get<int>();
    else if (key == "min_samples_per_leaf")
      hp.min_samples_per_leaf = v.get<int>();
    else if (key == "min_gain_to_split")
      hp.min_gain_to_split = v.get<double>();
    else if (key == "histogram_bins")
      hp.histogram_bins = v.get<int>();
    else if (key == "lambda_l2")
      hp.lambda_l2 = v.get<double>();
    else
      throw ValidationError("unknown gbdt option '" + key + "'");
  }
}

// Snapshot stored in bundles. Omits out_dir.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  return {{"task", to_string(c.task)},
          {"ngram_min", c.ngram.min_n},
          {"ngram_max", c.ngram.max_n},
          {"held_out_domain", c.held_out_domain},
          {"language", c.language},
          {"cross_sentences", c.cross_sentences},
          {"seed", c.seed},
          {"test_fraction", c.test_fraction},
          {"human_label", c.human_label},
          {"machine_label", c.machine_label},
          {"top_k", c.top_k},
          {"sweep_max_n", c.sweep_max_n},
          {"gbdt", to_json(c.gbdt)}};
}

// Overlays the keys present in `j` onto `c`. Unknown keys are rejected.
inline void merge_json(ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  int lo = c.ngram.min_n, hi = c.ngram.max_n;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "task")
        c.task = parse_task(v.get<std::string>());
      else if (key == "ngram_min")
        lo = v.get<int>();
      else if (key == "ngram_max")
        hi = v.get<int>();
      else if (key == "held_out_domain")
        c.held_out_domain = v.get<std::string>();
      else if (key == "language")
        c.language = v.get<std::string>();
      else if (key == "cross_sentences")
        c.cross_sentences = v.get<bool>();
      else if (key == "seed")
        c.seed = v.get<std::uint64_t>();
      else if (key == "test_fraction")
        c.test_fraction = v.get<double>();
      else if (key == "human_label")
        c.human_label = v.get<std::string>();
      else if (key == "machine_label")
        c.machine_label = v.get<std::string>();
      else if (key == "top_k")
        c.top_k = v.get<std::size_t>();
      else if (key == "sweep_max_n")
        c.sweep_max_n = v.get<std::vector<int>>();
      else if (key == "gbdt")
        merge_json(c.gbdt, v);
      else if (key == "out_dir")
        c.out_dir = v.get<std::string>();
      else if (key == "manifest")
        continue;  // consumed by the CLI
      else
        throw ValidationError("unknown config option '" + key + "'");
    }
  } catch (const nlohmann::json::type_error& e) {
    throw ValidationError(std::string("config value has the wrong type: ") + e.what());
  }
  c.ngram = NgramRange(lo, hi);
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  merge_json(c, j);
  return c;
}

}  // namespace depai

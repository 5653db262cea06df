#pragma once

// Model bundle persistence.
//
// File layout: one header line, then the JSON payload.
//
//   {"format":"depai-bundle","version":1,"payload_bytes":N,"checksum":"fnv1a64:<hex>"}\n
//   <payload: N bytes of JSON>
//
// The payload holds the config snapshot, feature space, model and the
// training-set fingerprint. Doubles are written in shortest round-trip form,
// so load(save(b)) predicts bit-identically.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "depai/config.hpp"
#include "depai/detail/hash.hpp"
#include "depai/error.hpp"
#include "depai/featurize.hpp"
#include "depai/gbdt.hpp"

namespace depai {

inline constexpr int kBundleVersion = 1;
inline constexpr const char* kBundleFormat = "depai-bundle";

struct ModelBundle {
  int format_version = kBundleVersion;
  FeatureSpace space;
  GbdtModel model;
  ExperimentConfig config;
  std::string train_fingerprint;
};

// Content hash over the training documents, independent of their order.
inline std::string fingerprint(std::span<const DepDocument> docs) {
  std::vector<const DepDocument*> sorted;
  for (const auto& d : docs) sorted.push_back(&d);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->doc_id < b->doc_id; });
  detail::Fnv1a64 h;
  for (const auto* d : sorted) {
    h.field(d->doc_id);
    h.field(d->class_label);
    h.field(d->domain);
    h.field(d->language);
    h.field(std::to_string(d->sentences.size()));
    for (const auto& s : d->sentences) {
      h.field(std::to_string(s.size()));
      for (const auto& label : s) h.field(label);
    }
  }
  return "fnv1a64:" + h.hex();
}

inline nlohmann::ordered_json to_json(const FeatureSpace& s) {
  return {{"ngram_min", s.range().min_n},
          {"ngram_max", s.range().max_n},
          {"cross_sentences", s.cross_sentences()},
          {"num_train_docs", s.num_train_docs()},
          {"vocabulary", s.terms()},
          {"idf", s.idf()}};
}

inline FeatureSpace feature_space_from_json(const nlohmann::json& j) {
  return FeatureSpace(NgramRange(j.at("ngram_min").get<int>(), j.at("ngram_max").get<int>()),
                      j.at("cross_sentences").get<bool>(), j.at("vocabulary").get<std::vector<std::string>>(),
                      j.at("idf").get<std::vector<double>>(), j.at("num_train_docs").get<std::size_t>());
}

inline nlohmann::ordered_json to_json(const Tree& t) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const auto& n : t.nodes) {
    if (n.is_leaf) {
      nodes.push_back({{"type", "leaf"}, {"value", n.value}});
    } else {
      nodes.push_back({{"type", "split"},
                       {"feature", n.feature},
                       {"threshold", n.threshold},
                       {"default", n.default_left ? "left" : "right"},
                       {"gain", n.split_gain},
                       {"left", n.left},
                       {"right", n.right}});
    }
  }
  return nodes;
}

inline Tree tree_from_json(const nlohmann::json& j) {
  Tree t;
  for (const auto& n : j) {
    TreeNode node;
    const auto type = n.at("type").get<std::string>();
    if (type == "leaf") {
      node.is_leaf = true;
      node.value = n.at("value").get<double>();
    } else if (type == "split") {
      node.is_leaf = false;
      node.feature = n.at("feature").get<std::uint32_t>();
      node.threshold = n.at("threshold").get<double>();
      const auto dir = n.at("default").get<std::string>();
      if (dir != "left" && dir != "right") throw BundleError("bad default direction '" + dir + "'");
      node.default_left = dir == "left";
      node.split_gain = n.at("gain").get<double>();
      node.left = n.at("left").get<std::int32_t>();
      node.right = n.at("right").get<std::int32_t>();
    } else {
      throw BundleError("unknown tree node type '" + type + "'");
    }
    t.nodes.push_back(node);
  }
  return t;
}

inline nlohmann::ordered_json to_json(const GbdtModel& m) {
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& t : m.trees) trees.push_back(to_json(t));
  return {{"objective", to_string(m.objective)},
          {"class_names", m.class_names},
          {"learning_rate", m.learning_rate},
          {"base_score", m.base_score},
          {"feature_dim", m.feature_dim},
          {"hyperparameters", to_json(m.hyperparameters)},
          {"trees", trees},
          {"feature_gain", m.feature_gain}};
}

inline GbdtModel model_from_json(const nlohmann::json& j) {
  GbdtModel m;
  const auto objective = j.at("objective").get<std::string>();
  if (objective == "binary-logistic")
    m.objective = Objective::BinaryLogistic;
  else if (objective == "multiclass-softmax")
    m.objective = Objective::MulticlassSoftmax;
  else
    throw BundleError("unknown objective '" + objective + "'");
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.base_score = j.at("base_score").get<std::vector<double>>();
  m.feature_dim = j.at("feature_dim").get<std::size_t>();
  merge_json(m.hyperparameters, j.at("hyperparameters"));
  for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
  m.feature_gain = j.at("feature_gain").get<std::vector<double>>();
  return m;
}

inline std::string serialize_bundle(const ModelBundle& b) {
  nlohmann::ordered_json payload;
  payload["config"] = to_json(b.config);
  payload["train_fingerprint"] = b.train_fingerprint;
  payload["feature_space"] = to_json(b.space);
  payload["model"] = to_json(b.model);
  const std::string body = payload.dump();
  nlohmann::ordered_json header{{"format", kBundleFormat},
                                {"version", b.format_version},
                                {"payload_bytes", body.size()},
                                {"checksum", "fnv1a64:" + detail::fnv1a64_hex(body)}};
  return header.dump() + "\n" + body;
}

inline ModelBundle deserialize_bundle(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw BundleError("checksum failure: bundle header is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception&) {
    throw BundleError("bundle header is not valid JSON");
  }
  if (!header.is_object() || header.value("format", "") != kBundleFormat) throw BundleError("not a depai bundle");
  const int version = header.value("version", 0);
  if (version > kBundleVersion)
    throw BundleError("bundle format version " + std::to_string(version) + " is newer than supported version " +
                      std::to_string(kBundleVersion));
  if (version != kBundleVersion) throw BundleError("unsupported bundle format version " + std::to_string(version));

  const auto body = bytes.substr(nl + 1);
  if (body.size() != header.value("payload_bytes", std::size_t{0}))
    throw BundleError("checksum failure: payload is " + std::to_string(body.size()) + " bytes, header declares " +
                      std::to_string(header.value("payload_bytes", std::size_t{0})) + " (truncated file?)");
  if ("fnv1a64:" + detail::fnv1a64_hex(body) != header.value("checksum", ""))
    throw BundleError("checksum failure: payload does not match header checksum");

  try {
    const auto payload = nlohmann::json::parse(body);
    ModelBundle b;
    b.format_version = version;
    b.config = config_from_json(payload.at("config"));
    b.train_fingerprint = payload.at("train_fingerprint").get<std::string>();
    b.space = feature_space_from_json(payload.at("feature_space"));
    b.model = model_from_json(payload.at("model"));
    b.model.validate();
    if (b.space.size() != b.model.feature_dim)
      throw BundleError("feature space size " + std::to_string(b.space.size()) + " does not match model dimension " +
                        std::to_string(b.model.feature_dim));
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw BundleError(std::string("corrupt bundle payload: ") + e.what());
  } catch (const ValidationError& e) {
    throw BundleError(std::string("inconsistent bundle: ") + e.what());
  }
}

inline void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << serialize_bundle(b);
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move bundle into place at '" + path.string() + "': " + ec.message());
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle '" + path.string() + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_bundle(bytes);
}

}  // namespace depai

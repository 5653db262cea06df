#pragma once

// Line-delimited JSON dataset manifest.
//
//   {"manifest": "depai", "version": 1, "classes": [...], "domains": [...], "languages": [...]}
//   {"doc_id": "d1", "conllu": "parsed/d1.conllu", "class": "human", "domain": "arxiv", "language": "english"}
//   {"doc_id": "d2", "conllu_inline": "1\tA\t...", "class": "gpt-4", ...}
//
// The first non-blank line is the header. Relative CoNLL-U paths resolve
// against the manifest's directory.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "depai/conllu.hpp"
#include "depai/error.hpp"

namespace depai {

struct ManifestRecord {
  std::string doc_id;
  std::filesystem::path conllu_path;  // empty when inline
  std::string conllu_inline;
  bool is_inline = false;
  std::string class_label;
  std::string domain;
  std::string language;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::vector<std::string> classes;
  std::vector<std::string> domains;
  std::vector<std::string> languages;
  nlohmann::json provenance;
};

inline constexpr int kManifestVersion = 1;

namespace detail {

inline std::string required_string(const nlohmann::json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty())
    throw ValidationError(where + ": missing or empty string field '" + key + "'");
  return it->get<std::string>();
}

inline std::vector<std::string> required_list(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->empty())
    throw ValidationError(std::string("manifest header: '") + key + "' must be a non-empty array");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw ValidationError(std::string("manifest header: '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  std::set<std::string> uniq(out.begin(), out.end());
  if (uniq.size() != out.size()) throw ValidationError(std::string("manifest header: duplicate entry in '") + key + "'");
  return out;
}

inline bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace detail

inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                      bool check_files = true) {
  DatasetManifest m;
  bool have_header = false;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");

    if (!have_header) {
      if (j.value("manifest", "") != "depai") throw ValidationError(where + ": first line must be the manifest header");
      const int version = j.value("version", 0);
      if (version != kManifestVersion)
        throw ValidationError(where + ": unsupported manifest version " + std::to_string(version));
      m.classes = detail::required_list(j, "classes");
      m.domains = detail::required_list(j, "domains");
      m.languages = detail::required_list(j, "languages");
      if (m.classes.size() < 2) throw ValidationError("manifest header: at least two classes are required");
      if (auto it = j.find("provenance"); it != j.end()) m.provenance = *it;
      have_header = true;
      continue;
    }

    ManifestRecord r;
    r.doc_id = detail::required_string(j, "doc_id", where);
    const std::string rec = "record '" + r.doc_id + "' (" + where + ")";
    if (!seen.insert(r.doc_id).second) throw ValidationError(rec + ": duplicate doc_id");
    r.class_label = detail::required_string(j, "class", rec);
    r.domain = detail::required_string(j, "domain", rec);
    r.language = detail::required_string(j, "language", rec);
    if (!detail::contains(m.classes, r.class_label))
      throw ValidationError(rec + ": class '" + r.class_label + "' not declared in header");
    if (!detail::contains(m.domains, r.domain))
      throw ValidationError(rec + ": domain '" + r.domain + "' not declared in header");
    if (!detail::contains(m.languages, r.language))
      throw ValidationError(rec + ": language '" + r.language + "' not declared in header");

    const bool has_path = j.contains("conllu");
    const bool has_inline = j.contains("conllu_inline");
    if (has_path == has_inline) throw ValidationError(rec + ": exactly one of 'conllu' or 'conllu_inline' is required");
    if (has_inline) {
      if (!j["conllu_inline"].is_string()) throw ValidationError(rec + ": 'conllu_inline' must be a string");
      r.is_inline = true;
      r.conllu_inline = j["conllu_inline"].get<std::string>();
    } else {
      std::filesystem::path p = detail::required_string(j, "conllu", rec);
      if (p.is_relative()) p = base_dir / p;
      if (check_files && !std::filesystem::is_regular_file(p))
        throw ValidationError(rec + ": CoNLL-U file '" + p.string() + "' does not exist");
      r.conllu_path = std::move(p);
    }
    m.records.push_back(std::move(r));
  }
  if (!have_header) throw ValidationError("manifest is empty (no header line)");
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.parent_path());
}

inline std::string describe(const ManifestRecord& r) {
  return "document '" + r.doc_id + "'" + (r.is_inline ? std::string(" (inline)") : " (" + r.conllu_path.string() + ")");
}

// Parses the record's CoNLL-U and reduces it to labels. Parse errors are
// re-thrown with the document id and file prefixed.
inline DepDocument load_document(const ManifestRecord& r) {
  std::vector<ConlluSentence> sentences;
  try {
    if (r.is_inline) {
      sentences = parse_conllu(std::string_view(r.conllu_inline));
    } else {
      std::ifstream in(r.conllu_path, std::ios::binary);
      if (!in) throw IoError("cannot open '" + r.conllu_path.string() + "'");
      sentences = parse_conllu(in);
    }
  } catch (const EncodingError& e) {
    throw EncodingError(describe(r), e);
  } catch (const ParseError& e) {
    throw ParseError(describe(r), e);
  }
  return extract_dep_document(sentences, r.doc_id, r.class_label, r.domain, r.language);
}

inline std::vector<DepDocument> load_documents(const DatasetManifest& m, std::span<const std::size_t> which) {
  std::vector<DepDocument> docs;
  docs.reserve(which.size());
  for (auto i : which) docs.push_back(load_document(m.records.at(i)));
  return docs;
}

}  // namespace depai

#pragma once

// CoNLL-U ingestion. Only the DEPREL column survives; forms, lemmas, tags,
// heads and enhanced dependencies are read past and discarded.

#include <cctype>
#include <charconv>
#include <cstddef>
#include <istream>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depai/detail/utf8.hpp"
#include "depai/error.hpp"

namespace depai {

struct ConlluToken {
  int id = 0;
  std::string deprel;

  bool operator==(const ConlluToken&) const = default;
};

struct ConlluSentence {
  std::vector<ConlluToken> tokens;
  std::vector<std::string> metadata;  // full comment lines, '#' included

  bool operator==(const ConlluSentence&) const = default;
};

// One text reduced to its dependency-label sequences, one per sentence.
struct DepDocument {
  std::string doc_id;
  std::vector<std::vector<std::string>> sentences;
  std::string class_label;
  std::string domain;
  std::string language;

  bool operator==(const DepDocument&) const = default;
};

inline constexpr std::size_t kConlluColumns = 10;
inline constexpr std::size_t kDeprelColumn = 7;  // 0-based

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline bool is_blank(std::string_view line) {
  for (char c : line)
    if (c != ' ' && c != '\t') return false;
  return true;
}

}  // namespace detail

// Parses CoNLL-U text. Multiword-token ranges ("1-2") and empty nodes ("3.1")
// are skipped; DEPREL is kept verbatim.
inline std::vector<ConlluSentence> parse_conllu(std::string_view text) {
  std::vector<ConlluSentence> out;
  ConlluSentence current;
  bool open = false;

  auto flush = [&] {
    if (open) out.push_back(std::move(current));
    current = {};
    open = false;
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!detail::is_valid_utf8(line)) throw EncodingError(line_no, "input is not valid UTF-8");
    if (detail::is_blank(line)) {
      flush();
      continue;
    }
    open = true;
    if (line.front() == '#') {
      current.metadata.emplace_back(line);
      continue;
    }

    const auto cols = detail::split_tabs(line);
    if (cols.size() != kConlluColumns) {
      throw ParseError(line_no, "expected " + std::to_string(kConlluColumns) + " tab-separated columns, found " +
                                    std::to_string(cols.size()));
    }
    const std::string_view id_field = cols[0];
    if (id_field.find('-') != std::string_view::npos || id_field.find('.') != std::string_view::npos) continue;

    int id = 0;
    const auto [end, ec] = std::from_chars(id_field.data(), id_field.data() + id_field.size(), id);
    if (ec != std::errc{} || end != id_field.data() + id_field.size() || id < 1) {
      throw ParseError(line_no, "invalid token id '" + std::string(id_field) + "'");
    }
    const int expected_min = current.tokens.empty() ? 1 : current.tokens.back().id + 1;
    if (current.tokens.empty() ? id != 1 : id < expected_min) {
      throw ParseError(line_no, "token id " + std::to_string(id) + " out of sequence");
    }
    const std::string_view deprel = cols[kDeprelColumn];
    if (deprel.empty()) throw ParseError(line_no, "empty DEPREL column");
    for (char c : deprel)
      if (std::isspace(static_cast<unsigned char>(c))) throw ParseError(line_no, "whitespace inside DEPREL");
    current.tokens.push_back({id, std::string(deprel)});
  }
  flush();
  return out;
}

inline std::vector<ConlluSentence> parse_conllu(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("failed reading CoNLL-U stream");
  return parse_conllu(std::string_view(text));
}

// ASCII lowercase; subtype colons ("det:poss") are left alone.
inline std::string normalize_deprel(std::string_view deprel) {
  std::string s(deprel);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline DepDocument extract_dep_document(std::span<const ConlluSentence> sentences, std::string doc_id,
                                        std::string class_label, std::string domain, std::string language) {
  DepDocument doc{std::move(doc_id), {}, std::move(class_label), std::move(domain), std::move(language)};
  doc.sentences.reserve(sentences.size());
  for (const auto& sentence : sentences) {
    std::vector<std::string> labels;
    labels.reserve(sentence.tokens.size());
    for (const auto& tok : sentence.tokens) {
      if (tok.deprel == "_") continue;
      labels.push_back(normalize_deprel(tok.deprel));
    }
    doc.sentences.push_back(std::move(labels));
  }
  return doc;
}

// Writes the retained (id, deprel) pairs back out as CoNLL-U, every other
// column set to "_".
inline void write_conllu(std::ostream& out, std::span<const ConlluSentence> sentences) {
  for (const auto& sentence : sentences) {
    for (const auto& m : sentence.metadata) out << m << '\n';
    for (const auto& tok : sentence.tokens) {
      out << tok.id << "\t_\t_\t_\t_\t_\t_\t" << tok.deprel << "\t_\t_\n";
    }
    out << '\n';
  }
}

// A CoNLL-U stream may hold several documents separated by "# newdoc" comments.
struct ConlluDocument {
  std::string doc_id;
  std::vector<ConlluSentence> sentences;
};

inline std::string newdoc_id(const ConlluSentence& sentence, bool& found) {
  found = false;
  for (const auto& m : sentence.metadata) {
    std::string_view v(m);
    v.remove_prefix(1);
    while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
    if (!v.starts_with("newdoc")) continue;
    found = true;
    v.remove_prefix(6);
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) return {};
    v.remove_prefix(eq + 1);
    while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
    while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
    return std::string(v);
  }
  return {};
}

// Groups sentences into documents. Sentences before the first "# newdoc"
// (or all of them, when there is none) belong to `default_id`. An input with
// no sentences still yields one empty document.
inline std::vector<ConlluDocument> split_documents(std::vector<ConlluSentence> sentences,
                                                   const std::string& default_id) {
  std::vector<ConlluDocument> docs;
  for (auto& sentence : sentences) {
    bool starts = false;
    auto id = newdoc_id(sentence, starts);
    if (starts || docs.empty()) {
      if (!starts || id.empty()) id = starts ? default_id + "#" + std::to_string(docs.size() + 1) : default_id;
      docs.push_back({std::move(id), {}});
    }
    docs.back().sentences.push_back(std::move(sentence));
  }
  if (docs.empty()) docs.push_back({default_id, {}});
  return docs;
}

}  // namespace depai

#pragma once

// TF-IDF over dependency-label n-grams.
//
// Weighting: raw counts, smoothed idf = ln((1 + N) / (1 + df)) + 1, rows
// L2-normalized. The vocabulary is every n-gram seen in the training corpus,
// sorted lexicographically, so feature indices are reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "depai/conllu.hpp"
#include "depai/error.hpp"

namespace depai {

struct NgramRange {
  int min_n = 1;
  int max_n = 2;

  NgramRange() = default;
  NgramRange(int lo, int hi) : min_n(lo), max_n(hi) {
    if (lo < 1 || lo > hi || hi > 4) {
      throw ValidationError("ngram range must satisfy 1 <= min <= max <= 4, got (" + std::to_string(lo) +
                                  "," + std::to_string(hi) + ")");
    }
  }
  bool operator==(const NgramRange&) const = default;
};

struct SparseEntry {
  std::uint32_t index = 0;
  double value = 0.0;
  bool operator==(const SparseEntry&) const = default;
};

// Entries strictly increasing by index.
struct SparseVector {
  std::vector<SparseEntry> entries;

  double at(std::uint32_t index) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), index,
                               [](const SparseEntry& e, std::uint32_t i) { return e.index < i; });
    return (it != entries.end() && it->index == index) ? it->value : 0.0;
  }
  bool empty() const { return entries.empty(); }
  bool operator==(const SparseVector&) const = default;
};

// Compressed sparse rows.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(std::size_t cols) : cols_(cols) {}

  void add_row(const SparseVector& row) {
    for (const auto& e : row.entries) {
      if (e.index >= cols_) throw std::out_of_range("sparse row index exceeds matrix width");
    }
    entries_.insert(entries_.end(), row.entries.begin(), row.entries.end());
    row_ptr_.push_back(entries_.size());
  }

  std::size_t rows() const { return row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }

  std::span<const SparseEntry> row(std::size_t r) const {
    return {entries_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  SparseVector row_vector(std::size_t r) const {
    auto s = row(r);
    return SparseVector{{s.begin(), s.end()}};
  }

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<SparseEntry> entries_;
};

using NgramCounts = std::map<std::string, std::size_t>;

// Counts label n-grams. Windows stay inside one sentence unless
// `cross_sentences` is set, in which case the document is treated as a
// single concatenated sequence.
inline NgramCounts count_ngrams(const DepDocument& doc, NgramRange range, bool cross_sentences = false) {
  NgramCounts counts;
  auto count_sequence = [&](const std::vector<std::string>& seq) {
    for (int n = range.min_n; n <= range.max_n; ++n) {
      const auto width = static_cast<std::size_t>(n);
      if (seq.size() < width) break;
      for (std::size_t i = 0; i + width <= seq.size(); ++i) {
        std::string key = seq[i];
        for (std::size_t k = 1; k < width; ++k) {
          key += ' ';
          key += seq[i + k];
        }
        ++counts[key];
      }
    }
  };
  if (cross_sentences) {
    std::vector<std::string> joined;
    for (const auto& s : doc.sentences) joined.insert(joined.end(), s.begin(), s.end());
    count_sequence(joined);
  } else {
    for (const auto& s : doc.sentences) count_sequence(s);
  }
  return counts;
}

class FeatureSpace {
 public:
  FeatureSpace() = default;

  // Rebuilds a space from stored parts (bundle loading).
  FeatureSpace(NgramRange range, bool cross_sentences, std::vector<std::string> terms, std::vector<double> idf,
               std::size_t num_train_docs)
      : range_(range),
        cross_sentences_(cross_sentences),
        terms_(std::move(terms)),
        idf_(std::move(idf)),
        num_train_docs_(num_train_docs) {
    if (terms_.size() != idf_.size()) throw ValidationError("feature space: vocabulary/idf size mismatch");
    if (!std::is_sorted(terms_.begin(), terms_.end()) ||
        std::adjacent_find(terms_.begin(), terms_.end()) != terms_.end()) {
      throw ValidationError("feature space: vocabulary must be strictly sorted");
    }
    for (double w : idf_)
      if (!(w > 0.0)) throw ValidationError("feature space: idf weights must be positive");
  }

  static FeatureSpace fit(std::span<const DepDocument> corpus, NgramRange range, bool cross_sentences = false) {
    if (corpus.empty()) throw ValidationError("cannot fit a feature space on an empty corpus");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
      for (const auto& [term, _] : count_ngrams(doc, range, cross_sentences)) ++df[term];
    }
    FeatureSpace space;
    space.range_ = range;
    space.cross_sentences_ = cross_sentences;
    space.num_train_docs_ = corpus.size();
    space.terms_.reserve(df.size());
    space.idf_.reserve(df.size());
    const double n = static_cast<double>(corpus.size());
    for (const auto& [term, d] : df) {
      space.terms_.push_back(term);
      space.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(d))) + 1.0);
    }
    return space;
  }

  SparseVector transform(const DepDocument& doc) const {
    SparseVector v;
    for (const auto& [term, count] : count_ngrams(doc, range_, cross_sentences_)) {
      const auto idx = index_of(term);
      if (idx < 0) continue;
      v.entries.push_back({static_cast<std::uint32_t>(idx), static_cast<double>(count) * idf_[idx]});
    }
    // map iteration is lexicographic, which is vocabulary order
    double sq = 0.0;
    for (const auto& e : v.entries) sq += e.value * e.value;
    if (sq > 0.0) {
      const double norm = std::sqrt(sq);
      for (auto& e : v.entries) e.value /= norm;
    }
    return v;
  }

  SparseMatrix transform(std::span<const DepDocument> docs) const {
    SparseMatrix m(size());
    for (const auto& d : docs) m.add_row(transform(d));
    return m;
  }

  // -1 when absent.
  std::ptrdiff_t index_of(const std::string& term) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
    if (it == terms_.end() || *it != term) return -1;
    return it - terms_.begin();
  }

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  NgramRange range() const { return range_; }
  bool cross_sentences() const { return cross_sentences_; }
  std::size_t num_train_docs() const { return num_train_docs_; }

  bool operator==(const FeatureSpace&) const = default;

 private:
  NgramRange range_{};
  bool cross_sentences_ = false;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::size_t num_train_docs_ = 0;
};

}  // namespace depai

#pragma once

// Classification metrics and report rendering.
//
// Precision, recall and F1 are macro averages over the declared classes; a
// zero denominator makes the affected per-class metric 0. All reported
// values are percentages.

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "depai/error.hpp"
#include "depai/gbdt.hpp"

namespace depai {

struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]

  explicit ConfusionMatrix(std::vector<std::string> names = {})
      : class_names(std::move(names)), counts(class_names.size(), std::vector<std::size_t>(class_names.size(), 0)) {}

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
      for (auto c : row) t += c;
    return t;
  }
  std::size_t correct() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
  }
  std::size_t errors() const { return total() - correct(); }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool operator==(const ClassMetrics&) const = default;
};

struct ErrorDistribution {
  bool no_errors = true;
  std::vector<std::pair<std::string, double>> shares;  // predicted class -> % of all errors
  bool operator==(const ErrorDistribution&) const = default;
};

// Which data an evaluation was run on.
struct SplitDescriptor {
  std::string task;
  std::vector<std::string> train_groups;
  std::string test_group;
  std::string protocol;
  std::uint64_t seed = 42;
  bool operator==(const SplitDescriptor&) const = default;
};

struct EvaluationReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;
  ErrorDistribution errors;
  SplitDescriptor split;
  bool operator==(const EvaluationReport&) const = default;
};

inline ErrorDistribution error_distribution(const ConfusionMatrix& confusion) {
  ErrorDistribution dist;
  const std::size_t k = confusion.class_names.size();
  std::vector<std::size_t> column(k, 0);
  std::size_t total = 0;
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p)
      if (t != p) {
        column[p] += confusion.counts[t][p];
        total += confusion.counts[t][p];
      }
  if (total == 0) return dist;
  dist.no_errors = false;
  for (std::size_t p = 0; p < k; ++p)
    dist.shares.emplace_back(confusion.class_names[p],
                             100.0 * static_cast<double>(column[p]) / static_cast<double>(total));
  return dist;
}

inline EvaluationReport evaluate(std::span<const std::string> truth, std::span<const std::string> predicted,
                                 std::span<const std::string> class_names) {
  if (truth.size() != predicted.size())
    throw ValidationError("truth has " + std::to_string(truth.size()) + " labels but predictions have " +
                          std::to_string(predicted.size()));
  if (truth.empty()) throw ValidationError("cannot evaluate an empty label list");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < class_names.size(); ++i) index.emplace(class_names[i], i);
  auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) throw ValidationError("unknown label '" + label + "'");
    return it->second;
  };

  EvaluationReport report;
  report.confusion = ConfusionMatrix({class_names.begin(), class_names.end()});
  for (std::size_t i = 0; i < truth.size(); ++i) ++report.confusion.counts[lookup(truth[i])][lookup(predicted[i])];

  const auto& cm = report.confusion.counts;
  const std::size_t k = class_names.size();
  std::size_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = cm[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm[o][c];
      fn += cm[c][o];
    }
    ClassMetrics m{class_names[c], 0.0, 0.0, 0.0, tp + fn};
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    p_sum += m.precision;
    r_sum += m.recall;
    f_sum += m.f1;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
    m.precision *= 100.0;
    m.recall *= 100.0;
    m.f1 *= 100.0;
    report.per_class.push_back(std::move(m));
  }
  const double kd = static_cast<double>(k);
  report.precision = 100.0 * p_sum / kd;
  report.recall = 100.0 * r_sum / kd;
  report.f1 = 100.0 * f_sum / kd;
  report.accuracy = 100.0 * static_cast<double>(report.confusion.correct()) / static_cast<double>(truth.size());
  const double mp = tp_sum + fp_sum > 0 ? static_cast<double>(tp_sum) / static_cast<double>(tp_sum + fp_sum) : 0.0;
  const double mr = tp_sum + fn_sum > 0 ? static_cast<double>(tp_sum) / static_cast<double>(tp_sum + fn_sum) : 0.0;
  report.micro_precision = 100.0 * mp;
  report.micro_recall = 100.0 * mr;
  report.micro_f1 = mp + mr > 0.0 ? 100.0 * 2.0 * mp * mr / (mp + mr) : 0.0;
  report.errors = error_distribution(report.confusion);
  return report;
}

inline std::string format_fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// "Prec Recall F1 Acc" row at two decimals.
inline std::string metrics_row(const EvaluationReport& r) {
  return format_fixed(r.precision) + " " + format_fixed(r.recall) + " " + format_fixed(r.f1) + " " +
         format_fixed(r.accuracy);
}

inline std::string render_text(const EvaluationReport& r, std::span<const FeatureGain> importance) {
  std::ostringstream out;
  out << "# task: " << r.split.task << '\n';
  out << "# train: ";
  for (std::size_t i = 0; i < r.split.train_groups.size(); ++i) out << (i ? "," : "") << r.split.train_groups[i];
  out << '\n';
  out << "# test: " << r.split.test_group << '\n';
  out << "# protocol: " << r.split.protocol << '\n';
  out << "# seed: " << r.split.seed << '\n';
  out << "\n[metrics]\nPrec Recall F1 Acc\n" << metrics_row(r) << '\n';

  out << "\n[per-class]\nclass Prec Recall F1 Support\n";
  for (const auto& c : r.per_class)
    out << c.name << ' ' << format_fixed(c.precision) << ' ' << format_fixed(c.recall) << ' ' << format_fixed(c.f1)
        << ' ' << c.support << '\n';

  out << "\n[confusion] rows=true cols=predicted\n";
  for (const auto& n : r.confusion.class_names) out << '\t' << n;
  out << '\n';
  for (std::size_t i = 0; i < r.confusion.counts.size(); ++i) {
    out << r.confusion.class_names[i];
    for (auto c : r.confusion.counts[i]) out << '\t' << c;
    out << '\n';
  }

  out << "\n[error-distribution]\n";
  if (r.errors.no_errors) {
    out << "no errors\n";
  } else {
    for (const auto& [name, pct] : r.errors.shares) out << name << ' ' << format_fixed(pct) << "%\n";
  }

  out << "\n[importance] top-" << importance.size() << " by gain\n";
  for (std::size_t i = 0; i < importance.size(); ++i)
    out << (i + 1) << ". " << importance[i].ngram << '\t' << format_fixed(importance[i].gain, 6) << '\n';
  return out.str();
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& r, std::span<const FeatureGain> importance) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["split"] = {{"task", r.split.task},
                {"train", r.split.train_groups},
                {"test", r.split.test_group},
                {"protocol", r.split.protocol},
                {"seed", r.split.seed}};
  j["metrics"] = {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}, {"accuracy", r.accuracy}};
  j["micro"] = {{"precision", r.micro_precision}, {"recall", r.micro_recall}, {"f1", r.micro_f1}};
  ordered_json per_class = ordered_json::array();
  for (const auto& c : r.per_class)
    per_class.push_back(
        {{"class", c.name}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
  j["per_class"] = per_class;
  j["confusion"] = {{"classes", r.confusion.class_names}, {"counts", r.confusion.counts}};
  ordered_json dist = ordered_json::object();
  for (const auto& [name, pct] : r.errors.shares) dist[name] = pct;
  j["error_distribution"] = {{"no_errors", r.errors.no_errors}, {"shares", dist}};
  ordered_json imp = ordered_json::array();
  for (const auto& f : importance) imp.push_back({{"ngram", f.ngram}, {"gain", f.gain}});
  j["importance"] = imp;
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// Writes <dir>/<stem>.txt and <dir>/<stem>.json.
inline void render_reports(const EvaluationReport& report, std::span<const FeatureGain> importance,
                           const std::filesystem::path& dir, const std::string& stem = "report") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  write_text_file(dir / (stem + ".txt"), render_text(report, importance));
  write_text_file(dir / (stem + ".json"), report_to_json(report, importance).dump(2) + "\n");
}

}  // namespace depai

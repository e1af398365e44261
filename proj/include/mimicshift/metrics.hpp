#pragma once

// Confusion accounting and the derived rate metrics, with attack as the
// positive class: a rejected attack request is a true positive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mimicshift/filter.hpp"
#include "mimicshift/traffic.hpp"

namespace mimicshift {

struct Confusion {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
};

inline Confusion confusion(const std::vector<FilterDecision>& decisions,
                           const std::vector<Label>& labels) {
  if (decisions.size() != labels.size())
    throw std::invalid_argument("confusion: decisions/labels length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool rejected = decisions[i].verdict == Verdict::reject;
    const bool attack = labels[decisions[i].request_index] == Label::attack;
    if (attack && rejected) ++c.tp;
    else if (attack && !rejected) ++c.fn;
    else if (!attack && rejected) ++c.fp;
    else ++c.tn;
  }
  return c;
}

struct MetricsRow {
  std::optional<double> fnr, fpr, acc, precision, recall, f1;
  std::string dataset, model;
  std::string interval;  // e.g. "1", "inf", "rand"
};

inline MetricsRow compute_metrics(const Confusion& c) {
  MetricsRow m;
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.fnr = ratio(c.fn, c.fn + c.tp);
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.acc = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
    m.f1 = 2.0 * (*m.precision * *m.recall) / (*m.precision + *m.recall);
  return m;
}

// ---------------------------------------------------------------------------
// rate curves

enum class CurveAxis { acceptance_fnr, rejection_fpr };

struct RateCurve {
  CurveAxis axis = CurveAxis::acceptance_fnr;
  std::vector<std::pair<double, std::optional<double>>> points;  // (ratio, rate)
};

// For each ratio r in 0..1 step 0.05: acceptance axis accepts the top r
// fraction (rejecting floor((1-r)*n) lowest) and records FNR; rejection axis
// rejects the bottom floor(r*n) and records FPR. Thresholding follows
// decide() semantics exactly.
inline RateCurve rate_curve(const std::vector<double>& scores, const std::vector<Label>& labels,
                            CurveAxis axis) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("rate_curve: scores/labels length mismatch");
  RateCurve curve;
  curve.axis = axis;
  for (int step = 0; step <= 20; ++step) {
    const double r = static_cast<double>(step) * 0.05;
    const double reject_rate = axis == CurveAxis::acceptance_fnr ? 1.0 - r : r;
    auto decisions = decide(scores, std::min(1.0, std::max(0.0, reject_rate)));
    Confusion c = confusion(decisions, labels);
    MetricsRow m = compute_metrics(c);
    curve.points.emplace_back(r, axis == CurveAxis::acceptance_fnr ? m.fnr : m.fpr);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// report emission

inline constexpr int kReportSchemaVersion = 1;

namespace metrics_detail {

inline std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace metrics_detail

inline void emit_report_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_report: cannot open " + path + " for writing");
  out << "# schema_version=" << kReportSchemaVersion << '\n';
  out << "dataset,model,interval,fnr,fpr,acc,precision,recall,f1\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.model << ',' << r.interval << ','
        << metrics_detail::fmt(r.fnr) << ',' << metrics_detail::fmt(r.fpr) << ','
        << metrics_detail::fmt(r.acc) << ',' << metrics_detail::fmt(r.precision) << ','
        << metrics_detail::fmt(r.recall) << ',' << metrics_detail::fmt(r.f1) << '\n';
  }
  if (!out) throw std::runtime_error("emit_report: write failed for " + path);
}

inline void emit_report_json(const std::vector<MetricsRow>& rows, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["rows"] = nlohmann::ordered_json::array();
  auto put = [](nlohmann::ordered_json& j, const char* key, const std::optional<double>& v) {
    if (v)
      j[key] = *v;
    else
      j[key] = nullptr;
  };
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["dataset"] = r.dataset;
    j["model"] = r.model;
    j["interval"] = r.interval;
    put(j, "fnr", r.fnr);
    put(j, "fpr", r.fpr);
    put(j, "acc", r.acc);
    put(j, "precision", r.precision);
    put(j, "recall", r.recall);
    put(j, "f1", r.f1);
    doc["rows"].push_back(j);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_report: cannot open " + path + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("emit_report: write failed for " + path);
}

inline void emit_curve_csv(const RateCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_curve: cannot open " + path + " for writing");
  out << "# schema_version=" << kReportSchemaVersion << '\n';
  out << (curve.axis == CurveAxis::acceptance_fnr ? "acceptance_ratio,fnr"
                                                  : "rejection_ratio,fpr")
      << '\n';
  for (const auto& [ratio, rate] : curve.points) {
    std::ostringstream rv;
    rv.precision(17);
    rv << ratio;
    out << rv.str() << ',' << metrics_detail::fmt(rate) << '\n';
  }
  if (!out) throw std::runtime_error("emit_curve: write failed for " + path);
}

inline void emit_decision_log(const std::vector<FilterDecision>& decisions,
                              const std::vector<Label>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_decision_log: cannot open " + path);
  out << "interval,request_index,score,verdict,label\n";
  for (const auto& d : decisions) {
    std::ostringstream sv;
    sv.precision(17);
    sv << d.score;
    out << d.interval << ',' << d.request_index << ',' << sv.str() << ','
        << (d.verdict == Verdict::reject ? "reject" : "accept") << ','
        << label_name(labels[d.request_index]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// published comparison values for the report renderer (read-only constants)

struct ReferenceRow {
  const char* dataset;
  const char* model;
  double fnr, fpr;
};

inline constexpr ReferenceRow kReferenceRows[] = {
    {"HULK", "N", 0.7824, 0.2790},
    {"HULK", "N-over-D (l=1)", 0.8997, 0.6295},
    {"HULK", "Iterative (l=1)", 0.6802, 0.5684},
    {"LOIC", "N-over-D (l=1)", 0.8882, 0.6532},
    {"LOIC", "Iterative (l=1)", 0.8823, 0.2003},
    {"CAIDA07", "N-over-D (l=1)", 0.7622, 0.8025},
    {"CAIDA07", "Iterative (l=1)", 0.9434, 0.1109},
    {"CAIDA07", "Enhanced Iterative (l=rand)", 0.1035, 0.0305},
};

}  // namespace mimicshift

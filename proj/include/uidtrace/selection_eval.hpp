// Copyright 2026 The uidtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Best-of-N selection under every method, accuracy evaluation and averaged
// density curves for correct vs. incorrect traces.
#pragma once

#include <array>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uidtrace/baselines.hpp"
#include "uidtrace/parallel.hpp"
#include "uidtrace/scoring.hpp"
#include "uidtrace/trace_model.hpp"

namespace uidtrace {

enum class Direction { argmax, argmin, borda, mean };

enum class ScoreField {
  none,
  self_certainty,
  mean_confidence,
  mean_entropy,
  mean_abs_delta,
  local_k2,
  local_k3,
  variance,
  lp_variance,
  gap_variance,
};

struct MethodSpec {
  std::string_view name;
  Direction direction;
  ScoreField field;
};

// The first twelve rows are the main result taxonomy; the last four compare
// high vs. low normalized variance of the log-probability proxies.
inline constexpr std::array<MethodSpec, 16> kMethods{{
    {"overall_acc", Direction::mean, ScoreField::none},
    {"self_certainty", Direction::borda, ScoreField::self_certainty},
    {"high_conf", Direction::argmax, ScoreField::mean_confidence},
    {"low_ent", Direction::argmin, ScoreField::mean_entropy},
    {"high_uid_avg", Direction::argmax, ScoreField::mean_abs_delta},
    {"low_uid_avg", Direction::argmin, ScoreField::mean_abs_delta},
    {"high_uid_2s", Direction::argmax, ScoreField::local_k2},
    {"low_uid_2s", Direction::argmin, ScoreField::local_k2},
    {"high_uid_3s", Direction::argmax, ScoreField::local_k3},
    {"low_uid_3s", Direction::argmin, ScoreField::local_k3},
    {"high_uid_var", Direction::argmax, ScoreField::variance},
    {"low_uid_var", Direction::argmin, ScoreField::variance},
    {"high_lp_var", Direction::argmax, ScoreField::lp_variance},
    {"low_lp_var", Direction::argmin, ScoreField::lp_variance},
    {"high_gap_var", Direction::argmax, ScoreField::gap_variance},
    {"low_gap_var", Direction::argmin, ScoreField::gap_variance},
}};

inline std::span<const MethodSpec> main_methods() { return std::span(kMethods).first(12); }
inline std::span<const MethodSpec> all_methods() { return kMethods; }

inline std::optional<MethodSpec> find_method(std::string_view name) {
  for (const auto& m : kMethods) {
    if (m.name == name) return m;
  }
  return std::nullopt;
}

inline std::optional<double> score_field(const ScoreBundle& b, ScoreField field) {
  switch (field) {
    case ScoreField::none: return std::nullopt;
    case ScoreField::self_certainty: return b.baselines.self_certainty;
    case ScoreField::mean_confidence: return b.baselines.mean_confidence;
    case ScoreField::mean_entropy: return b.baselines.mean_entropy;
    case ScoreField::mean_abs_delta:
      return b.uid ? std::optional<double>(b.uid->mean_abs_delta) : std::nullopt;
    case ScoreField::local_k2:
      return b.uid ? std::optional<double>(static_cast<double>(b.uid->local_k2)) : std::nullopt;
    case ScoreField::local_k3:
      return b.uid ? std::optional<double>(static_cast<double>(b.uid->local_k3)) : std::nullopt;
    case ScoreField::variance: return b.uid ? std::optional<double>(b.uid->variance) : std::nullopt;
    case ScoreField::lp_variance:
      return b.n_steps > 0 ? std::optional<double>(b.lp_variance) : std::nullopt;
    case ScoreField::gap_variance:
      return b.lp_gap ? std::optional<double>(b.gap_variance) : std::nullopt;
  }
  return std::nullopt;
}

struct Selection {
  std::optional<std::size_t> index;  // into group.traces
  std::string diagnostic;            // set when skipped

  bool skipped() const { return !index.has_value(); }
};

// Picks one trace of the group. argmax/argmin ties go to the smaller
// sample_id; traces without the method's score are not candidates.
inline Selection select_trace(const QuestionGroup& group, const MethodSpec& method,
                              std::span<const ScoreBundle> scores) {
  if (group.traces.empty()) throw DomainError("select_trace: empty group");
  if (scores.size() != group.traces.size()) throw DomainError("select_trace: score count mismatch");
  if (method.direction == Direction::mean) {
    return {std::nullopt, std::string(method.name) + " does not select a trace"};
  }

  std::vector<std::optional<double>> values;
  values.reserve(scores.size());
  bool any = false;
  for (const auto& b : scores) {
    values.push_back(score_field(b, method.field));
    any = any || values.back().has_value();
  }
  if (!any) {
    return {std::nullopt, std::string(method.name) + ": score missing on every trace of question '" +
                              group.question_id + "'"};
  }

  if (method.direction == Direction::borda) {
    std::vector<std::optional<std::string>> answers;
    answers.reserve(scores.size());
    for (const auto& b : scores) answers.push_back(b.answer);
    return {borda_select(group, values, answers), {}};
  }

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double v = *values[i];
    const double w = *values[*best];
    const bool better = method.direction == Direction::argmax ? v > w : v < w;
    if (better || (v == w && group.traces[i].sample_id < group.traces[*best].sample_id)) best = i;
  }
  return {best, {}};
}

struct QuestionSelection {
  std::string question_id;
  std::optional<std::string> sample_id;
  bool correct = false;
};

struct MethodResult {
  MethodSpec spec;
  std::optional<double> accuracy;  // absent when nothing was selected
  std::size_t n_correct = 0;
  std::size_t n_selected = 0;
  std::size_t n_skipped = 0;
  std::vector<QuestionSelection> selections;
};

struct EvaluationReport {
  std::vector<MethodResult> per_method;
  std::size_t n_questions = 0;
  std::size_t n_samples_per_question = 0;
  std::size_t n_excluded = 0;  // groups without a gold answer
  Json metadata = Json::object();

  const MethodResult* find(std::string_view name) const {
    for (const auto& r : per_method) {
      if (r.spec.name == name) return &r;
    }
    return nullptr;
  }
};

using CorpusScores = std::vector<std::vector<ScoreBundle>>;

// Scores every trace; output is indexed like corpus.groups[g].traces[t].
inline CorpusScores score_corpus(const Corpus& corpus, const ScoreOptions& opts = {},
                                 unsigned jobs = 1) {
  CorpusScores out(corpus.groups.size());
  std::vector<std::pair<std::size_t, std::size_t>> flat;
  for (std::size_t g = 0; g < corpus.groups.size(); ++g) {
    out[g].resize(corpus.groups[g].traces.size());
    for (std::size_t t = 0; t < corpus.groups[g].traces.size(); ++t) flat.emplace_back(g, t);
  }
  parallel_for(flat.size(), jobs, [&](std::size_t i) {
    const auto [g, t] = flat[i];
    out[g][t] = score_trace(corpus.groups[g].traces[t], corpus.groups[g].gold_answer, opts);
  });
  return out;
}

inline EvaluationReport evaluate_corpus(const Corpus& corpus, const CorpusScores& scores,
                                        std::span<const MethodSpec> methods, unsigned jobs = 1) {
  if (scores.size() != corpus.groups.size()) throw DomainError("evaluate_corpus: score shape mismatch");
  EvaluationReport report;

  std::vector<std::size_t> evaluated;
  bool varying = false;
  for (std::size_t g = 0; g < corpus.groups.size(); ++g) {
    const auto& group = corpus.groups[g];
    if (!group.gold_answer) {
      ++report.n_excluded;
      continue;
    }
    if (report.n_samples_per_question != 0 && group.traces.size() != report.n_samples_per_question) {
      varying = true;
    }
    report.n_samples_per_question = std::max(report.n_samples_per_question, group.traces.size());
    evaluated.push_back(g);
  }
  report.n_questions = evaluated.size();

  // selections[q][m]
  std::vector<std::vector<Selection>> selections(evaluated.size());
  parallel_for(evaluated.size(), jobs, [&](std::size_t q) {
    const std::size_t g = evaluated[q];
    selections[q].reserve(methods.size());
    for (const auto& m : methods) selections[q].push_back(select_trace(corpus.groups[g], m, scores[g]));
  });

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodResult r{methods[mi], std::nullopt, 0, 0, 0, {}};
    if (methods[mi].direction == Direction::mean) {
      std::size_t n_traces = 0;
      for (std::size_t g : evaluated) {
        for (const auto& b : scores[g]) {
          n_traces += 1;
          r.n_correct += b.correct ? 1 : 0;
        }
      }
      r.n_selected = n_traces;
      if (n_traces > 0) r.accuracy = static_cast<double>(r.n_correct) / static_cast<double>(n_traces);
      report.per_method.push_back(std::move(r));
      continue;
    }
    for (std::size_t q = 0; q < evaluated.size(); ++q) {
      const auto& group = corpus.groups[evaluated[q]];
      const Selection& s = selections[q][mi];
      QuestionSelection qs{group.question_id, std::nullopt, false};
      if (s.skipped()) {
        ++r.n_skipped;
      } else {
        ++r.n_selected;
        qs.sample_id = group.traces[*s.index].sample_id;
        qs.correct = scores[evaluated[q]][*s.index].correct;
        r.n_correct += qs.correct ? 1 : 0;
      }
      r.selections.push_back(std::move(qs));
    }
    if (r.n_selected > 0) {
      r.accuracy = static_cast<double>(r.n_correct) / static_cast<double>(report.n_questions);
    }
    report.per_method.push_back(std::move(r));
  }

  report.metadata["samples_per_question_vary"] = varying;
  report.metadata["excluded_groups"] = report.n_excluded;
  return report;
}

// ---------------------------------------------------------------------------
// Averaged density curves

struct CurveInput {
  std::span<const double> values;
  bool correct = false;
};

struct CurveAggregate {
  std::vector<double> positions;
  std::optional<std::vector<double>> correct_mean;  // absent for an empty cohort
  std::optional<std::vector<double>> incorrect_mean;
  std::vector<std::size_t> correct_count;
  std::vector<std::size_t> incorrect_count;
};

// Linear interpolation of a per-step vector onto `bins` equally spaced
// positions of the normalized step index in [0, 1].
inline std::vector<double> interpolate_curve(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw DomainError("interpolate_curve: empty vector");
  if (bins == 0) throw DomainError("interpolate_curve: bins must be positive");
  std::vector<double> out(bins, values.front());
  if (values.size() == 1) return out;
  const double last = static_cast<double>(values.size() - 1);
  for (std::size_t b = 0; b < bins; ++b) {
    const double x = bins == 1 ? 0.0 : static_cast<double>(b) / static_cast<double>(bins - 1) * last;
    std::size_t lo = static_cast<std::size_t>(x);
    if (lo >= values.size() - 1) {
      out[b] = values.back();
      continue;
    }
    const double frac = x - static_cast<double>(lo);
    out[b] = values[lo] + frac * (values[lo + 1] - values[lo]);
  }
  return out;
}

inline CurveAggregate aggregate_curves(std::span<const CurveInput> traces, std::size_t bins = 50) {
  if (bins == 0) throw DomainError("aggregate_curves: bins must be positive");
  CurveAggregate agg;
  agg.positions.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    agg.positions[b] = bins == 1 ? 0.0 : static_cast<double>(b) / static_cast<double>(bins - 1);
  }
  std::vector<double> sum_c(bins, 0.0), sum_i(bins, 0.0);
  agg.correct_count.assign(bins, 0);
  agg.incorrect_count.assign(bins, 0);
  for (const auto& t : traces) {
    if (t.values.empty()) continue;
    const auto curve = interpolate_curve(t.values, bins);
    auto& sum = t.correct ? sum_c : sum_i;
    auto& count = t.correct ? agg.correct_count : agg.incorrect_count;
    for (std::size_t b = 0; b < bins; ++b) {
      sum[b] += curve[b];
      ++count[b];
    }
  }
  auto finish = [&](std::vector<double>& sum, const std::vector<std::size_t>& count)
      -> std::optional<std::vector<double>> {
    if (count.front() == 0) return std::nullopt;
    for (std::size_t b = 0; b < bins; ++b) sum[b] /= static_cast<double>(count[b]);
    return sum;
  };
  agg.correct_mean = finish(sum_c, agg.correct_count);
  agg.incorrect_mean = finish(sum_i, agg.incorrect_count);
  return agg;
}

// Cohorts follow each trace's correctness; traces without a density vector
// are left out.
inline CurveAggregate aggregate_id_curves(const Corpus& corpus, const CorpusScores& scores,
                                          std::size_t bins = 50) {
  std::vector<CurveInput> inputs;
  for (std::size_t g = 0; g < corpus.groups.size(); ++g) {
    if (!corpus.groups[g].gold_answer) continue;
    for (const auto& b : scores[g]) {
      if (b.id && !b.id->empty()) inputs.push_back({b.id->values, b.correct});
    }
  }
  return aggregate_curves(inputs, bins);
}

// ---------------------------------------------------------------------------
// Report files

namespace detail {

inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string format_general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

// Tab-separated: method, accuracy, n_selected, n_skipped.
inline void write_report_table(std::ostream& out, const EvaluationReport& report) {
  out << "method\taccuracy\tn_selected\tn_skipped\n";
  for (const auto& r : report.per_method) {
    out << r.spec.name << '\t' << (r.accuracy ? detail::format_fixed(*r.accuracy) : "NA") << '\t'
        << r.n_selected << '\t' << r.n_skipped << '\n';
  }
}

inline Json report_json(const EvaluationReport& report) {
  Json j = Json::object();
  j["n_questions"] = report.n_questions;
  j["n_samples_per_question"] = report.n_samples_per_question;
  j["n_excluded"] = report.n_excluded;
  j["metadata"] = report.metadata;
  Json methods = Json::array();
  for (const auto& r : report.per_method) {
    Json m = Json::object();
    m["name"] = r.spec.name;
    m["accuracy"] = r.accuracy ? Json(*r.accuracy) : Json(nullptr);
    m["n_correct"] = r.n_correct;
    m["n_selected"] = r.n_selected;
    m["n_skipped"] = r.n_skipped;
    if (r.spec.field == ScoreField::mean_abs_delta) {
      m["note"] = "mean absolute step-to-step change of the normalized density";
    }
    Json sel = Json::array();
    for (const auto& s : r.selections) {
      Json e = Json::object();
      e["question_id"] = s.question_id;
      e["sample_id"] = s.sample_id ? Json(*s.sample_id) : Json(nullptr);
      e["correct"] = s.correct;
      sel.push_back(std::move(e));
    }
    m["selections"] = std::move(sel);
    methods.push_back(std::move(m));
  }
  j["methods"] = std::move(methods);
  return j;
}

inline void write_selections(std::ostream& out, const EvaluationReport& report) {
  out << "method\tquestion_id\tsample_id\tcorrect\n";
  for (const auto& r : report.per_method) {
    for (const auto& s : r.selections) {
      out << r.spec.name << '\t' << s.question_id << '\t' << (s.sample_id ? *s.sample_id : "NA") << '\t'
          << (s.correct ? 1 : 0) << '\n';
    }
  }
}

// Columns: bin_position, correct_mean, incorrect_mean, correct_count,
// incorrect_count. An absent cohort leaves its mean column empty.
inline void write_curves_csv(std::ostream& out, const CurveAggregate& agg) {
  out << "bin_position,correct_mean,incorrect_mean,correct_count,incorrect_count\n";
  for (std::size_t b = 0; b < agg.positions.size(); ++b) {
    out << detail::format_general(agg.positions[b]) << ','
        << (agg.correct_mean ? detail::format_general((*agg.correct_mean)[b]) : "") << ','
        << (agg.incorrect_mean ? detail::format_general((*agg.incorrect_mean)[b]) : "") << ','
        << agg.correct_count[b] << ',' << agg.incorrect_count[b] << '\n';
  }
}

}  // namespace uidtrace

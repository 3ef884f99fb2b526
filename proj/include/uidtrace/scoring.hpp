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

// Everything computed for one trace: UID scores on the step entropy vector,
// the log-probability proxies, processing effort, entropy peaks and the
// baseline scores.
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "uidtrace/baselines.hpp"
#include "uidtrace/density_metrics.hpp"
#include "uidtrace/trace_model.hpp"
#include "uidtrace/uniformity.hpp"

namespace uidtrace {

struct ScoreOptions {
  SegmentOptions segment;
  EntropySource entropy_source = EntropySource::automatic;
  EffortParams effort;
  double peak_k = 2.0;
  AnswerRule answer_rule = AnswerRule::boxed_then_last_number;
};

struct ScoreBundle {
  std::size_t n_tokens = 0;
  std::size_t n_steps = 0;
  EntropySource entropy_source = EntropySource::automatic;  // as resolved
  std::optional<DensityVector> id;  // absent when entropies are missing
  std::optional<UidScores> uid;
  std::optional<double> effort;
  std::vector<std::size_t> peaks;
  DensityVector lp{{}, DensityKind::logprob, {}};
  std::optional<DensityVector> lp_gap;  // needs >= 2 steps
  double lp_variance = 0.0;   // normalized-variance proxy on LP
  double gap_variance = 0.0;  // normalized-variance proxy on D
  BaselineScores baselines;
  std::optional<std::string> answer;
  bool correct = false;
  std::string missing;  // why id is absent, if it is
};

inline double normalized_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return global_variance(minmax_normalize(values));
}

// Segments (per opts) and scores one trace. Missing entropies leave the
// entropy-based fields absent rather than failing the trace.
inline ScoreBundle score_trace(const Trace& raw, const std::optional<std::string>& gold,
                               const ScoreOptions& opts = {}) {
  Trace trace = segment_steps(raw, opts.segment);
  ScoreBundle b;
  b.n_tokens = trace.tokens.size();
  b.n_steps = trace.steps.size();
  b.entropy_source = resolve_entropy_source(trace, opts.entropy_source);

  if (b.n_tokens == 0) {
    b.missing = "empty trace";
  } else {
    try {
      DensityVector id = information_density(trace, opts.entropy_source);
      b.uid = uid_scores(id);
      b.effort = processing_effort(id, opts.effort);
      b.peaks = detect_entropy_peaks(id, opts.peak_k);
      b.id = std::move(id);
    } catch (const DataError& e) {
      b.missing = e.what();
    }
  }

  b.lp = logprob_vector(trace);
  b.lp_variance = normalized_variance(b.lp.values);
  if (b.lp.size() >= 2) {
    b.lp_gap = logprob_gap(b.lp);
    b.gap_variance = normalized_variance(b.lp_gap->values);
  }
  b.baselines = baseline_scores(trace, opts.entropy_source);
  b.answer = trace.extracted_answer ? trace.extracted_answer : extract_answer(trace, opts.answer_rule);
  if (trace.correct) {
    b.correct = *trace.correct;
  } else {
    b.correct = gold && b.answer && answers_equal(*b.answer, *gold);
  }
  return b;
}

// Score record attached to a corpus line by `uidtrace score`.
inline Json score_bundle_json(const ScoreBundle& b) {
  Json j = Json::object();
  j["entropy_source"] = std::string(to_string(b.entropy_source));
  if (b.entropy_source == EntropySource::topk) j["entropy_note"] = "top-k renormalized, lower-biased proxy";
  j["n_tokens"] = b.n_tokens;
  j["n_steps"] = b.n_steps;
  if (b.uid) {
    const auto& u = *b.uid;
    j["variance"] = u.variance;
    j["spikes_k2"] = u.spikes_k2;
    j["falls_k2"] = u.falls_k2;
    j["spikes_k3"] = u.spikes_k3;
    j["falls_k3"] = u.falls_k3;
    j["local_k2"] = u.local_k2;
    j["local_k3"] = u.local_k3;
    j["mean_abs_delta"] = u.mean_abs_delta;
    j["degenerate"] = u.degenerate;
  }
  if (b.effort) j["effort"] = *b.effort;
  if (b.id) {
    j["id"] = b.id->values;
    j["peaks"] = b.peaks;
  }
  j["lp"] = b.lp.values;
  if (b.lp_gap) j["lp_gap"] = b.lp_gap->values;
  j["lp_variance"] = b.lp_variance;
  j["gap_variance"] = b.gap_variance;
  if (b.baselines.self_certainty) j["self_certainty"] = *b.baselines.self_certainty;
  if (b.baselines.mean_confidence) j["mean_confidence"] = *b.baselines.mean_confidence;
  if (b.baselines.mean_entropy) j["mean_entropy"] = *b.baselines.mean_entropy;
  if (b.answer) j["answer"] = *b.answer;
  j["correct"] = b.correct;
  if (!b.missing.empty()) j["missing"] = b.missing;
  return j;
}

}  // namespace uidtrace

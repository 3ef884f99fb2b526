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

// Token- and step-level information measures. All quantities are in nats.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uidtrace/error.hpp"
#include "uidtrace/trace_model.hpp"

namespace uidtrace {

enum class DensityKind { entropy, logprob, logprob_gap };

// Where per-token entropy comes from. `automatic` prefers the record's own
// entropy field and falls back to the renormalized top-k distribution.
enum class EntropySource { automatic, provided, topk };

inline std::string_view to_string(EntropySource s) {
  switch (s) {
    case EntropySource::automatic: return "auto";
    case EntropySource::provided: return "provided";
    case EntropySource::topk: return "topk";
  }
  return "auto";
}

inline std::optional<EntropySource> parse_entropy_source(std::string_view s) {
  if (s == "auto") return EntropySource::automatic;
  if (s == "provided" || s == "provided_entropy") return EntropySource::provided;
  if (s == "topk" || s == "topk_entropy") return EntropySource::topk;
  return std::nullopt;
}

inline std::string_view to_string(DensityKind k) {
  switch (k) {
    case DensityKind::entropy: return "entropy";
    case DensityKind::logprob: return "logprob";
    case DensityKind::logprob_gap: return "logprob_gap";
  }
  return "entropy";
}

struct TraceRef {
  std::string question_id;
  std::string sample_id;
};

// Per-step values of one trace.
struct DensityVector {
  std::vector<double> values;
  DensityKind kind = DensityKind::entropy;
  TraceRef trace_ref;

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
};

struct EffortParams {
  double k = 2.0;  // exponent on the per-step density
  double c = 1.0;  // per-step cost

  void validate() const {
    if (!(k > 1.0)) throw ConfigError("effort exponent k must be > 1");
    if (!(c > 0.0)) throw ConfigError("effort step cost c must be > 0");
  }
};

// -sum p ln p over a normalized distribution.
inline double token_entropy(std::span<const double> probabilities) {
  if (probabilities.empty()) throw DomainError("token_entropy: empty distribution");
  double mass = 0.0;
  for (double p : probabilities) {
    if (!(p > 0.0)) throw DomainError("token_entropy: non-positive probability");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-6) {
    throw DomainError("token_entropy: probabilities sum to " + std::to_string(mass));
  }
  double h = 0.0;
  for (double p : probabilities) h -= p * std::log(p);
  // A one-point distribution can come out as -0.0.
  return h > 0.0 ? h : 0.0;
}

// Renormalizes a top-k log-probability list to unit mass over its support
// and returns its entropy. This under-estimates full-vocabulary entropy.
inline double topk_entropy(std::span<const std::pair<std::string, double>> top_logprobs) {
  if (top_logprobs.empty()) throw DomainError("topk_entropy: empty distribution");
  double max_lp = top_logprobs.front().second;
  for (const auto& [_, lp] : top_logprobs) max_lp = std::max(max_lp, lp);
  double z = 0.0;
  for (const auto& [_, lp] : top_logprobs) z += std::exp(lp - max_lp);
  const double log_z = max_lp + std::log(z);
  std::vector<double> p;
  p.reserve(top_logprobs.size());
  for (const auto& [_, lp] : top_logprobs) p.push_back(std::exp(lp - log_z));
  // exp/log round-off can leave the mass a few ulps from 1.
  double mass = 0.0;
  for (double v : p) mass += v;
  for (double& v : p) v /= mass;
  return token_entropy(p);
}

inline std::optional<double> token_entropy_of(const TokenRecord& tok, EntropySource source) {
  switch (source) {
    case EntropySource::provided: return tok.entropy;
    case EntropySource::topk:
      if (!tok.has_top_logprobs()) return std::nullopt;
      return topk_entropy(tok.top_logprobs);
    case EntropySource::automatic:
      if (tok.entropy) return tok.entropy;
      if (tok.has_top_logprobs()) return topk_entropy(tok.top_logprobs);
      return std::nullopt;
  }
  return std::nullopt;
}

// Which concrete source `automatic` resolves to for a trace: provided when
// every scored token has an entropy field, else topk.
inline EntropySource resolve_entropy_source(const Trace& trace, EntropySource source) {
  if (source != EntropySource::automatic) return source;
  for (const auto& tok : trace.tokens) {
    if (!tok.entropy) return EntropySource::topk;
  }
  return EntropySource::provided;
}

namespace detail {

inline void check_span(const Trace& trace, const StepSpan& step) {
  if (step.end < step.start || step.end >= trace.tokens.size()) {
    throw DomainError("step " + std::to_string(step.index) + ": empty or out-of-range span");
  }
}

}  // namespace detail

// Mean token entropy over the step.
inline double step_information_density(const Trace& trace, const StepSpan& step,
                                       EntropySource source = EntropySource::automatic) {
  detail::check_span(trace, step);
  double sum = 0.0;
  for (std::size_t t = step.start; t <= step.end; ++t) {
    auto h = token_entropy_of(trace.tokens[t], source);
    if (!h) {
      throw DataError("token " + std::to_string(t) + " has no " +
                      std::string(to_string(source)) + " entropy");
    }
    sum += *h;
  }
  return sum / static_cast<double>(step.size());
}

// Mean token log-probability over the step.
inline double step_logprob(const Trace& trace, const StepSpan& step) {
  detail::check_span(trace, step);
  double sum = 0.0;
  for (std::size_t t = step.start; t <= step.end; ++t) sum += trace.tokens[t].logprob;
  return sum / static_cast<double>(step.size());
}

inline DensityVector information_density(const Trace& trace,
                                         EntropySource source = EntropySource::automatic) {
  DensityVector v{{}, DensityKind::entropy, {trace.question_id, trace.sample_id}};
  v.values.reserve(trace.steps.size());
  for (const auto& step : trace.steps) {
    v.values.push_back(step_information_density(trace, step, source));
  }
  return v;
}

inline DensityVector logprob_vector(const Trace& trace) {
  DensityVector v{{}, DensityKind::logprob, {trace.question_id, trace.sample_id}};
  v.values.reserve(trace.steps.size());
  for (const auto& step : trace.steps) v.values.push_back(step_logprob(trace, step));
  return v;
}

// Step-to-step change of the step log-probability.
inline DensityVector logprob_gap(const DensityVector& lp) {
  if (lp.kind != DensityKind::logprob) throw DomainError("logprob_gap: expects a logprob vector");
  if (lp.size() < 2) throw DomainError("logprob_gap: needs at least 2 steps");
  DensityVector gap{{}, DensityKind::logprob_gap, lp.trace_ref};
  gap.values.reserve(lp.size() - 1);
  for (std::size_t j = 0; j + 1 < lp.size(); ++j) gap.values.push_back(lp.values[j + 1] - lp.values[j]);
  return gap;
}

// sum_n value_n^k + c * N. Accepts k >= 1; EffortParams::validate() is the
// stricter check applied to user configuration.
inline double processing_effort(std::span<const double> values, const EffortParams& params) {
  if (!(params.k >= 1.0) || !(params.c > 0.0)) {
    throw DomainError("processing_effort: requires k >= 1 and c > 0");
  }
  const bool integral_k = std::floor(params.k) == params.k;
  double total = 0.0;
  for (double v : values) {
    if (v < 0.0 && !integral_k) {
      throw DomainError("processing_effort: negative density with non-integer exponent");
    }
    total += std::pow(v, params.k);
  }
  return total + params.c * static_cast<double>(values.size());
}

inline double processing_effort(const DensityVector& id, const EffortParams& params) {
  return processing_effort(id.values, params);
}

}  // namespace uidtrace

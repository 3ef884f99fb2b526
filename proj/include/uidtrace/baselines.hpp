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

// Comparison scorers for best-of-N selection: self-certainty with Borda
// voting, mean token confidence and mean token entropy.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "uidtrace/density_metrics.hpp"
#include "uidtrace/error.hpp"
#include "uidtrace/trace_model.hpp"

namespace uidtrace {

struct BaselineScores {
  std::optional<double> self_certainty;  // absent without distributions
  std::optional<double> mean_confidence;  // absent for empty traces
  std::optional<double> mean_entropy;     // absent without entropies
};

// KL(U || p) of one token, U uniform over the renormalized top-k support.
inline double token_self_certainty(std::span<const std::pair<std::string, double>> top_logprobs) {
  if (top_logprobs.empty()) throw DomainError("token_self_certainty: empty distribution");
  double max_lp = top_logprobs.front().second;
  for (const auto& [_, lp] : top_logprobs) max_lp = std::max(max_lp, lp);
  double z = 0.0;
  for (const auto& [_, lp] : top_logprobs) z += std::exp(lp - max_lp);
  const double log_z = max_lp + std::log(z);
  const double n = static_cast<double>(top_logprobs.size());
  double mean_log_p = 0.0;
  for (const auto& [_, lp] : top_logprobs) mean_log_p += lp - log_z;
  mean_log_p /= n;
  const double kl = -std::log(n) - mean_log_p;
  return kl > 0.0 ? kl : 0.0;
}

// Mean per-token KL(U || p) over tokens that carry a distribution.
inline std::optional<double> trace_self_certainty(const Trace& trace) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& tok : trace.tokens) {
    if (!tok.has_top_logprobs()) continue;
    sum += token_self_certainty(tok.top_logprobs);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// Mean token probability.
inline double trace_confidence(const Trace& trace) {
  if (trace.tokens.empty()) throw DomainError("trace_confidence: empty trace");
  double sum = 0.0;
  for (const auto& tok : trace.tokens) sum += std::exp(tok.logprob);
  return sum / static_cast<double>(trace.tokens.size());
}

// Flat mean over every token, not a mean of step means.
inline double trace_mean_entropy(const Trace& trace, EntropySource source = EntropySource::automatic) {
  if (trace.tokens.empty()) throw DomainError("trace_mean_entropy: empty trace");
  double sum = 0.0;
  for (std::size_t t = 0; t < trace.tokens.size(); ++t) {
    auto h = token_entropy_of(trace.tokens[t], source);
    if (!h) throw DataError("token " + std::to_string(t) + " has no entropy");
    sum += *h;
  }
  return sum / static_cast<double>(trace.tokens.size());
}

inline BaselineScores baseline_scores(const Trace& trace, EntropySource source = EntropySource::automatic) {
  BaselineScores out;
  if (trace.tokens.empty()) return out;
  out.self_certainty = trace_self_certainty(trace);
  out.mean_confidence = trace_confidence(trace);
  try {
    out.mean_entropy = trace_mean_entropy(trace, source);
  } catch (const DataError&) {
  }
  return out;
}

// Rank order used by Borda: certainty descending, absent certainty last,
// ties by sample_id ascending. Never depends on input position.
inline std::vector<std::size_t> certainty_rank_order(const QuestionGroup& group,
                                                     std::span<const std::optional<double>> certainty) {
  std::vector<std::size_t> order(group.traces.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    return certainty[i] ? *certainty[i] : -std::numeric_limits<double>::infinity();
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key(a) != key(b)) return key(a) > key(b);
    return group.traces[a].sample_id < group.traces[b].sample_id;
  });
  return order;
}

// Borda vote over answer classes. The trace at 1-based rank r earns N - r
// points for its answer class; the class with the most points wins, ties go
// to the class holding the better-ranked trace. Returns the index of the
// winning class's top-ranked trace.
//
// answers[i] is the extracted answer of trace i; absent answers vote alone.
inline std::size_t borda_select(const QuestionGroup& group,
                                std::span<const std::optional<double>> certainty,
                                std::span<const std::optional<std::string>> answers) {
  const std::size_t n = group.traces.size();
  if (n == 0) throw DomainError("borda_select: empty group");
  if (certainty.size() != n || answers.size() != n) {
    throw DomainError("borda_select: score count does not match group size");
  }
  const auto order = certainty_rank_order(group, certainty);

  struct AnswerClass {
    std::size_t best;  // top-ranked member (first seen in rank order)
    std::size_t best_rank;
    std::size_t points;
  };
  std::vector<AnswerClass> classes;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    const std::size_t points = n - (r + 1);
    AnswerClass* home = nullptr;
    if (answers[i]) {
      for (auto& c : classes) {
        const auto& rep = answers[c.best];
        if (rep && answers_equal(*rep, *answers[i])) {
          home = &c;
          break;
        }
      }
    }
    if (home) {
      home->points += points;
    } else {
      classes.push_back({i, r, points});
    }
  }
  const AnswerClass* winner = &classes.front();
  for (const auto& c : classes) {
    if (c.points > winner->points || (c.points == winner->points && c.best_rank < winner->best_rank)) {
      winner = &c;
    }
  }
  return winner->best;
}

inline std::size_t borda_select(const QuestionGroup& group, std::span<const std::optional<double>> certainty) {
  std::vector<std::optional<std::string>> answers;
  answers.reserve(group.traces.size());
  for (const auto& t : group.traces) {
    answers.push_back(t.extracted_answer ? t.extracted_answer : extract_answer(t));
  }
  return borda_select(group, certainty, answers);
}

}  // namespace uidtrace

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

// Brute-force reference implementations used only by the tests. They take
// different routes from the library (long double, explicit loops, string
// splitting, pairwise rank counting) and must not call into it.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace uidtrace::oracle {

inline long double entropy(const std::vector<double>& p) {
  long double h = 0.0L;
  for (double x : p) h += -static_cast<long double>(x) * std::log(static_cast<long double>(x));
  return h;
}

inline long double mean(const std::vector<double>& v) {
  long double s = 0.0L;
  for (double x : v) s += x;
  return s / static_cast<long double>(v.size());
}

inline std::vector<long double> normalize(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<long double> out(v.size(), 0.0L);
  if (*lo == *hi) return out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = (static_cast<long double>(v[i]) - *lo) / (static_cast<long double>(*hi) - *lo);
  }
  return out;
}

// E[x^2] - E[x]^2 rather than the two-pass form.
inline long double variance(const std::vector<long double>& v) {
  long double s = 0.0L, s2 = 0.0L;
  for (auto x : v) {
    s += x;
    s2 += x * x;
  }
  const long double n = static_cast<long double>(v.size());
  const long double m = s / n;
  return std::max(0.0L, s2 / n - m * m);
}

struct Counts {
  std::size_t spikes = 0;
  std::size_t falls = 0;
};

inline Counts spikes_falls(const std::vector<long double>& normalized, long double k) {
  Counts c;
  if (normalized.size() < 2) return c;
  std::vector<long double> d;
  for (std::size_t i = 1; i < normalized.size(); ++i) d.push_back(normalized[i] - normalized[i - 1]);
  long double mu = 0.0L;
  for (auto x : d) mu += x;
  mu /= static_cast<long double>(d.size());
  long double var = 0.0L;
  for (auto x : d) var += (x - mu) * (x - mu);
  const long double sigma = std::sqrt(var / static_cast<long double>(d.size()));
  if (sigma == 0.0L) return c;
  for (auto x : d) {
    if (x - mu > k * sigma) ++c.spikes;
    if (mu - x > k * sigma) ++c.falls;
  }
  return c;
}

inline long double mean_abs_delta(const std::vector<long double>& normalized) {
  if (normalized.size() < 2) return 0.0L;
  long double s = 0.0L;
  for (std::size_t i = 1; i < normalized.size(); ++i) s += std::fabs(normalized[i] - normalized[i - 1]);
  return s / static_cast<long double>(normalized.size() - 1);
}

inline std::vector<std::size_t> peaks(const std::vector<double>& v, long double k) {
  std::vector<std::size_t> out;
  const long double m = mean(v);
  long double var = 0.0L;
  for (double x : v) var += (x - m) * (x - m);
  const long double sd = std::sqrt(var / static_cast<long double>(v.size()));
  if (sd == 0.0L) return out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > m + k * sd) out.push_back(i);
  }
  return out;
}

// Character-level segmentation: split the detokenized text on the
// delimiter (non-overlapping, left to right), keep non-empty pieces, then
// place each token by the piece that contains its first piece character.
// Tokens with no piece character follow the previous token. Returns
// inclusive [start, end] token spans.
inline std::vector<std::pair<std::size_t, std::size_t>> segment(const std::vector<std::string>& tokens,
                                                                const std::string& delim) {
  std::string text;
  std::vector<std::size_t> begin;
  for (const auto& t : tokens) {
    begin.push_back(text.size());
    text += t;
  }
  begin.push_back(text.size());
  if (tokens.empty()) return {};

  // piece id for every character; -1 for delimiter characters
  std::vector<int> owner(text.size(), -1);
  int piece = 0;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(delim, pos);
    const std::size_t stop = hit == std::string::npos ? text.size() : hit;
    if (stop > pos) {
      for (std::size_t c = pos; c < stop; ++c) owner[c] = piece;
      ++piece;
    }
    if (hit == std::string::npos) break;
    pos = hit + delim.size();
  }

  std::vector<int> token_piece(tokens.size(), -1);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    for (std::size_t c = begin[t]; c < begin[t + 1]; ++c) {
      if (owner[c] >= 0) {
        token_piece[t] = owner[c];
        break;
      }
    }
  }
  // leading tokens without content take the first real piece
  int first = -1;
  for (int p : token_piece) {
    if (p >= 0) {
      first = p;
      break;
    }
  }
  int prev = first < 0 ? 0 : first;
  for (auto& p : token_piece) {
    if (p < 0) p = prev;
    prev = p;
  }
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t start = 0;
  for (std::size_t t = 1; t <= tokens.size(); ++t) {
    if (t == tokens.size() || token_piece[t] != token_piece[start]) {
      spans.emplace_back(start, t - 1);
      start = t;
    }
  }
  return spans;
}

// Exhaustive Borda tally. answer_key[i] groups traces (nullopt = alone).
// Points come from pairwise comparisons: a trace earns one point for every
// trace ranked below it.
inline std::size_t borda(const std::vector<std::optional<double>>& certainty,
                         const std::vector<std::string>& sample_ids,
                         const std::vector<std::optional<long>>& answer_key) {
  const std::size_t n = certainty.size();
  auto beats = [&](std::size_t a, std::size_t b) {
    const double ca = certainty[a] ? *certainty[a] : -INFINITY;
    const double cb = certainty[b] ? *certainty[b] : -INFINITY;
    if (ca != cb) return ca > cb;
    return sample_ids[a] < sample_ids[b];
  };
  std::vector<std::size_t> points(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && beats(a, b)) ++points[a];
    }
  }
  // class label: answer key, or a unique negative label for absent answers
  std::map<long, std::size_t> class_points;
  std::map<long, std::size_t> class_best;
  for (std::size_t i = 0; i < n; ++i) {
    const long label = answer_key[i] ? *answer_key[i] : -1 - static_cast<long>(i);
    class_points[label] += points[i];
    auto it = class_best.find(label);
    if (it == class_best.end() || beats(i, it->second)) class_best[label] = i;
  }
  std::optional<long> winner;
  for (const auto& [label, pts] : class_points) {
    if (!winner) {
      winner = label;
      continue;
    }
    const std::size_t wp = class_points[*winner];
    if (pts > wp || (pts == wp && beats(class_best[label], class_best[*winner]))) winner = label;
  }
  return class_best[*winner];
}

}  // namespace uidtrace::oracle

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

// Uniformity scores over a per-step density vector.
//
// Global uniformity is the population variance of the min-max normalized
// vector. Local uniformity looks at consecutive differences of the normalized
// vector: a difference strictly above mu + k*sigma is a spike, strictly below
// mu - k*sigma a fall, with mu and sigma taken over the differences
// themselves (divisor = number of differences).
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "uidtrace/density_metrics.hpp"
#include "uidtrace/error.hpp"
#include "uidtrace/trace_model.hpp"

namespace uidtrace {

struct NormalizedVector {
  std::vector<double> values;  // each in [0, 1]
  double min_raw = 0.0;
  double max_raw = 0.0;
  bool degenerate = false;  // constant input; values are all zero

  std::size_t size() const { return values.size(); }
};

struct LocalDeltas {
  std::vector<double> deltas;
  double mu = 0.0;
  double sigma = 0.0;
};

struct SpikeCounts {
  std::size_t spikes = 0;
  std::size_t falls = 0;
  std::size_t total() const { return spikes + falls; }
  bool operator==(const SpikeCounts&) const = default;
};

struct UidScores {
  double variance = 0.0;
  std::size_t spikes_k2 = 0;
  std::size_t falls_k2 = 0;
  std::size_t spikes_k3 = 0;
  std::size_t falls_k3 = 0;
  std::size_t local_k2 = 0;
  std::size_t local_k3 = 0;
  double mean_abs_delta = 0.0;
  std::size_t n_steps = 0;
  bool degenerate = true;

  bool operator==(const UidScores&) const = default;
};

inline NormalizedVector minmax_normalize(std::span<const double> values) {
  if (values.empty()) throw DomainError("minmax_normalize: empty vector");
  NormalizedVector out;
  out.min_raw = values[0];
  out.max_raw = values[0];
  for (double v : values) {
    out.min_raw = std::min(out.min_raw, v);
    out.max_raw = std::max(out.max_raw, v);
  }
  out.values.resize(values.size(), 0.0);
  if (out.max_raw == out.min_raw) {
    out.degenerate = true;
    return out;
  }
  const double range = out.max_raw - out.min_raw;
  for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = (values[i] - out.min_raw) / range;
  return out;
}

inline NormalizedVector minmax_normalize(const DensityVector& id) { return minmax_normalize(id.values); }

// Population variance (divisor N).
inline double global_variance(const NormalizedVector& nv) {
  if (nv.values.empty()) throw DomainError("global_variance: empty vector");
  if (nv.degenerate) return 0.0;
  const double n = static_cast<double>(nv.size());
  double mean = 0.0;
  for (double v : nv.values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : nv.values) ss += (v - mean) * (v - mean);
  return ss / n;
}

// Fewer than two values gives an empty, zero-statistics result.
inline LocalDeltas local_deltas(const NormalizedVector& nv) {
  LocalDeltas out;
  if (nv.size() < 2) return out;
  out.deltas.reserve(nv.size() - 1);
  for (std::size_t j = 0; j + 1 < nv.size(); ++j) out.deltas.push_back(nv.values[j + 1] - nv.values[j]);
  const double m = static_cast<double>(out.deltas.size());
  for (double d : out.deltas) out.mu += d;
  out.mu /= m;
  double ss = 0.0;
  for (double d : out.deltas) ss += (d - out.mu) * (d - out.mu);
  out.sigma = std::sqrt(ss / m);
  return out;
}

inline SpikeCounts count_spikes_falls(const LocalDeltas& stats, double k) {
  SpikeCounts out;
  if (stats.sigma == 0.0) return out;
  const double upper = stats.mu + k * stats.sigma;
  const double lower = stats.mu - k * stats.sigma;
  for (double d : stats.deltas) {
    if (d > upper) ++out.spikes;
    if (d < lower) ++out.falls;
  }
  return out;
}

// Mean |delta|; zero when there are no deltas.
inline double mean_abs_delta(std::span<const double> deltas) {
  if (deltas.empty()) return 0.0;
  double sum = 0.0;
  for (double d : deltas) sum += std::abs(d);
  return sum / static_cast<double>(deltas.size());
}

// Indices of steps whose raw value is strictly above mean + k * stddev
// (population stddev over the raw, un-normalized vector).
inline std::vector<std::size_t> detect_entropy_peaks(std::span<const double> values, double k = 2.0) {
  std::vector<std::size_t> peaks;
  if (values.empty()) return peaks;
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (sd == 0.0) return peaks;
  const double threshold = mean + k * sd;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > threshold) peaks.push_back(i);
  }
  return peaks;
}

inline std::vector<std::size_t> detect_entropy_peaks(const DensityVector& id, double k = 2.0) {
  if (id.kind != DensityKind::entropy) throw DomainError("detect_entropy_peaks: expects an entropy vector");
  return detect_entropy_peaks(std::span<const double>(id.values), k);
}

inline UidScores uid_scores(std::span<const double> values) {
  UidScores s;
  s.n_steps = values.size();
  if (values.size() <= 1) return s;
  const NormalizedVector nv = minmax_normalize(values);
  if (nv.degenerate) return s;
  s.degenerate = false;
  s.variance = global_variance(nv);
  const LocalDeltas ld = local_deltas(nv);
  const SpikeCounts k2 = count_spikes_falls(ld, 2.0);
  const SpikeCounts k3 = count_spikes_falls(ld, 3.0);
  s.spikes_k2 = k2.spikes;
  s.falls_k2 = k2.falls;
  s.spikes_k3 = k3.spikes;
  s.falls_k3 = k3.falls;
  s.local_k2 = k2.total();
  s.local_k3 = k3.total();
  s.mean_abs_delta = mean_abs_delta(ld.deltas);
  return s;
}

inline UidScores uid_scores(const DensityVector& id) { return uid_scores(std::span<const double>(id.values)); }

// Scores a segmented trace on its step entropy vector.
inline UidScores uid_score_bundle(const Trace& trace, EntropySource source = EntropySource::automatic) {
  return uid_scores(information_density(trace, source));
}

}  // namespace uidtrace

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

// Seeded generator of synthetic trace corpora with controlled step-entropy
// profiles. Correct traces follow a smooth exponential decay; incorrect
// traces sit on a flat noisy level with planted spikes.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "uidtrace/error.hpp"
#include "uidtrace/parallel.hpp"
#include "uidtrace/trace_model.hpp"

namespace uidtrace {

enum class ProfileKind { smooth_decay, flat_spiky };

inline std::string_view to_string(ProfileKind k) {
  return k == ProfileKind::smooth_decay ? "smooth_decay" : "flat_spiky";
}

struct CountRange {
  std::size_t min = 1;
  std::size_t max = 1;  // inclusive
};

struct SynthProfile {
  ProfileKind kind = ProfileKind::smooth_decay;
  CountRange n_steps{20, 40};
  CountRange tokens_per_step{2, 5};
  double base_entropy = 1.0;
  double decay_rate = 0.6;  // smooth_decay only
  double noise_std = 0.0;
  std::size_t n_spikes = 0;  // flat_spiky only
  double spike_magnitude = 0.0;

  void validate() const {
    if (n_steps.min < 1 || n_steps.min > n_steps.max) throw ConfigError("synth: invalid n_steps range");
    if (tokens_per_step.min < 2 || tokens_per_step.min > tokens_per_step.max) {
      throw ConfigError("synth: tokens_per_step range must be non-empty with min >= 2");
    }
    if (!(base_entropy >= 0.0)) throw ConfigError("synth: base_entropy must be >= 0");
    if (!(noise_std >= 0.0)) throw ConfigError("synth: noise_std must be >= 0");
    if (kind == ProfileKind::flat_spiky) {
      if (!(spike_magnitude > 0.0)) throw ConfigError("synth: spike_magnitude must be > 0");
      if (n_spikes > n_steps.min) throw ConfigError("synth: more spikes than the smallest step count");
    }
  }

  Json to_json() const {
    Json j = Json::object();
    j["kind"] = std::string(to_string(kind));
    j["n_steps"] = {n_steps.min, n_steps.max};
    j["tokens_per_step"] = {tokens_per_step.min, tokens_per_step.max};
    j["base_entropy"] = base_entropy;
    j["decay_rate"] = decay_rate;
    j["noise_std"] = noise_std;
    j["n_spikes"] = n_spikes;
    j["spike_magnitude"] = spike_magnitude;
    return j;
  }
};

struct SynthConfig {
  std::size_t n_questions = 100;
  std::size_t n_samples = 5;
  double p_correct = 0.5;
  SynthProfile correct{ProfileKind::smooth_decay, {20, 40}, {2, 5}, 1.0, 0.6, 0.0, 0, 0.0};
  SynthProfile incorrect{ProfileKind::flat_spiky, {60, 120}, {2, 5}, 1.0, 0.0, 0.15, 2, 0.9};
  std::uint64_t seed = 42;

  void validate() const {
    if (n_questions == 0) throw ConfigError("synth: n_questions must be >= 1");
    if (n_samples == 0) throw ConfigError("synth: n_samples must be >= 1");
    if (!(p_correct >= 0.0 && p_correct <= 1.0)) throw ConfigError("synth: p_correct must be in [0, 1]");
    correct.validate();
    incorrect.validate();
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic per-(seed, question, sample) stream; the standard engines
// are bit-specified, the standard distributions are not, hence the
// hand-rolled transforms below.
class SynthRng {
 public:
  SynthRng(std::uint64_t seed, std::uint64_t question, std::uint64_t sample)
      : engine_(splitmix64(splitmix64(splitmix64(seed) ^ question) ^ sample)) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t uniform_int(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1));
  }

  double normal(double stddev) {
    if (stddev == 0.0) return 0.0;
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

inline std::string zero_pad(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

inline std::size_t digits(std::size_t n) {
  std::size_t d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

}  // namespace detail

// Per-step entropy targets of one trace.
inline std::vector<double> synth_step_targets(const SynthProfile& p, detail::SynthRng& rng) {
  const std::size_t n = rng.uniform_int(p.n_steps.min, p.n_steps.max);
  std::vector<double> e(n);
  if (p.kind == ProfileKind::smooth_decay) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = p.base_entropy * std::exp(-p.decay_rate * static_cast<double>(i) / static_cast<double>(n)) +
                       rng.normal(p.noise_std);
      e[i] = v > 0.0 ? v : 0.0;
    }
    return e;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double v = p.base_entropy + rng.normal(p.noise_std);
    e[i] = v > 0.0 ? v : 0.0;
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t s = 0; s < p.n_spikes; ++s) {
    std::swap(idx[s], idx[rng.uniform_int(s, n - 1)]);
    e[idx[s]] += p.spike_magnitude;
  }
  return e;
}

// One trace with the given step targets. Token entropies jitter around the
// target with mean-zero offsets, so each step mean equals its target up to
// rounding. Logprobs are the negated entropies.
inline Trace synth_trace(const SynthProfile& p, const std::vector<double>& targets, detail::SynthRng& rng,
                         const std::string& answer) {
  Trace trace;
  std::size_t counter = 0;
  auto push = [&](std::string text, double h) {
    TokenRecord tok;
    tok.text = std::move(text);
    tok.entropy = h;
    tok.logprob = h > 0.0 ? -h : 0.0;
    trace.tokens.push_back(std::move(tok));
  };
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::size_t m = rng.uniform_int(p.tokens_per_step.min, p.tokens_per_step.max);
    std::vector<double> u(m);
    double mean_u = 0.0;
    for (auto& x : u) {
      x = 2.0 * rng.uniform01() - 1.0;
      mean_u += x;
    }
    mean_u /= static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double h = targets[i] * (1.0 + 0.1 * (u[j] - mean_u));
      std::string text;
      if (j + 1 < m) {
        text = "t" + detail::zero_pad(counter++ % 10000, 4) + " ";
      } else if (i + 1 < targets.size()) {
        text = "\n\n";
      } else {
        text = "\\boxed{" + answer + "}";
      }
      push(std::move(text), h > 0.0 ? h : 0.0);
    }
  }
  return trace;
}

inline Corpus generate_synthetic_corpus(const SynthConfig& cfg, unsigned jobs = 1) {
  cfg.validate();
  const std::size_t qwidth = std::max<std::size_t>(4, detail::digits(cfg.n_questions - 1));
  const std::size_t swidth = std::max<std::size_t>(2, detail::digits(cfg.n_samples - 1));

  Corpus corpus;
  corpus.groups.resize(cfg.n_questions);
  for (std::size_t q = 0; q < cfg.n_questions; ++q) {
    detail::SynthRng qrng(cfg.seed, q, ~std::uint64_t{0});
    auto& g = corpus.groups[q];
    g.question_id = "q" + detail::zero_pad(q, qwidth);
    g.gold_answer = std::to_string(qrng.uniform_int(0, 999));
    g.traces.resize(cfg.n_samples);
  }

  parallel_for(cfg.n_questions * cfg.n_samples, jobs, [&](std::size_t flat) {
    const std::size_t q = flat / cfg.n_samples;
    const std::size_t s = flat % cfg.n_samples;
    auto& g = corpus.groups[q];
    detail::SynthRng rng(cfg.seed, q, s);
    const bool correct = rng.uniform01() < cfg.p_correct;
    const SynthProfile& profile = correct ? cfg.correct : cfg.incorrect;
    const std::string answer =
        correct ? *g.gold_answer : std::to_string(std::stoul(*g.gold_answer) + 1 + rng.uniform_int(0, 8));
    const auto targets = synth_step_targets(profile, rng);
    Trace t = synth_trace(profile, targets, rng, answer);
    t.question_id = g.question_id;
    t.sample_id = detail::zero_pad(s, swidth);
    t.gold_answer = g.gold_answer;
    t.extracted_answer = answer;
    t.correct = correct;
    Json meta = Json::object();
    meta["synthetic"] = true;
    meta["seed"] = cfg.seed;
    meta["logprob_is_negated_entropy"] = true;
    meta["profile"] = profile.to_json();
    t.meta = std::move(meta);
    g.traces[s] = std::move(t);
  });

  corpus.metadata["synthetic"] = true;
  corpus.metadata["seed"] = cfg.seed;
  corpus.metadata["p_correct"] = cfg.p_correct;
  corpus.metadata["correct_profile"] = cfg.correct.to_json();
  corpus.metadata["incorrect_profile"] = cfg.incorrect.to_json();
  return corpus;
}

}  // namespace uidtrace

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

#include "uidtrace/synth.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "uidtrace/uniformity.hpp"

namespace uidtrace {
namespace {

std::string dump(const Corpus& c) {
  std::ostringstream out;
  for (const auto& g : c.groups) {
    for (const auto& t : g.traces) out << serialize_trace_line(t) << '\n';
  }
  return out.str();
}

TEST(SynthCorpus, DeterministicForSeedAndThreads) {
  SynthConfig cfg;
  cfg.n_questions = 20;
  const auto a = dump(generate_synthetic_corpus(cfg, 1));
  EXPECT_EQ(a, dump(generate_synthetic_corpus(cfg, 1)));
  EXPECT_EQ(a, dump(generate_synthetic_corpus(cfg, 3)));
  cfg.seed = 43;
  EXPECT_NE(a, dump(generate_synthetic_corpus(cfg, 1)));
}

TEST(SynthCorpus, ShapeAndLabels) {
  SynthConfig cfg;
  cfg.n_questions = 12;
  cfg.n_samples = 11;
  const auto c = generate_synthetic_corpus(cfg);
  ASSERT_EQ(c.groups.size(), 12u);
  EXPECT_EQ(c.groups[3].question_id, "q0003");
  for (const auto& g : c.groups) {
    ASSERT_EQ(g.traces.size(), 11u);
    EXPECT_EQ(g.traces[7].sample_id, "07");
    for (const auto& t : g.traces) {
      const Trace s = segment_steps(t);
      EXPECT_EQ(extract_answer(s), t.extracted_answer);
      EXPECT_EQ(answers_equal(*t.extracted_answer, *g.gold_answer), *t.correct);
      EXPECT_TRUE(t.meta["synthetic"].get<bool>());
      for (const auto& tok : t.tokens) {
        ASSERT_TRUE(tok.entropy.has_value());
        EXPECT_GE(*tok.entropy, 0.0);
        EXPECT_LE(tok.logprob, 0.0);
      }
    }
  }
}

TEST(SynthCorpus, AllCorrectOrAllIncorrect) {
  SynthConfig cfg;
  cfg.n_questions = 5;
  cfg.p_correct = 1.0;
  for (const auto& g : generate_synthetic_corpus(cfg).groups) {
    for (const auto& t : g.traces) EXPECT_TRUE(*t.correct);
  }
  cfg.p_correct = 0.0;
  for (const auto& g : generate_synthetic_corpus(cfg).groups) {
    for (const auto& t : g.traces) EXPECT_FALSE(*t.correct);
  }
}

TEST(SynthTrace, StepMeansMatchTargets) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SynthProfile p;
    p.noise_std = 0.2;
    detail::SynthRng rng(seed, 0, 0);
    const auto targets = synth_step_targets(p, rng);
    const Trace t = segment_steps(synth_trace(p, targets, rng, "5"));
    const auto id = information_density(t);
    ASSERT_EQ(id.size(), targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) EXPECT_NEAR(id.values[i], targets[i], 1e-9);
  }
}

TEST(SynthTrace, PlantedSpikesAreDetected) {
  SynthProfile p;
  p.kind = ProfileKind::flat_spiky;
  p.n_steps = {40, 60};
  p.noise_std = 0.1;
  p.n_spikes = 3;
  p.spike_magnitude = 1.0;  // ten times the noise
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    detail::SynthRng rng(seed, 1, 2);
    const auto targets = synth_step_targets(p, rng);
    EXPECT_GE(uid_scores(targets).local_k2, 1u) << "seed " << seed;
  }
}

TEST(SynthTrace, SmoothDecayIsStrictlyDecreasing) {
  SynthProfile p;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    detail::SynthRng rng(seed, 0, 0);
    const auto targets = synth_step_targets(p, rng);
    ASSERT_GE(targets.size(), 20u);
    ASSERT_LE(targets.size(), 40u);
    for (std::size_t i = 1; i < targets.size(); ++i) EXPECT_LT(targets[i], targets[i - 1]);
    EXPECT_EQ(uid_scores(targets).local_k3, 0u);
  }
}

TEST(SynthRng, StreamsAreIndependentAndInRange) {
  detail::SynthRng a(1, 2, 3), b(1, 2, 3), c(1, 2, 4);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform01();
    EXPECT_EQ(x, b.uniform01());
    differs = differs || x != c.uniform01();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    const auto k = a.uniform_int(3, 7);
    b.uniform_int(3, 7);
    c.uniform_int(3, 7);
    EXPECT_GE(k, 3u);
    EXPECT_LE(k, 7u);
  }
  EXPECT_TRUE(differs);
}

TEST(SynthConfig, Validation) {
  SynthConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.n_questions = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.p_correct = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.correct.n_steps = {5, 4};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.correct.tokens_per_step = {1, 3};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.incorrect.n_spikes = 100;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.incorrect.noise_std = -1;
  EXPECT_THROW(generate_synthetic_corpus(cfg), ConfigError);
}

}  // namespace
}  // namespace uidtrace

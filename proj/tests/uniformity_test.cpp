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

#include "uidtrace/uniformity.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "uidtrace/synth.hpp"

namespace uidtrace {
namespace {

NormalizedVector nv_of(std::vector<double> v) { return minmax_normalize(v); }

TEST(MinmaxNormalize, Examples) {
  const auto a = nv_of({1, 2, 3});
  EXPECT_EQ(a.values, (std::vector<double>{0, 0.5, 1}));
  EXPECT_FALSE(a.degenerate);
  EXPECT_EQ(a.min_raw, 1);
  EXPECT_EQ(a.max_raw, 3);
  const auto c = nv_of({5, 5, 5});
  EXPECT_EQ(c.values, (std::vector<double>{0, 0, 0}));
  EXPECT_TRUE(c.degenerate);
  EXPECT_TRUE(nv_of({7}).degenerate);
  EXPECT_THROW(minmax_normalize(std::vector<double>{}), DomainError);
}

TEST(MinmaxNormalize, RandomVectorsSpanUnitInterval) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(2 + rng() % 60);
    for (auto& x : v) x = g(rng);
    const auto nv = minmax_normalize(v);
    const auto [lo, hi] = std::minmax_element(nv.values.begin(), nv.values.end());
    EXPECT_EQ(*lo, 0.0);
    EXPECT_EQ(*hi, 1.0);
    for (double x : nv.values) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(GlobalVariance, Examples) {
  EXPECT_NEAR(global_variance(nv_of({0, 0.5, 1})), 0.166667, 1e-6);
  EXPECT_NEAR(global_variance(nv_of({0, 0.5, 1})), 1.0 / 6.0, 1e-15);
  EXPECT_EQ(global_variance(nv_of({0, 1})), 0.25);
  EXPECT_EQ(global_variance(nv_of({4, 4, 4})), 0.0);
}

TEST(LocalDeltas, Examples) {
  NormalizedVector nv{{0.1, 0.4, 0.2}, 0, 1, false};
  const auto ld = local_deltas(nv);
  ASSERT_EQ(ld.deltas.size(), 2u);
  EXPECT_NEAR(ld.deltas[0], 0.3, 1e-15);
  EXPECT_NEAR(ld.deltas[1], -0.2, 1e-15);

  const auto alt = local_deltas(nv_of({0, 1, 0, 1, 0}));
  EXPECT_EQ(alt.mu, 0.0);
  EXPECT_EQ(alt.sigma, 1.0);

  for (double d : local_deltas(nv_of({0.1, 0.2, 0.2, 0.9, 3.0})).deltas) EXPECT_GE(d, 0.0);

  const auto single = local_deltas(nv_of({0.3}));
  EXPECT_TRUE(single.deltas.empty());
  EXPECT_EQ(single.mu, 0.0);
  EXPECT_EQ(single.sigma, 0.0);
}

TEST(CountSpikesFalls, StrictThresholds) {
  // one step up among flat stretches: deltas are nine 0s and a single 1
  const auto ld = local_deltas(nv_of({0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1}));
  EXPECT_NEAR(ld.mu, 0.1, 1e-15);
  EXPECT_NEAR(ld.sigma, 0.3, 1e-15);
  EXPECT_EQ(count_spikes_falls(ld, 2.0), (SpikeCounts{1, 0}));
  // 1.0 is not strictly above 0.1 + 3 * 0.3
  EXPECT_EQ(count_spikes_falls(ld, 3.0), (SpikeCounts{0, 0}));

  EXPECT_EQ(count_spikes_falls(local_deltas(nv_of({0, 1, 0, 1, 0})), 2.0), (SpikeCounts{0, 0}));
  EXPECT_EQ(count_spikes_falls(local_deltas(nv_of({2, 2, 2, 2})), 2.0), (SpikeCounts{0, 0}));
}

TEST(CountSpikesFalls, FallsAreCounted) {
  const auto ld = local_deltas(nv_of({1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(count_spikes_falls(ld, 2.0), (SpikeCounts{0, 1}));
}

TEST(MeanAbsDelta, Examples) {
  EXPECT_DOUBLE_EQ(mean_abs_delta(std::vector<double>{0.3, -0.2}), 0.25);
  EXPECT_EQ(mean_abs_delta(std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_EQ(mean_abs_delta(std::vector<double>{}), 0.0);
  // telescoping: a monotone normalized vector climbs exactly 1 overall
  for (std::size_t n = 2; n < 40; ++n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i * i);
    const auto ld = local_deltas(minmax_normalize(v));
    EXPECT_NEAR(mean_abs_delta(ld.deltas), 1.0 / static_cast<double>(n - 1), 1e-12);
  }
}

TEST(DetectEntropyPeaks, Examples) {
  EXPECT_EQ(detect_entropy_peaks(std::vector<double>{0, 0, 0, 4, 0, 0, 0, 0, 0, 0}),
            (std::vector<std::size_t>{3}));
  EXPECT_TRUE(detect_entropy_peaks(std::vector<double>{2, 2, 2}).empty());
  EXPECT_TRUE(detect_entropy_peaks(std::vector<double>{2}).empty());
  EXPECT_THROW(detect_entropy_peaks(DensityVector{{1.0}, DensityKind::logprob, {}}), DomainError);
}

TEST(UidScores, DegenerateBundles) {
  const auto one = uid_scores(std::vector<double>{0.7});
  EXPECT_TRUE(one.degenerate);
  EXPECT_EQ(one.n_steps, 1u);
  EXPECT_EQ(one.variance, 0.0);
  EXPECT_EQ(one.local_k2 + one.local_k3, 0u);
  const auto flat = uid_scores(std::vector<double>{0.7, 0.7, 0.7});
  EXPECT_TRUE(flat.degenerate);
  EXPECT_EQ(flat.n_steps, 3u);
  const auto none = uid_scores(std::vector<double>{});
  EXPECT_TRUE(none.degenerate);
}

TEST(UidScores, TwoStepsHitMaximumVariance) {
  const auto s = uid_scores(std::vector<double>{0.2, 1.7});
  EXPECT_FALSE(s.degenerate);
  EXPECT_EQ(s.variance, 0.25);
  EXPECT_EQ(s.mean_abs_delta, 1.0);
}

TEST(UidScores, InvariantsOnRandomVectors) {
  std::mt19937_64 rng(17);
  std::exponential_distribution<double> e(1.0);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> v(1 + rng() % 80);
    for (auto& x : v) x = e(rng);
    const auto s = uid_scores(v);
    EXPECT_GE(s.variance, 0.0);
    EXPECT_LE(s.variance, 0.25);
    EXPECT_LE(s.spikes_k3, s.spikes_k2);
    EXPECT_LE(s.falls_k3, s.falls_k2);
    EXPECT_EQ(s.local_k2, s.spikes_k2 + s.falls_k2);
    EXPECT_EQ(s.local_k3, s.spikes_k3 + s.falls_k3);
  }
}

TEST(UidScores, AgreesWithBruteForce) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> v(2 + rng() % 60);
    for (auto& x : v) x = u(rng);
    if (rng() % 4 == 0) v[rng() % v.size()] += 20.0;  // plant an outlier
    const auto s = uid_scores(v);
    const auto n = oracle::normalize(v);
    EXPECT_NEAR(s.variance, static_cast<double>(oracle::variance(n)), 1e-12);
    const auto c2 = oracle::spikes_falls(n, 2);
    const auto c3 = oracle::spikes_falls(n, 3);
    EXPECT_EQ(s.spikes_k2, c2.spikes);
    EXPECT_EQ(s.falls_k2, c2.falls);
    EXPECT_EQ(s.spikes_k3, c3.spikes);
    EXPECT_EQ(s.falls_k3, c3.falls);
    EXPECT_NEAR(s.mean_abs_delta, static_cast<double>(oracle::mean_abs_delta(n)), 1e-12);
  }
}

TEST(UidScores, AffineInvariance) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(2 + rng() % 50);
    for (auto& x : v) x = u(rng);
    const double a = scale(rng), b = shift(rng);
    std::vector<double> w(v.size());
    std::transform(v.begin(), v.end(), w.begin(), [&](double x) { return a * x + b; });
    const auto s = uid_scores(v), t = uid_scores(w);
    EXPECT_EQ(s.local_k2, t.local_k2);
    EXPECT_EQ(s.local_k3, t.local_k3);
    EXPECT_NEAR(s.variance, t.variance, 1e-9);
  }
}

TEST(UidScoreBundle, SyntheticProfiles) {
  SynthConfig cfg;
  cfg.n_questions = 40;
  cfg.n_samples = 5;
  cfg.p_correct = 0.4;  // smooth traces in the minority, so the median is a spiky one
  const Corpus corpus = generate_synthetic_corpus(cfg);
  std::vector<std::pair<UidScores, bool>> scored;
  std::vector<double> variances;
  for (const auto& g : corpus.groups) {
    for (const auto& t : g.traces) {
      scored.emplace_back(uid_score_bundle(segment_steps(t)), *t.correct);
      variances.push_back(scored.back().first.variance);
    }
  }
  std::sort(variances.begin(), variances.end());
  const std::size_t m = variances.size() / 2;
  const double median = variances.size() % 2 ? variances[m] : (variances[m - 1] + variances[m]) / 2.0;

  double var_correct = 0.0, var_incorrect = 0.0;
  std::size_t n_correct = 0, spiky = 0, spiky_flagged = 0;
  for (const auto& [s, correct] : scored) {
    if (correct) {
      EXPECT_EQ(s.local_k2, 0u);
      EXPECT_GT(s.variance, median);
      var_correct += s.variance;
      ++n_correct;
    } else {
      var_incorrect += s.variance;
      ++spiky;
      spiky_flagged += s.local_k3 >= 1 ? 1 : 0;
    }
  }
  ASSERT_GT(n_correct, 0u);
  ASSERT_GT(spiky, 0u);
  EXPECT_GT(var_correct / static_cast<double>(n_correct), var_incorrect / static_cast<double>(spiky));
  // planted spikes are found in the large majority of incorrect traces
  EXPECT_GT(static_cast<double>(spiky_flagged), 0.9 * static_cast<double>(spiky));
}

TEST(UidScoreBundle, SingleStepTraceIsDegenerate) {
  Trace t;
  t.tokens = {{"a", -0.1, 0.3, {}}, {"b", -0.1, 0.5, {}}};
  const auto s = uid_score_bundle(segment_steps(t));
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.n_steps, 1u);
  EXPECT_EQ(s, (UidScores{0, 0, 0, 0, 0, 0, 0, 0.0, 1, true}));
}

}  // namespace
}  // namespace uidtrace

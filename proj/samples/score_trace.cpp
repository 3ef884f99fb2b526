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

// Scores a hand-built trace with the library API and picks the best of a
// small synthetic group.

#include <cstdio>

#include "uidtrace/scoring.hpp"
#include "uidtrace/selection_eval.hpp"
#include "uidtrace/synth.hpp"

int main() {
  using namespace uidtrace;

  // Three steps separated by "\n\n"; per-token entropies in nats.
  Trace trace;
  trace.question_id = "demo";
  trace.sample_id = "0";
  trace.tokens = {
      {"Let x = 2.", -0.40, 1.10, {}}, {"\n\n", -0.05, 0.90, {}},
      {"Then 2x", -0.30, 0.70, {}},    {" = 4.", -0.20, 0.60, {}},
      {"\n\n", -0.02, 0.40, {}},       {"\\boxed{4}", -0.01, 0.10, {}},
  };

  const ScoreBundle b = score_trace(trace, std::string("4"));
  std::printf("steps %zu, answer %s, correct %d\n", b.n_steps, b.answer.value_or("-").c_str(), b.correct);
  for (std::size_t i = 0; i < b.id->size(); ++i) std::printf("  ID[%zu] = %.4f\n", i, b.id->values[i]);
  std::printf("variance %.4f, local_k2 %zu, local_k3 %zu, effort %.4f\n", b.uid->variance, b.uid->local_k2,
              b.uid->local_k3, *b.effort);

  // Best-of-5 on one synthetic question.
  SynthConfig cfg;
  cfg.n_questions = 1;
  const Corpus corpus = generate_synthetic_corpus(cfg);
  const CorpusScores scores = score_corpus(corpus);
  for (const char* name : {"low_uid_3s", "high_uid_var", "low_ent"}) {
    const Selection s = select_trace(corpus.groups[0], *find_method(name), scores[0]);
    const Trace& pick = corpus.groups[0].traces[*s.index];
    std::printf("%-13s -> sample %s (%s)\n", name, pick.sample_id.c_str(), *pick.correct ? "correct" : "incorrect");
  }
  return 0;
}

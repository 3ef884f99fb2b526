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

// Command-line front end: sample, score, select, report, synth.
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uidtrace/density_metrics.hpp"
#include "uidtrace/error.hpp"
#include "uidtrace/parallel.hpp"
#include "uidtrace/sampling_client.hpp"
#include "uidtrace/scoring.hpp"
#include "uidtrace/selection_eval.hpp"
#include "uidtrace/synth.hpp"
#include "uidtrace/trace_model.hpp"

namespace uidtrace::cli {

enum ExitCode : int { kOk = 0, kDataError = 1, kUsageError = 2 };

struct ScoringFlags {
  std::string entropy_source = "auto";
  std::string delimiter = "\\n\\n";
  bool think_only = false;
  double effort_k = 2.0;
  double effort_c = 1.0;
  double peak_k = 2.0;
};

struct CliConfig {
  std::string config_file;
  unsigned jobs = default_jobs();
  int verbosity = 0;

  // sample
  std::string questions_file;
  SamplingConfig sampling;

  // score / select / report
  std::string input;
  std::string output;
  ScoringFlags scoring;
  std::string methods = "main";
  std::size_t bins = 50;

  // synth
  SynthConfig synth;
};

// Expands \n, \t and \\ so delimiters can be given on the command line.
inline std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char c = s[i + 1];
      if (c == 'n') { out += '\n'; ++i; continue; }
      if (c == 't') { out += '\t'; ++i; continue; }
      if (c == 'r') { out += '\r'; ++i; continue; }
      if (c == '\\') { out += '\\'; ++i; continue; }
    }
    out += s[i];
  }
  return out;
}

inline ScoreOptions to_score_options(const ScoringFlags& f) {
  ScoreOptions opts;
  auto src = parse_entropy_source(f.entropy_source);
  if (!src) throw ConfigError("unknown entropy source '" + f.entropy_source + "' (auto|provided|topk)");
  opts.entropy_source = *src;
  opts.segment.delimiter = unescape(f.delimiter);
  if (opts.segment.delimiter.empty()) throw ConfigError("delimiter must be non-empty");
  opts.segment.scope = f.think_only ? ScoringScope::think_only : ScoringScope::full;
  opts.effort = {f.effort_k, f.effort_c};
  opts.effort.validate();
  if (!(f.peak_k > 0.0)) throw ConfigError("peak-k must be > 0");
  opts.peak_k = f.peak_k;
  return opts;
}

inline std::vector<MethodSpec> parse_methods(const std::string& list) {
  if (list == "main") return {main_methods().begin(), main_methods().end()};
  if (list == "all") return {all_methods().begin(), all_methods().end()};
  std::vector<MethodSpec> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    auto m = find_method(name);
    if (!m) throw ConfigError("unknown method '" + name + "'");
    out.push_back(*m);
  }
  if (out.empty()) throw ConfigError("no methods selected");
  return out;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key = value lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline bool truthy(const std::string& v) { return v == "true" || v == "1" || v == "yes" || v == "on"; }

inline void warn(std::ostream& err, const std::string& msg) { err << "uidtrace: warning: " << msg << '\n'; }

inline void info(std::ostream& err, const CliConfig& cfg, const std::string& msg) {
  if (cfg.verbosity > 0) err << "uidtrace: " << msg << '\n';
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline void remove_existing(const std::string& path) {
  std::error_code ec;
  std::filesystem::remove(path, ec);
  if (ec) throw IoError("cannot replace '" + path + "': " + ec.message());
}

}  // namespace detail

class App {
 public:
  App() : app_("uidtrace: step-level information density and uniformity scoring of reasoning traces", "uidtrace") {
    app_.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app_.require_subcommand(1);
    app_.fallthrough();
    app_.add_option("--config", cfg_.config_file, "key = value file merged under the flags (flags win)");
    app_.add_option("-j,--jobs", cfg_.jobs, "worker threads")->check(CLI::PositiveNumber);
    app_.add_flag("-v,--verbose", cfg_.verbosity, "more diagnostics on stderr");

    build_sample();
    build_score();
    select_ = build_evaluate("select", "best-of-N selection per question; writes selections too");
    report_ = build_evaluate("report", "accuracy table, JSON report and averaged ID curves");
    build_synth();
  }

  int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    try {
      args = merge_config(std::move(args));
    } catch (const ConfigError& e) {
      err << "uidtrace: " << e.what() << '\n';
      return kUsageError;
    }
    try {
      std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
      app_.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
      // Help requests exit 0 and print the selected subcommand's help.
      return app_.exit(e, out, err) == 0 ? kOk : kUsageError;
    }

    try {
      if (*sample_) return do_sample(out, err);
      if (*score_) return do_score(out, err);
      if (*select_) return do_evaluate(out, err, true);
      if (*report_) return do_evaluate(out, err, false);
      if (*synth_) return do_synth(out, err);
    } catch (const ConfigError& e) {
      err << "uidtrace: " << e.what() << '\n';
      return kUsageError;
    } catch (const Error& e) {
      err << "uidtrace: error: " << e.what() << '\n';
      return kDataError;
    } catch (const std::exception& e) {
      err << "uidtrace: error: " << e.what() << '\n';
      return kDataError;
    }
    return kUsageError;
  }

  const CliConfig& config() const { return cfg_; }

 private:
  void add_scoring_flags(CLI::App* sub) {
    auto& s = cfg_.scoring;
    sub->add_option("--entropy-source", s.entropy_source, "per-token entropy source")
        ->check(CLI::IsMember({"auto", "provided", "topk"}));
    sub->add_option("--delimiter", s.delimiter, "step delimiter (escapes \\n \\t allowed)");
    sub->add_flag("--think-only", s.think_only, "score only tokens inside <think>...</think>");
    sub->add_option("--effort-k", s.effort_k, "processing-effort exponent (> 1)");
    sub->add_option("--effort-c", s.effort_c, "processing-effort per-step cost (> 0)");
    sub->add_option("--peak-k", s.peak_k, "entropy peak threshold multiplier");
  }

  void build_sample() {
    auto& c = cfg_.sampling;
    sample_ = app_.add_subcommand("sample", "sample N traces per question from an OpenAI-compatible endpoint");
    sample_->add_option("--questions-file", cfg_.questions_file,
                        "JSONL with question_id, question, gold_answer")
        ->required()
        ->check(CLI::ExistingFile);
    sample_->add_option("-o,--output", cfg_.output, "corpus file to write")->required();
    sample_->add_option("--endpoint", c.endpoint_url, "base URL; requests go to {endpoint}/chat/completions");
    sample_->add_option("--model", c.model_name, "model name sent in the request")->required();
    sample_->add_option("--samples", c.n_samples, "samples per question")->check(CLI::PositiveNumber);
    sample_->add_option("--temperature", c.temperature, "sampling temperature");
    sample_->add_option("--top-p", c.top_p, "nucleus sampling mass");
    sample_->add_option("--top-k", c.top_k, "top-k sampling (sent as extra body)");
    sample_->add_option("--seed", c.seed, "base seed; sample i uses seed + i");
    sample_->add_option("--max-tokens", c.max_tokens, "generation limit per sample");
    sample_->add_option("--top-logprobs", c.top_logprobs_requested, "alternatives returned per token");
    sample_->add_option("--timeout", c.request_timeout, "request timeout in seconds");
    sample_->add_option("--retries", c.max_retries, "retries for transient failures");
    sample_->add_option("--concurrency", c.max_concurrency, "in-flight requests per question");
    sample_->add_option("--system-prompt", c.system_prompt, "optional system message");
    sample_->add_option("--user-template", c.user_template, "user message; {question} is replaced");
  }

  void build_score() {
    score_ = app_.add_subcommand("score", "attach UID, proxy and baseline scores to every corpus record");
    score_->add_option("-i,--input", cfg_.input, "corpus file")->required()->check(CLI::ExistingFile);
    score_->add_option("-o,--output", cfg_.output, "scored corpus file (stdout when empty)");
    add_scoring_flags(score_);
  }

  CLI::App* build_evaluate(const std::string& name, const std::string& help) {
    auto* sub = app_.add_subcommand(name, help);
    sub->add_option("-i,--input", cfg_.input, "corpus file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", cfg_.output,
                    "output prefix: PREFIX.tsv, PREFIX.json, PREFIX.curves.csv (table to stdout when empty)");
    sub->add_option("--methods", cfg_.methods, "comma-separated method names, or main | all");
    sub->add_option("--bins", cfg_.bins, "curve positions")->check(CLI::PositiveNumber);
    add_scoring_flags(sub);
    return sub;
  }

  void build_synth() {
    auto& s = cfg_.synth;
    synth_ = app_.add_subcommand("synth", "generate a seeded synthetic corpus");
    synth_->add_option("--questions", s.n_questions, "number of questions")->check(CLI::PositiveNumber);
    synth_->add_option("--samples", s.n_samples, "samples per question")->check(CLI::PositiveNumber);
    synth_->add_option("--seed", s.seed, "generator seed");
    synth_->add_option("--p-correct", s.p_correct, "probability a sample is correct")->check(CLI::Range(0.0, 1.0));
    synth_->add_option("-o,--output", cfg_.output, "corpus file (stdout when empty)");
    synth_->add_option("--correct-steps-min", s.correct.n_steps.min, "smooth_decay step count, low");
    synth_->add_option("--correct-steps-max", s.correct.n_steps.max, "smooth_decay step count, high");
    synth_->add_option("--correct-base", s.correct.base_entropy, "smooth_decay starting entropy");
    synth_->add_option("--decay-rate", s.correct.decay_rate, "smooth_decay exponential rate");
    synth_->add_option("--correct-noise", s.correct.noise_std, "smooth_decay per-step noise std");
    synth_->add_option("--incorrect-steps-min", s.incorrect.n_steps.min, "flat_spiky step count, low");
    synth_->add_option("--incorrect-steps-max", s.incorrect.n_steps.max, "flat_spiky step count, high");
    synth_->add_option("--incorrect-base", s.incorrect.base_entropy, "flat_spiky level");
    synth_->add_option("--incorrect-noise", s.incorrect.noise_std, "flat_spiky per-step noise std");
    synth_->add_option("--spikes", s.incorrect.n_spikes, "planted spikes per flat_spiky trace");
    synth_->add_option("--spike-magnitude", s.incorrect.spike_magnitude, "additive spike height");
    synth_->add_option("--tokens-per-step-min", tokens_min_, "tokens per step, low (>= 2)");
    synth_->add_option("--tokens-per-step-max", tokens_max_, "tokens per step, high");
  }

  // Injects config-file entries right after the subcommand name so that any
  // explicit flag, which comes later, takes precedence.
  std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    const auto entries = detail::read_config_file(path);

    std::size_t sub_pos = 0;
    CLI::App* sub = nullptr;
    for (std::size_t i = 1; i < args.size() && !sub; ++i) {
      for (auto* s : app_.get_subcommands({})) {
        if (s->get_name() == args[i]) {
          sub = s;
          sub_pos = i;
        }
      }
    }
    if (!sub) return args;

    std::vector<std::string> injected;
    for (const auto& [key, value] : entries) {
      const std::string flag = "--" + key;
      const CLI::Option* opt = sub->get_option_no_throw(flag);
      if (!opt) opt = app_.get_option_no_throw(flag);
      if (!opt || key == "config") throw ConfigError("config key '" + key + "' is not a flag of '" + sub->get_name() + "'");
      if (opt->get_expected_min() == 0) {
        if (detail::truthy(value)) injected.push_back(flag);
      } else {
        injected.push_back(flag);
        injected.push_back(value);
      }
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, injected.begin(), injected.end());
    return args;
  }

  int do_sample(std::ostream& out, std::ostream& err) {
    (void)out;
    cfg_.sampling.validate();
    const auto questions = read_questions(cfg_.questions_file);
    detail::remove_existing(cfg_.output);
    std::size_t written = 0;
    for (const auto& q : questions) {
      detail::info(err, cfg_, "sampling question " + q.question_id);
      QuestionGroup g = sample_traces(q, cfg_.sampling);
      written += write_corpus(std::span(&g, 1), cfg_.output);
    }
    detail::info(err, cfg_, "wrote " + std::to_string(written) + " records to " + cfg_.output);
    return kOk;
  }

  int do_score(std::ostream& out, std::ostream& err) {
    const ScoreOptions opts = to_score_options(cfg_.scoring);
    Corpus corpus = read_corpus(cfg_.input);
    const CorpusScores scores = score_corpus(corpus, opts, cfg_.jobs);
    std::size_t missing_dist = 0, missing_entropy = 0;
    for (std::size_t g = 0; g < corpus.groups.size(); ++g) {
      for (std::size_t t = 0; t < corpus.groups[g].traces.size(); ++t) {
        const auto& b = scores[g][t];
        missing_dist += b.baselines.self_certainty ? 0 : 1;
        missing_entropy += b.id ? 0 : 1;
        corpus.groups[g].traces[t].scores = score_bundle_json(b);
      }
    }
    if (missing_dist > 0) {
      detail::warn(err, std::to_string(missing_dist) +
                            " traces carry no top_logprobs; self_certainty omitted for them");
    }
    if (missing_entropy > 0) {
      detail::warn(err, std::to_string(missing_entropy) + " traces lack entropies; UID scores omitted for them");
    }
    emit_corpus(corpus, out);
    return kOk;
  }

  int do_evaluate(std::ostream& out, std::ostream& err, bool with_selections) {
    const ScoreOptions opts = to_score_options(cfg_.scoring);
    const auto methods = parse_methods(cfg_.methods);
    const Corpus corpus = read_corpus(cfg_.input);
    const CorpusScores scores = score_corpus(corpus, opts, cfg_.jobs);
    EvaluationReport report = evaluate_corpus(corpus, scores, methods, cfg_.jobs);
    if (report.n_excluded > 0) {
      detail::warn(err, std::to_string(report.n_excluded) + " question groups without gold_answer excluded");
    }
    for (const auto& r : report.per_method) {
      if (r.n_skipped > 0) {
        detail::warn(err, std::string(r.spec.name) + " skipped on " + std::to_string(r.n_skipped) +
                              " questions (score unavailable)");
      }
    }
    report.metadata["entropy_source"] = std::string(to_string(opts.entropy_source));
    report.metadata["entropy_sources_used"] = sources_used(scores);
    report.metadata["delimiter"] = opts.segment.delimiter;
    report.metadata["scoring_scope"] = cfg_.scoring.think_only ? "think_only" : "full";
    report.metadata["bins"] = cfg_.bins;
    copy_trace_meta(corpus, report.metadata);

    const CurveAggregate curves = aggregate_id_curves(corpus, scores, cfg_.bins);
    std::ostringstream table, selections, curve_csv;
    write_report_table(table, report);
    if (with_selections) write_selections(selections, report);
    write_curves_csv(curve_csv, curves);

    if (cfg_.output.empty()) {
      out << table.str();
      if (with_selections) out << '\n' << selections.str();
      return kOk;
    }
    detail::write_text_file(cfg_.output + ".tsv", table.str());
    detail::write_text_file(cfg_.output + ".json", report_json(report).dump(2) + "\n");
    detail::write_text_file(cfg_.output + ".curves.csv", curve_csv.str());
    if (with_selections) detail::write_text_file(cfg_.output + ".selections.tsv", selections.str());
    detail::info(err, cfg_, "wrote " + cfg_.output + ".{tsv,json,curves.csv}");
    return kOk;
  }

  int do_synth(std::ostream& out, std::ostream& err) {
    auto& s = cfg_.synth;
    s.correct.tokens_per_step = {tokens_min_, tokens_max_};
    s.incorrect.tokens_per_step = {tokens_min_, tokens_max_};
    s.validate();
    const Corpus corpus = generate_synthetic_corpus(s, cfg_.jobs);
    detail::info(err, cfg_, "generated " + std::to_string(corpus.trace_count()) + " traces");
    emit_corpus(corpus, out);
    return kOk;
  }

  void emit_corpus(const Corpus& corpus, std::ostream& out) {
    if (cfg_.output.empty()) {
      for (const auto& g : corpus.groups) {
        for (const auto& t : g.traces) out << serialize_trace_line(t) << '\n';
      }
      return;
    }
    detail::remove_existing(cfg_.output);
    write_corpus(corpus.groups, cfg_.output);
  }

  static Json sources_used(const CorpusScores& scores) {
    std::size_t provided = 0, topk = 0;
    for (const auto& g : scores) {
      for (const auto& b : g) {
        if (!b.id) continue;
        (b.entropy_source == EntropySource::provided ? provided : topk) += 1;
      }
    }
    Json j = Json::object();
    j["provided"] = provided;
    j["topk"] = topk;
    if (topk > 0) j["note"] = "topk entropies are renormalized over the returned alternatives (lower-biased)";
    return j;
  }

  static void copy_trace_meta(const Corpus& corpus, Json& metadata) {
    for (const auto& g : corpus.groups) {
      for (const auto& t : g.traces) {
        if (!t.meta.is_object()) continue;
        for (const char* key : {"model", "base_seed", "synthetic"}) {
          if (t.meta.contains(key) && !metadata.contains(key)) metadata[key] = t.meta[key];
        }
        if (t.meta.contains("seed") && !metadata.contains("seed") && !t.meta.contains("base_seed")) {
          metadata["seed"] = t.meta["seed"];
        }
        return;
      }
    }
  }

  CLI::App app_;
  CliConfig cfg_;
  std::size_t tokens_min_ = 2;
  std::size_t tokens_max_ = 5;
  CLI::App* sample_ = nullptr;
  CLI::App* score_ = nullptr;
  CLI::App* select_ = nullptr;
  CLI::App* report_ = nullptr;
  CLI::App* synth_ = nullptr;
};

// Entry point shared by the binary and the tests. args[0] is the program name.
inline int execute(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  App app;
  return app.run(args, out, err);
}

}  // namespace uidtrace::cli

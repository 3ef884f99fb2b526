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

// Trace data model, the line-delimited corpus record format, step
// segmentation and answer matching.
#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uidtrace/error.hpp"

namespace uidtrace {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kDefaultDelimiter = "\n\n";

struct TokenRecord {
  std::string text;
  double logprob = 0.0;  // nats, <= 0
  std::optional<double> entropy;  // nats, >= 0
  // Alternative tokens with their log-probabilities, in provider order.
  // Empty means the record carried no distribution.
  std::vector<std::pair<std::string, double>> top_logprobs;

  bool has_top_logprobs() const { return !top_logprobs.empty(); }
  bool operator==(const TokenRecord&) const = default;
};

// Inclusive token range [start, end] of one reasoning step.
struct StepSpan {
  std::size_t index = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start + 1; }
  bool operator==(const StepSpan&) const = default;
};

struct Trace {
  std::string question_id;
  std::string sample_id;
  std::optional<std::string> gold_answer;
  std::vector<TokenRecord> tokens;
  std::vector<StepSpan> steps;  // derived, never serialized
  std::optional<std::string> extracted_answer;
  std::optional<bool> correct;  // external verdict, overrides matching
  Json meta;    // null when absent
  Json scores;  // null when absent; written by `uidtrace score`
  Json extra;   // unrecognized top-level fields, kept for lossless rewrite

  std::string text() const {
    std::string out;
    for (const auto& t : tokens) out += t.text;
    return out;
  }
};

struct QuestionGroup {
  std::string question_id;
  std::optional<std::string> gold_answer;
  std::vector<Trace> traces;
};

struct Corpus {
  std::vector<QuestionGroup> groups;
  Json metadata = Json::object();

  std::size_t trace_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.traces.size();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Record format

namespace detail {

inline const Json& require_field(const Json& record, const char* name) {
  auto it = record.find(name);
  if (it == record.end()) {
    throw SchemaError(std::string("missing required field '") + name + "'");
  }
  return *it;
}

inline std::string as_text(const Json& value, const std::string& field) {
  if (!value.is_string()) {
    throw ParseError("field '" + field + "' must be a string");
  }
  return value.get<std::string>();
}

inline double as_number(const Json& value, const std::string& field) {
  if (!value.is_number()) {
    throw ParseError("field '" + field + "' must be a number");
  }
  return value.get<double>();
}

inline TokenRecord parse_token(const Json& j, std::size_t i) {
  const std::string where = "tokens[" + std::to_string(i) + "]";
  if (!j.is_object()) throw ParseError("field '" + where + "' must be an object");
  TokenRecord tok;
  auto text = j.find("text");
  if (text == j.end()) throw SchemaError("missing required field '" + where + ".text'");
  tok.text = as_text(*text, where + ".text");
  auto lp = j.find("logprob");
  if (lp == j.end()) throw SchemaError("missing required field '" + where + ".logprob'");
  tok.logprob = as_number(*lp, where + ".logprob");
  if (!(tok.logprob <= 0.0)) {
    throw SchemaError(where + ".logprob: positive log-probability " + lp->dump());
  }
  if (auto h = j.find("entropy"); h != j.end()) {
    tok.entropy = as_number(*h, where + ".entropy");
    if (!(*tok.entropy >= 0.0)) {
      throw SchemaError(where + ".entropy: negative entropy " + h->dump());
    }
  }
  if (auto top = j.find("top_logprobs"); top != j.end()) {
    if (!top->is_object()) {
      throw ParseError("field '" + where + ".top_logprobs' must be an object");
    }
    if (top->empty()) {
      throw SchemaError(where + ".top_logprobs: must contain at least one entry");
    }
    for (const auto& [alt, value] : top->items()) {
      double v = as_number(value, where + ".top_logprobs");
      if (!(v <= 0.0)) {
        throw SchemaError(where + ".top_logprobs: positive log-probability for '" +
                          alt + "'");
      }
      tok.top_logprobs.emplace_back(alt, v);
    }
  }
  return tok;
}

inline Json token_to_json(const TokenRecord& tok) {
  Json j = Json::object();
  j["text"] = tok.text;
  j["logprob"] = tok.logprob;
  if (tok.entropy) j["entropy"] = *tok.entropy;
  if (tok.has_top_logprobs()) {
    Json top = Json::object();
    for (const auto& [alt, v] : tok.top_logprobs) top[alt] = v;
    j["top_logprobs"] = std::move(top);
  }
  return j;
}

}  // namespace detail

// Parses one corpus line. Steps are left empty; see segment_steps().
inline Trace parse_trace_line(std::string_view line) {
  Json record;
  try {
    record = Json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed record: ") + e.what());
  }
  if (!record.is_object()) throw ParseError("malformed record: not a JSON object");

  Trace trace;
  trace.question_id = detail::as_text(detail::require_field(record, "question_id"), "question_id");
  trace.sample_id = detail::as_text(detail::require_field(record, "sample_id"), "sample_id");
  const Json& tokens = detail::require_field(record, "tokens");
  if (!tokens.is_array()) throw ParseError("field 'tokens' must be an array");
  trace.tokens.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    trace.tokens.push_back(detail::parse_token(tokens[i], i));
  }

  for (const auto& [key, value] : record.items()) {
    if (key == "question_id" || key == "sample_id" || key == "tokens") continue;
    if (key == "gold_answer") {
      trace.gold_answer = detail::as_text(value, key);
    } else if (key == "extracted_answer") {
      trace.extracted_answer = detail::as_text(value, key);
    } else if (key == "correct") {
      if (!value.is_boolean()) throw ParseError("field 'correct' must be a boolean");
      trace.correct = value.get<bool>();
    } else if (key == "meta") {
      if (!value.is_object()) throw ParseError("field 'meta' must be an object");
      trace.meta = value;
    } else if (key == "scores") {
      if (!value.is_object()) throw ParseError("field 'scores' must be an object");
      trace.scores = value;
    } else {
      if (trace.extra.is_null()) trace.extra = Json::object();
      trace.extra[key] = value;
    }
  }
  return trace;
}

// Canonical single-line encoding, without the trailing newline. Lines produced
// here survive parse_trace_line -> serialize_trace_line byte for byte.
inline std::string serialize_trace_line(const Trace& trace) {
  Json j = Json::object();
  j["question_id"] = trace.question_id;
  j["sample_id"] = trace.sample_id;
  if (trace.gold_answer) j["gold_answer"] = *trace.gold_answer;
  Json tokens = Json::array();
  for (const auto& tok : trace.tokens) tokens.push_back(detail::token_to_json(tok));
  j["tokens"] = std::move(tokens);
  if (trace.extracted_answer) j["extracted_answer"] = *trace.extracted_answer;
  if (trace.correct) j["correct"] = *trace.correct;
  if (!trace.meta.is_null()) j["meta"] = trace.meta;
  if (!trace.scores.is_null()) j["scores"] = trace.scores;
  if (trace.extra.is_object()) {
    for (const auto& [key, value] : trace.extra.items()) j[key] = value;
  }
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

// ---------------------------------------------------------------------------
// Step segmentation

enum class ScoringScope {
  full,        // every generated token
  think_only,  // only tokens inside the thinking markup
};

struct SegmentOptions {
  std::string delimiter{kDefaultDelimiter};
  ScoringScope scope = ScoringScope::full;
  std::string think_open = "<think>";
  std::string think_close = "</think>";
};

// Half-open token index range.
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool empty() const { return begin >= end; }
};

// Token range that gets scored. For think_only, tokens are kept when their
// characters lie strictly after the opening tag and before the closing tag;
// tokens straddling a tag are dropped. A missing opening tag yields an empty
// range; a missing closing tag extends the region to the end of the trace.
inline TokenRange scored_range(std::span<const TokenRecord> tokens, const SegmentOptions& opts) {
  if (opts.scope == ScoringScope::full) return {0, tokens.size()};
  std::string text;
  std::vector<std::size_t> starts;
  starts.reserve(tokens.size() + 1);
  for (const auto& t : tokens) {
    starts.push_back(text.size());
    text += t.text;
  }
  starts.push_back(text.size());
  auto open = text.find(opts.think_open);
  if (open == std::string::npos) return {0, 0};
  std::size_t region_begin = open + opts.think_open.size();
  std::size_t region_end = text.find(opts.think_close, region_begin);
  if (region_end == std::string::npos) region_end = text.size();

  TokenRange r{tokens.size(), tokens.size()};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (starts[i] >= region_begin) {
      r.begin = i;
      break;
    }
  }
  r.end = r.begin;
  while (r.end < tokens.size() && starts[r.end + 1] <= region_end) ++r.end;
  return r;
}

// Splits tokens[range] into steps at delimiter occurrences in the
// detokenized text. Occurrences are matched left to right without overlap.
// A token belongs to the segment holding its first non-delimiter character;
// a token made only of delimiter characters (or empty) stays with the step it
// terminates. Leading delimiter-only tokens join the first step.
inline std::vector<StepSpan> segment_tokens(std::span<const TokenRecord> tokens, TokenRange range,
                                            std::string_view delimiter = kDefaultDelimiter) {
  std::vector<StepSpan> steps;
  if (range.empty()) return steps;
  if (delimiter.empty()) throw DomainError("segment delimiter must be non-empty");

  std::string text;
  std::vector<std::size_t> starts;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    starts.push_back(text.size());
    text += tokens[i].text;
  }
  starts.push_back(text.size());

  std::vector<std::pair<std::size_t, std::size_t>> occurrences;
  for (auto pos = text.find(delimiter); pos != std::string::npos;
       pos = text.find(delimiter, pos + delimiter.size())) {
    occurrences.emplace_back(pos, pos + delimiter.size());
  }

  std::size_t next_occ = 0;  // first occurrence not entirely before the scan point
  std::size_t current_segment = 0;
  bool step_has_content = false;
  std::size_t step_start = range.begin;

  for (std::size_t k = 0; k + range.begin < range.end; ++k) {
    // Find the first character of this token outside any occurrence.
    std::optional<std::size_t> segment;
    std::size_t c = starts[k];
    while (c < starts[k + 1]) {
      while (next_occ < occurrences.size() && occurrences[next_occ].second <= c) ++next_occ;
      if (next_occ < occurrences.size() && occurrences[next_occ].first <= c) {
        c = occurrences[next_occ].second;
        continue;
      }
      segment = next_occ;  // number of occurrences that end at or before c
      break;
    }
    if (!segment) continue;
    if (step_has_content && *segment != current_segment) {
      const std::size_t idx = range.begin + k;
      steps.push_back({steps.size(), step_start, idx - 1});
      step_start = idx;
    }
    current_segment = *segment;
    step_has_content = true;
  }
  steps.push_back({steps.size(), step_start, range.end - 1});
  return steps;
}

inline Trace segment_steps(Trace trace, const SegmentOptions& opts) {
  if (opts.delimiter.empty()) throw DomainError("segment delimiter must be non-empty");
  trace.steps = segment_tokens(trace.tokens, scored_range(trace.tokens, opts), opts.delimiter);
  return trace;
}

inline Trace segment_steps(Trace trace, std::string_view delimiter = kDefaultDelimiter) {
  SegmentOptions opts;
  opts.delimiter = std::string(delimiter);
  return segment_steps(std::move(trace), opts);
}

// ---------------------------------------------------------------------------
// Answers

enum class AnswerRule {
  boxed_then_last_number,
  boxed,
  last_number,
};

// Content of the last \boxed{...} group, braces balanced.
inline std::optional<std::string> last_boxed(std::string_view text) {
  static constexpr std::string_view kTag = "\\boxed{";
  std::optional<std::string> found;
  for (auto pos = text.find(kTag); pos != std::string_view::npos; pos = text.find(kTag, pos + 1)) {
    std::size_t i = pos + kTag.size();
    int depth = 1;
    std::size_t j = i;
    for (; j < text.size() && depth > 0; ++j) {
      if (text[j] == '{') ++depth;
      if (text[j] == '}') --depth;
    }
    if (depth == 0) found = std::string(text.substr(i, j - 1 - i));
  }
  return found;
}

inline std::optional<std::string> last_number(std::string_view text) {
  static const std::regex kNumber(R"(-?\d+(?:\.\d+)?(?:/\d+)?)");
  std::optional<std::string> found;
  std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kNumber); it != std::sregex_iterator();
       ++it) {
    found = it->str();
  }
  return found;
}

inline std::optional<std::string> extract_answer(const Trace& trace,
                                                 AnswerRule rule = AnswerRule::boxed_then_last_number) {
  if (trace.tokens.empty()) return std::nullopt;
  if (rule != AnswerRule::last_number) {
    if (auto boxed = last_boxed(trace.text())) return boxed;
    if (rule == AnswerRule::boxed) return std::nullopt;
  }
  auto steps = trace.steps.empty()
                   ? segment_tokens(trace.tokens, {0, trace.tokens.size()})
                   : trace.steps;
  const auto& last = steps.back();
  std::string final_step;
  for (std::size_t i = last.start; i <= last.end; ++i) final_step += trace.tokens[i].text;
  return last_number(final_step);
}

namespace detail {

inline std::string normalize_answer(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::optional<double> parse_decimal(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  // Digits, one optional sign and one optional point only; from_chars alone
  // would accept "inf" and "nan".
  bool digit = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (!(c == '.' || (c == '-' && i == 0))) {
      return std::nullopt;
    }
  }
  if (!digit) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline std::optional<double> parse_answer_number(std::string_view s) {
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    auto num = parse_decimal(s.substr(0, slash));
    auto den = parse_decimal(s.substr(slash + 1));
    if (!num || !den || *den == 0.0) return std::nullopt;
    return *num / *den;
  }
  return parse_decimal(s);
}

}  // namespace detail

// Trimmed, case-folded text equality, or numeric equality (decimals and
// simple p/q fractions) within relative tolerance 1e-9.
inline bool answers_equal(std::string_view a, std::string_view b) {
  const std::string na = detail::normalize_answer(a);
  const std::string nb = detail::normalize_answer(b);
  if (na == nb) return true;
  auto x = detail::parse_answer_number(na);
  auto y = detail::parse_answer_number(nb);
  if (!x || !y) return false;
  return std::abs(*x - *y) <= 1e-9 * std::max(std::abs(*x), std::abs(*y));
}

// External verdict first, then the matcher. No answer counts as incorrect.
inline bool is_correct(const Trace& trace, const std::optional<std::string>& gold) {
  if (trace.correct) return *trace.correct;
  if (!gold) return false;
  auto answer = trace.extracted_answer ? trace.extracted_answer : extract_answer(trace);
  return answer && answers_equal(*answer, *gold);
}

// ---------------------------------------------------------------------------
// Corpus files

// Groups traces by question_id in first-appearance order.
inline Corpus group_traces(std::vector<Trace> traces) {
  Corpus corpus;
  std::map<std::string, std::size_t> index;
  std::vector<std::unordered_set<std::string>> seen;
  for (auto& trace : traces) {
    auto [it, inserted] = index.try_emplace(trace.question_id, corpus.groups.size());
    if (inserted) {
      corpus.groups.push_back({trace.question_id, std::nullopt, {}});
      seen.emplace_back();
    }
    auto& group = corpus.groups[it->second];
    if (!seen[it->second].insert(trace.sample_id).second) {
      throw SchemaError("duplicate sample_id '" + trace.sample_id + "' in question '" +
                        trace.question_id + "'");
    }
    if (!group.gold_answer && trace.gold_answer) group.gold_answer = trace.gold_answer;
    group.traces.push_back(std::move(trace));
  }
  return corpus;
}

namespace detail {

template <typename E>
[[noreturn]] inline void rethrow_at_line(const E& e, std::size_t line) {
  throw E("line " + std::to_string(line) + ": " + e.what());
}

}  // namespace detail

inline std::vector<Trace> read_trace_lines(std::istream& in) {
  std::vector<Trace> traces;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      traces.push_back(parse_trace_line(line));
    } catch (const ParseError& e) {
      detail::rethrow_at_line(e, lineno);
    } catch (const SchemaError& e) {
      detail::rethrow_at_line(e, lineno);
    }
  }
  return traces;
}

inline Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  Corpus corpus = group_traces(read_trace_lines(in));
  corpus.metadata["source"] = path.string();
  return corpus;
}

// Appends one line per trace and returns the number of records written.
// Every line is flushed on its own, so a failure leaves a valid prefix.
inline std::size_t write_corpus(std::span<const QuestionGroup> groups,
                                const std::filesystem::path& path) {
  std::size_t total = 0;
  for (const auto& g : groups) total += g.traces.size();
  if (total == 0) return 0;

  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  std::size_t written = 0;
  for (const auto& g : groups) {
    for (const auto& trace : g.traces) {
      std::string line = serialize_trace_line(trace);
      line += '\n';
      out.write(line.data(), static_cast<std::streamsize>(line.size()));
      out.flush();
      if (!out) {
        throw IoError("write to '" + path.string() + "' failed after " +
                      std::to_string(written) + " records");
      }
      ++written;
    }
  }
  return written;
}

}  // namespace uidtrace

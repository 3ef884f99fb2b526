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

// Samples reasoning traces with per-token logprobs from an OpenAI-compatible
// chat-completions endpoint.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "uidtrace/error.hpp"
#include "uidtrace/parallel.hpp"
#include "uidtrace/trace_model.hpp"

namespace uidtrace {

inline constexpr const char* kApiKeyEnv = "UIDTRACE_API_KEY";

struct SamplingConfig {
  std::string endpoint_url = "http://127.0.0.1:8000/v1";
  std::string model_name;
  std::size_t n_samples = 5;
  double temperature = 0.6;
  double top_p = 0.95;
  int top_k = 20;
  std::uint64_t seed = 42;
  int max_tokens = 32768;
  int top_logprobs_requested = 20;
  double request_timeout = 600.0;  // seconds
  int max_retries = 3;
  double backoff_initial = 0.5;  // seconds, doubled per retry
  unsigned max_concurrency = 4;
  std::string system_prompt;
  std::string user_template = "{question}\n\nPlease reason step by step, and put your final answer within \\boxed{}.";

  void validate() const {
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
    if (top_logprobs_requested < 1) throw ConfigError("top_logprobs must be >= 1");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (max_concurrency < 1) throw ConfigError("concurrency must be >= 1");
    if (user_template.find("{question}") == std::string::npos) {
      throw ConfigError("user template must contain {question}");
    }
  }
};

struct Question {
  std::string question_id;
  std::string prompt;
  std::string gold_answer;
};

// Questions file: one JSON object per line with question_id, question and
// gold_answer.
inline std::vector<Question> read_questions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open questions file '" + path.string() + "'");
  std::vector<Question> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + "malformed question: " + e.what());
    }
    Question q;
    try {
      q.question_id = detail::as_text(detail::require_field(j, "question_id"), "question_id");
      q.prompt = detail::as_text(detail::require_field(j, "question"), "question");
      // numeric gold answers are common in benchmark exports; keep their text
      const Json& gold = detail::require_field(j, "gold_answer");
      q.gold_answer = gold.is_number() ? gold.dump() : detail::as_text(gold, "gold_answer");
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError(where + e.what());
    }
    out.push_back(std::move(q));
  }
  return out;
}

inline std::string render_prompt(const std::string& tmpl, const std::string& question) {
  std::string out = tmpl;
  const std::string key = "{question}";
  for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + question.size())) {
    out.replace(pos, key.size(), question);
  }
  return out;
}

// Request body for one sample. One request per sample, each with its own
// seed, so samples do not share a decoding stream.
inline Json build_chat_request(const Question& q, const SamplingConfig& cfg, std::size_t sample_index) {
  Json messages = Json::array();
  if (!cfg.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", cfg.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", render_prompt(cfg.user_template, q.prompt)}});
  Json body = Json::object();
  body["model"] = cfg.model_name;
  body["messages"] = std::move(messages);
  body["temperature"] = cfg.temperature;
  body["top_p"] = cfg.top_p;
  body["top_k"] = cfg.top_k;
  body["n"] = 1;
  body["logprobs"] = true;
  body["top_logprobs"] = cfg.top_logprobs_requested;
  body["max_tokens"] = cfg.max_tokens;
  body["seed"] = cfg.seed + sample_index;
  return body;
}

namespace detail {

inline double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

// Tokens of the first choice's logprobs.content. Positive logprobs from
// provider rounding are clamped to 0; alternatives whose text collides are
// merged by adding their probabilities.
inline std::vector<TokenRecord> parse_chat_logprobs(const Json& response) {
  auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty()) {
    throw TransportError("response has no choices");
  }
  const Json& choice = (*choices)[0];
  auto logprobs = choice.find("logprobs");
  if (logprobs == choice.end() || !logprobs->is_object() || !logprobs->contains("content") ||
      !(*logprobs)["content"].is_array()) {
    throw CapabilityError(
        "endpoint returned no token logprobs; enable logprob return on the server "
        "(request sets logprobs=true and top_logprobs)");
  }
  std::vector<TokenRecord> tokens;
  for (const auto& item : (*logprobs)["content"]) {
    TokenRecord tok;
    tok.text = item.value("token", std::string{});
    tok.logprob = std::min(0.0, item.value("logprob", 0.0));
    if (auto top = item.find("top_logprobs"); top != item.end() && top->is_array()) {
      for (const auto& alt : *top) {
        const std::string text = alt.value("token", std::string{});
        const double lp = std::min(0.0, alt.value("logprob", 0.0));
        auto it = std::find_if(tok.top_logprobs.begin(), tok.top_logprobs.end(),
                               [&](const auto& e) { return e.first == text; });
        if (it == tok.top_logprobs.end()) {
          tok.top_logprobs.emplace_back(text, lp);
        } else {
          it->second = std::min(0.0, detail::log_add_exp(it->second, lp));
        }
      }
    }
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

struct EndpointUrl {
  std::string scheme_host_port;  // e.g. http://127.0.0.1:8000
  std::string base_path;         // e.g. /v1
};

inline EndpointUrl split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  EndpointUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  out.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
  return out;
}

// One chat-completions call with retries on connection failures, 429 and
// 5xx responses.
inline Json post_chat_completion(const Json& body, const SamplingConfig& cfg, const std::string& question_id) {
  const EndpointUrl ep = split_endpoint(cfg.endpoint_url);
  httplib::Client client(ep.scheme_host_port);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(cfg.request_timeout));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (const char* key = std::getenv(kApiKeyEnv); key && *key) client.set_bearer_token_auth(key);

  const std::string path = ep.base_path + "/chat/completions";
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(cfg.backoff_initial * std::pow(2.0, attempt - 1)));
    }
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw TransportError("question '" + question_id + "': HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 200));
    }
    try {
      return Json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw TransportError("question '" + question_id + "': malformed response body: " + e.what());
    }
  }
  throw TransportError("question '" + question_id + "': giving up after " + std::to_string(cfg.max_retries + 1) +
                       " attempts: " + last_error);
}

// Samples cfg.n_samples traces for one question. Samples run concurrently up
// to cfg.max_concurrency and come back ordered by sample index.
inline QuestionGroup sample_traces(const Question& q, const SamplingConfig& cfg) {
  cfg.validate();
  QuestionGroup group{q.question_id, q.gold_answer, {}};
  group.traces.resize(cfg.n_samples);
  std::size_t width = 2;
  for (std::size_t n = cfg.n_samples - 1; n >= 100; n /= 10) ++width;

  parallel_for(cfg.n_samples, cfg.max_concurrency, [&](std::size_t i) {
    const Json body = build_chat_request(q, cfg, i);
    const Json response = post_chat_completion(body, cfg, q.question_id);
    Trace t;
    t.question_id = q.question_id;
    std::string sid = std::to_string(i);
    t.sample_id = std::string(width > sid.size() ? width - sid.size() : 0, '0') + sid;
    t.gold_answer = q.gold_answer;
    t.tokens = parse_chat_logprobs(response);
    t.extracted_answer = extract_answer(segment_steps(t));
    Json meta = Json::object();
    meta["model"] = cfg.model_name;
    meta["seed"] = body["seed"];
    meta["base_seed"] = cfg.seed;
    meta["temperature"] = cfg.temperature;
    meta["top_p"] = cfg.top_p;
    meta["top_k"] = cfg.top_k;
    meta["top_logprobs"] = cfg.top_logprobs_requested;
    if (response.contains("system_fingerprint") && response["system_fingerprint"].is_string()) {
      meta["system_fingerprint"] = response["system_fingerprint"];
    }
    t.meta = std::move(meta);
    group.traces[i] = std::move(t);
  });
  return group;
}

}  // namespace uidtrace

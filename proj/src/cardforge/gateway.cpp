#include "cardforge/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "cardforge/fileio.hpp"

namespace cardforge {

using nlohmann::json;
using nlohmann::ordered_json;

Prompt make_prompt(std::string system, std::string user) {
  Prompt p;
  p.push_back(Message{"system", std::move(system)});
  p.push_back(Message{"user", std::move(user)});
  return p;
}

std::string render_prompt(const Prompt& prompt) {
  std::string out;
  for (const auto& m : prompt) {
    out += "<<" + m.role + ">>\n";
    out += m.content;
    out += "\n";
  }
  return out;
}

std::string render_rerank_request(const std::string& query,
                                  const std::vector<std::string>& candidates) {
  std::string out = "<<rerank>>\nquery: " + query + "\n";
  for (std::size_t i = 0; i < candidates.size(); ++i)
    out += "[doc " + std::to_string(i) + "]\n" + candidates[i] + "\n";
  return out;
}

std::string render_embed_request(const std::string& text) {
  return "<<embed>>\n" + text + "\n";
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::string_view data) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::vector<CallRecord> Gateway::call_log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

std::size_t Gateway::call_count(std::string_view op) const {
  std::lock_guard lock(log_mutex_);
  return static_cast<std::size_t>(
      std::count_if(log_.begin(), log_.end(),
                    [&](const CallRecord& r) { return r.op == op; }));
}

void Gateway::record(CallRecord rec) {
  std::lock_guard lock(log_mutex_);
  rec.seq = log_.size();
  log_.push_back(std::move(rec));
}

void Gateway::annotate_last_call(const std::string& outcome) {
  std::lock_guard lock(log_mutex_);
  if (!log_.empty()) log_.back().outcome = outcome;
}

std::string Gateway::call_log_jsonl() const {
  std::string out;
  for (const auto& r : call_log()) {
    ordered_json j;
    j["seq"] = r.seq;
    j["op"] = r.op;
    j["request_hash"] = r.request_hash;
    j["transport"] = r.transport;
    j["attempts"] = r.attempts;
    j["latency_ms"] = r.latency_ms;
    j["outcome"] = r.outcome;
    out += j.dump() + "\n";
  }
  return out;
}

RerankResult rank_from_scores(const std::vector<double>& scores) {
  RerankResult result;
  result.ranking.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    result.ranking.push_back(RerankItem{i, scores[i]});
  std::stable_sort(result.ranking.begin(), result.ranking.end(),
                   [](const RerankItem& a, const RerankItem& b) { return a.score > b.score; });
  return result;
}

// ---- MockGateway ---------------------------------------------------------

MockGateway::MockGateway(const std::string& script_jsonl) {
  std::istringstream in(script_jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(Errc::InvalidConfig, std::string("mock script line: ") + e.what());
    }
    MockEntry entry;
    entry.op = j.value("op", "generate");
    entry.match = j.value("match", "");
    entry.response = j.value("response", "");
    if (j.contains("scores")) entry.scores = j.at("scores").get<std::vector<double>>();
    if (j.contains("score_all")) entry.score_all = j.at("score_all").get<double>();
    if (j.contains("vector")) entry.vector = j.at("vector").get<std::vector<double>>();
    entry.error = j.value("error", "");
    add(std::move(entry));
  }
}

void MockGateway::add(MockEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

void MockGateway::add_generate(std::string match, std::string response) {
  add(MockEntry{.op = "generate", .match = std::move(match), .response = std::move(response)});
}
void MockGateway::add_rerank(std::string match, std::vector<double> scores) {
  add(MockEntry{.op = "rerank", .match = std::move(match), .scores = std::move(scores)});
}
void MockGateway::add_rerank_all(std::string match, double score) {
  add(MockEntry{.op = "rerank", .match = std::move(match), .score_all = score});
}
void MockGateway::add_embed(std::string match, std::vector<double> vec) {
  add(MockEntry{.op = "embed", .match = std::move(match), .vector = std::move(vec)});
}

MockEntry MockGateway::pick(const std::string& op, const std::string& rendered) {
  std::lock_guard lock(mutex_);
  const std::string hash = hash_hex(rendered);
  std::vector<std::size_t> matched;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const MockEntry& e = entries_[i];
    if (e.op != op) continue;
    if (e.match.empty() || e.match == hash || rendered.find(e.match) != std::string::npos)
      matched.push_back(i);
  }
  if (matched.empty()) {
    record(CallRecord{.op = op, .request_hash = hash, .transport = "mock",
                      .outcome = "unscripted", .request_text = rendered});
    throw Error(Errc::ServiceError, "UnscriptedPrompt " + hash);
  }
  std::size_t& cursor = cursors_[op + ":" + hash];
  MockEntry entry = entries_[matched[std::min(cursor, matched.size() - 1)]];
  ++cursor;

  CallRecord rec{.op = op, .request_hash = hash, .transport = "mock",
                 .outcome = "ok", .request_text = rendered};
  if (!entry.error.empty()) rec.outcome = entry.error;
  record(std::move(rec));

  if (entry.error == "auth") throw Error(Errc::AuthError, "scripted auth failure");
  if (entry.error == "rate_limited") throw Error(Errc::RateLimited, "scripted rate limit");
  if (entry.error == "timeout") throw Error(Errc::Timeout, "scripted timeout");
  if (!entry.error.empty()) throw Error(Errc::ServiceError, "scripted failure: " + entry.error);
  return entry;
}

std::string MockGateway::generate(const Prompt& prompt,
                                  const std::optional<GenerationConfig>&) {
  if (prompt.empty()) throw Error(Errc::EmptyInput, "empty prompt");
  return pick("generate", render_prompt(prompt)).response;
}

RerankResult MockGateway::rerank(const std::string& query,
                                 const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw Error(Errc::EmptyInput, "no rerank candidates");
  const MockEntry& entry = pick("rerank", render_rerank_request(query, candidates));
  std::vector<double> scores;
  if (entry.score_all) {
    scores.assign(candidates.size(), *entry.score_all);
  } else {
    scores = entry.scores;
    if (scores.size() != candidates.size())
      throw Error(Errc::ServiceError,
                  "mock rerank scripted " + std::to_string(scores.size()) +
                      " scores for " + std::to_string(candidates.size()) + " candidates");
  }
  return rank_from_scores(scores);
}

std::vector<double> MockGateway::embed(const std::string& text) {
  if (text.empty()) throw Error(Errc::EmptyInput, "empty embed input");
  return pick("embed", render_embed_request(text)).vector;
}

// ---- config --------------------------------------------------------------

GatewayConfig GatewayConfig::from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("gateway config: ") + e.what());
  }
  GatewayConfig c;
  c.base_url = j.value("base_url", "");
  c.model = j.value("model", "");
  c.rerank_url = j.value("rerank_url", "");
  c.embed_url = j.value("embed_url", "");
  c.generation.temperature = j.value("temperature", 0.2);
  c.generation.top_p = j.value("top_p", 0.9);
  c.generation.max_output_tokens = j.value("max_output_tokens", 8192);
  c.max_concurrency = j.value("max_concurrency", 4);
  c.retry_backoff_ms = j.value("retry_backoff_ms", 250);
  c.requests_per_second = j.value("requests_per_second", 0.0);
  c.timeout_ms = j.value("timeout_ms", 30000);
  c.mock_script = j.value("mock_script", "");
  if (c.generation.temperature < 0)
    throw Error(Errc::InvalidConfig, "temperature must be >= 0");
  if (c.generation.top_p <= 0 || c.generation.top_p > 1)
    throw Error(Errc::InvalidConfig, "top_p must be in (0, 1]");
  if (c.generation.max_output_tokens <= 0)
    throw Error(Errc::InvalidConfig, "max_output_tokens must be positive");
  if (c.max_concurrency <= 0)
    throw Error(Errc::InvalidConfig, "max_concurrency must be positive");
  return c;
}

// ---- HttpGateway -----------------------------------------------------------

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // /...
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(Errc::InvalidConfig, "url must start with http:// or https://: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return SplitUrl{url, "/"};
  return SplitUrl{url.substr(0, path_start), url.substr(path_start)};
}

// Counting semaphore guarding the number of in-flight requests.
class InFlightLimit {
public:
  explicit InFlightLimit(int limit) : available_(limit) {}
  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      ++available_;
    }
    cv_.notify_one();
  }

private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

class RateLimiter {
public:
  explicit RateLimiter(double requests_per_second) {
    if (requests_per_second > 0)
      min_gap_ = std::chrono::duration<double>(1.0 / requests_per_second);
  }
  void wait() {
    if (min_gap_.count() == 0) return;
    std::unique_lock lock(mutex_);
    auto now = std::chrono::steady_clock::now();
    auto earliest = last_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(min_gap_);
    if (now < earliest) {
      lock.unlock();
      std::this_thread::sleep_for(earliest - now);
      lock.lock();
    }
    last_ = std::chrono::steady_clock::now();
  }

private:
  std::mutex mutex_;
  std::chrono::steady_clock::time_point last_{};
  std::chrono::duration<double> min_gap_{0};
};

}  // namespace

struct HttpGateway::Impl {
  GatewayConfig config;
  InFlightLimit in_flight;
  RateLimiter rate;

  explicit Impl(GatewayConfig c)
      : config(std::move(c)),
        in_flight(config.max_concurrency),
        rate(config.requests_per_second) {}

  // POSTs the body with retries; returns the response body on 2xx.
  std::string post_json(const std::string& url, const std::string& body,
                        const std::string& op, int& attempts_out) {
    SplitUrl split = split_url(url);
    const char* key = std::getenv(kApiKeyEnvVar);

    std::string last_error = "unreachable";
    int last_status = 0;
    for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
      attempts_out = attempt;
      if (attempt > 1) {
        auto backoff = std::chrono::milliseconds(config.retry_backoff_ms) * (1 << (attempt - 2));
        std::this_thread::sleep_for(backoff);
      }
      rate.wait();
      in_flight.acquire();
      httplib::Client client(split.origin);
      client.set_connection_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
      client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
      httplib::Headers headers;
      if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
      auto res = client.Post(split.path, headers, body, "application/json");
      in_flight.release();

      if (!res) {
        last_status = 0;
        last_error = httplib::to_string(res.error());
        continue;  // connection errors and timeouts are retryable
      }
      if (res->status >= 200 && res->status < 300) return res->body;
      if (res->status == 401 || res->status == 403)
        throw Error(Errc::AuthError, op + " rejected with HTTP " + std::to_string(res->status));
      last_status = res->status;
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500)
        throw Error(Errc::ServiceError, op + " failed: " + last_error);
    }
    if (last_status == 429) throw Error(Errc::RateLimited, op + " still rate-limited after retries");
    if (last_status == 0) throw Error(Errc::Timeout, op + " unreachable: " + last_error);
    throw Error(Errc::ServiceError, op + " failed after retries: " + last_error);
  }
};

HttpGateway::HttpGateway(GatewayConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  if (impl_->config.base_url.empty())
    throw Error(Errc::InvalidConfig, "gateway base_url is required");
}

HttpGateway::~HttpGateway() = default;

std::string HttpGateway::generate(const Prompt& prompt,
                                  const std::optional<GenerationConfig>& config) {
  if (prompt.empty()) throw Error(Errc::EmptyInput, "empty prompt");
  const std::string rendered = render_prompt(prompt);
  const GenerationConfig gen = config.value_or(impl_->config.generation);

  ordered_json body;
  body["model"] = impl_->config.model;
  ordered_json messages = ordered_json::array();
  for (const auto& m : prompt) messages.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(messages);
  body["temperature"] = gen.temperature;
  body["top_p"] = gen.top_p;
  body["max_tokens"] = gen.max_output_tokens;

  auto started = std::chrono::steady_clock::now();
  int attempts = 1;
  CallRecord rec{.op = "generate", .request_hash = hash_hex(rendered), .transport = "http"};
  try {
    std::string response = impl_->post_json(impl_->config.base_url, body.dump(), "generate", attempts);
    rec.attempts = attempts;
    rec.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started).count();
    json j = json::parse(response, nullptr, false);
    std::string content;
    try {
      content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw Error(Errc::ServiceError, "malformed completion response");
    }
    rec.outcome = "ok";
    record(std::move(rec));
    return content;
  } catch (const Error& e) {
    rec.attempts = attempts;
    rec.outcome = errc_name(e.code());
    record(std::move(rec));
    throw;
  }
}

RerankResult HttpGateway::rerank(const std::string& query,
                                 const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw Error(Errc::EmptyInput, "no rerank candidates");
  if (impl_->config.rerank_url.empty())
    throw Error(Errc::InvalidConfig, "rerank_url not configured");
  const std::string rendered = render_rerank_request(query, candidates);

  ordered_json body;
  body["model"] = impl_->config.model;
  body["query"] = query;
  body["documents"] = candidates;

  int attempts = 1;
  CallRecord rec{.op = "rerank", .request_hash = hash_hex(rendered), .transport = "http"};
  try {
    std::string response = impl_->post_json(impl_->config.rerank_url, body.dump(), "rerank", attempts);
    rec.attempts = attempts;
    json j = json::parse(response, nullptr, false);
    std::vector<double> scores(candidates.size(), 0.0);
    std::vector<bool> seen(candidates.size(), false);
    try {
      for (const auto& item : j.at("results")) {
        auto idx = item.at("index").get<std::size_t>();
        if (idx >= scores.size()) throw Error(Errc::ServiceError, "rerank index out of range");
        scores[idx] = item.at("relevance_score").get<double>();
        seen[idx] = true;
      }
    } catch (const json::exception&) {
      throw Error(Errc::ServiceError, "malformed rerank response");
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw Error(Errc::ServiceError, "rerank response missing candidates");
    rec.outcome = "ok";
    record(std::move(rec));
    return rank_from_scores(scores);
  } catch (const Error& e) {
    rec.attempts = attempts;
    rec.outcome = errc_name(e.code());
    record(std::move(rec));
    throw;
  }
}

std::vector<double> HttpGateway::embed(const std::string& text) {
  if (text.empty()) throw Error(Errc::EmptyInput, "empty embed input");
  if (impl_->config.embed_url.empty())
    throw Error(Errc::InvalidConfig, "embed_url not configured");
  const std::string rendered = render_embed_request(text);

  ordered_json body;
  body["model"] = impl_->config.model;
  body["input"] = text;

  int attempts = 1;
  CallRecord rec{.op = "embed", .request_hash = hash_hex(rendered), .transport = "http"};
  try {
    std::string response = impl_->post_json(impl_->config.embed_url, body.dump(), "embed", attempts);
    rec.attempts = attempts;
    json j = json::parse(response, nullptr, false);
    std::vector<double> vec;
    try {
      vec = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception&) {
      throw Error(Errc::ServiceError, "malformed embedding response");
    }
    rec.outcome = "ok";
    record(std::move(rec));
    return vec;
  } catch (const Error& e) {
    rec.attempts = attempts;
    rec.outcome = errc_name(e.code());
    record(std::move(rec));
    throw;
  }
}

std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config) {
  if (!config.mock_script.empty())
    return std::make_unique<MockGateway>(read_text_file(config.mock_script));
  return std::make_unique<HttpGateway>(config);
}

}  // namespace cardforge

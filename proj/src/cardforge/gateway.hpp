#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cardforge/errors.hpp"

namespace cardforge {

struct GenerationConfig {
  double temperature = 0.2;
  double top_p = 0.9;
  int max_output_tokens = 8192;
};

struct Message {
  std::string role;
  std::string content;
};
using Prompt = std::vector<Message>;

Prompt make_prompt(std::string system, std::string user);

/// Canonical textual form of a request; mock matching and call-log hashes
/// are computed over this rendering.
std::string render_prompt(const Prompt& prompt);
std::string render_rerank_request(const std::string& query,
                                  const std::vector<std::string>& candidates);
std::string render_embed_request(const std::string& text);

std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::string_view data);

struct RerankItem {
  std::size_t index;  // candidate index in the input order
  double score;
};

/// Complete permutation of the candidates, descending score, ties in
/// ascending input order.
struct RerankResult {
  std::vector<RerankItem> ranking;
};

struct CallRecord {
  std::size_t seq = 0;
  std::string op;           // generate | rerank | embed
  std::string request_hash; // hash_hex of the rendered request
  std::string transport;    // mock | http
  int attempts = 1;
  long long latency_ms = 0; // always 0 for the mock
  std::string outcome;      // ok | error code name | unscripted | repair
  std::string request_text; // captured rendering (mock always, http never)
};

class Gateway {
public:
  virtual ~Gateway() = default;

  /// Text completion. Without an explicit config the gateway's configured
  /// sampling parameters apply.
  virtual std::string generate(const Prompt& prompt,
                               const std::optional<GenerationConfig>& config =
                                   std::nullopt) = 0;
  virtual RerankResult rerank(const std::string& query,
                              const std::vector<std::string>& candidates) = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;

  std::vector<CallRecord> call_log() const;
  std::size_t call_count(std::string_view op) const;
  std::string call_log_jsonl() const;
  void annotate_last_call(const std::string& outcome);

protected:
  void record(CallRecord rec);

private:
  mutable std::mutex log_mutex_;
  std::vector<CallRecord> log_;
};

// ---- scripted mock ------------------------------------------------------

/// One scripted behavior. `match` is either the hex request hash, a
/// substring of the rendered request, or "" (matches everything of its op).
struct MockEntry {
  std::string op = "generate";
  std::string match;
  std::string response;                 // generate
  std::vector<double> scores;           // rerank (one per candidate)
  std::optional<double> score_all;      // rerank shorthand
  std::vector<double> vector;           // embed
  std::string error;                    // auth|rate_limited|service|timeout -> throw
};

/// Deterministic scripted gateway. When several entries match the same
/// request, repeated identical requests consume them in file order and then
/// stick to the last one. Unscripted requests are hard errors so that any
/// prompt drift surfaces in tests.
class MockGateway : public Gateway {
public:
  MockGateway() = default;
  explicit MockGateway(const std::string& script_jsonl);

  void add(MockEntry entry);
  void add_generate(std::string match, std::string response);
  void add_rerank(std::string match, std::vector<double> scores);
  void add_rerank_all(std::string match, double score);
  void add_embed(std::string match, std::vector<double> vec);

  std::string generate(const Prompt& prompt,
                       const std::optional<GenerationConfig>& config =
                           std::nullopt) override;
  RerankResult rerank(const std::string& query,
                      const std::vector<std::string>& candidates) override;
  std::vector<double> embed(const std::string& text) override;

private:
  MockEntry pick(const std::string& op, const std::string& rendered);

  std::mutex mutex_;
  std::vector<MockEntry> entries_;
  std::map<std::string, std::size_t> cursors_;  // request hash -> uses so far
};

// ---- live HTTP gateway ---------------------------------------------------

struct GatewayConfig {
  std::string base_url;    // chat-completions endpoint
  std::string model;
  std::string rerank_url;
  std::string embed_url;
  GenerationConfig generation;
  int max_concurrency = 4;
  int retry_backoff_ms = 250;
  double requests_per_second = 0.0;  // 0 = unlimited
  int timeout_ms = 30000;
  std::string mock_script;           // path; non-empty selects the mock

  static GatewayConfig from_json(const std::string& json_text);
};

inline constexpr const char* kApiKeyEnvVar = "CARDFORGE_API_KEY";
inline constexpr int kMaxAttempts = 3;

/// Chat-completions-style client with bounded retries, a global in-flight
/// limit, and an optional request-rate cap.
class HttpGateway : public Gateway {
public:
  explicit HttpGateway(GatewayConfig config);
  ~HttpGateway() override;

  std::string generate(const Prompt& prompt,
                       const std::optional<GenerationConfig>& config =
                           std::nullopt) override;
  RerankResult rerank(const std::string& query,
                      const std::vector<std::string>& candidates) override;
  std::vector<double> embed(const std::string& text) override;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Mock when config.mock_script is set, HTTP otherwise.
std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config);

RerankResult rank_from_scores(const std::vector<double>& scores);

}  // namespace cardforge

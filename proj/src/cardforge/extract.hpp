#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cardforge/gateway.hpp"
#include "cardforge/ingest.hpp"
#include "cardforge/schema.hpp"

namespace cardforge {

struct ExtractionConfig {
  int r_max = 10;
  int epsilon = 1;        // gain at or below this counts toward a stall
  int top_chunks = 4;
  double rerank_cutoff = 0.0;  // chunks scoring below this are dropped

  void validate() const;
  static ExtractionConfig from_json(const std::string& json_text);
};

enum class ExtractOutcome { Complete, Stalled, MaxRounds };
std::string_view to_string(ExtractOutcome o);

/// Full per-field expansion trace. `round` is the loop counter at exit: the
/// index of the terminating round for Complete/Stalled, r_max when the
/// round budget ran out.
struct ExtractionSession {
  FieldKey field;
  std::string initial_query;
  int round = 0;
  std::vector<std::string> query_history;  // queries actually issued
  std::vector<std::string> answers;        // one per executed round
  std::vector<int> gains;                  // rounds 1..; 0..3
  std::vector<bool> gain_fallbacks;        // true where the score did not parse
  int stall_count = 0;
  ExtractOutcome outcome = ExtractOutcome::Stalled;
  std::string error;  // non-empty when the field failed with a gateway error
};

/// Seed query per taxonomy field, templated from the field scope text.
std::map<std::string, std::string> initial_queries(CardKind kind);

/// Reranks all chunks against the query, keeps the top scoring ones, and
/// asks the gateway for a revised cumulative answer.
std::string answer_round(const std::string& query, const Document& doc,
                         const std::optional<std::string>& prev_answer,
                         const ExtractionConfig& config, Gateway& gateway);

// Marker embedded in the answer prompt when no previous round exists.
inline constexpr const char* kNoPreviousAnswerMarker = "(no previous answer)";
// Sentinel the completeness reviewer returns when the field is done.
inline constexpr const char* kCompleteSentinel = "COMPLETE";

struct AssessResult {
  bool complete = false;
  std::string next_query;  // set when !complete
};

/// One gateway call that both checks completeness and, when incomplete,
/// yields the next query.
AssessResult assess_and_refine(const std::string& initial_query,
                               const std::string& answer,
                               const std::vector<std::string>& history,
                               const FieldKey& field, Gateway& gateway);

struct GainResult {
  int gain = 0;
  bool parse_fallback = false;
};

/// 0-3 improvement score between consecutive answers; an unparsable reply
/// conservatively scores 0 with the fallback flag set.
GainResult compute_gain(const std::string& prev_answer, const std::string& curr_answer,
                        const std::string& initial_query, const FieldKey& field,
                        Gateway& gateway);

struct AnswerValue {
  std::string text;
  Confidence confidence;
};

/// Strips the trailing `CONFIDENCE: <w>` marker; absent or invalid markers
/// default to 0.5.
AnswerValue strip_confidence_marker(const std::string& answer);

std::pair<Field, ExtractionSession> extract_field(const Document& doc,
                                                  const FieldKey& field,
                                                  const std::string& initial_query,
                                                  const ExtractionConfig& config,
                                                  Gateway& gateway);

struct IpeQeResult {
  Card card;
  std::vector<ExtractionSession> sessions;
  bool partial() const {
    for (const auto& s : sessions)
      if (!s.error.empty()) return true;
    return false;
  }
};

IpeQeResult run_ipe_qe(const Document& doc, CardKind kind,
                       const ExtractionConfig& config, Gateway& gateway,
                       const std::string& card_id = "",
                       const std::set<std::string>& tags = {});

/// One line per executed round: field, round, query, gain, stall_count,
/// outcome ("active" until the terminal line).
std::string extraction_trace_jsonl(const std::vector<ExtractionSession>& sessions);

}  // namespace cardforge

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "cardforge/gateway.hpp"
#include "cardforge/pool.hpp"
#include "cardforge/schema.hpp"

namespace cardforge {

struct EnrichConfig {
  int top_k = 10;
  double alpha = 0.5;  // tag-overlap threshold, strict

  void validate() const;
  static EnrichConfig from_json(const std::string& json_text);
};

/// Smoothed IDF over the pool's tag vocabulary: ln((1+N)/(1+df)) + 1.
/// Tags never seen in the pool weigh as df = 0.
class IdfTable {
public:
  static IdfTable from_pool(const std::vector<PoolEntry>& pool);

  double weight(const std::string& tag) const;
  const std::map<std::string, double>& known() const { return weights_; }

private:
  std::map<std::string, double> weights_;
  std::size_t pool_size_ = 0;
};

struct TagVector {
  std::map<std::string, double> weights;

  static TagVector of(const std::set<std::string>& tags, const IdfTable& idf);
};

/// IDF-weighted Jaccard overlap in [0, 1]; two empty tag sets overlap 0.
double tag_overlap(const TagVector& a, const TagVector& b);

enum class FieldCategory { Shared, Unique, General };
std::string_view to_string(FieldCategory c);

/// Shared / Unique / General classification for every taxonomy key
/// (docs/taxonomy.md). Unique fields are never enrichment targets.
FieldCategory field_category(const FieldKey& key);

/// Field names with status Missing (NotApplicable is settled, not missing).
std::set<std::string> incomplete_fields(const Card& card);

/// Reranker input: id, tags, and the first 400 characters of each filled
/// field.
std::string card_summary(const Card& card);

struct RetrievalResult {
  std::vector<PoolEntry> selected;             // <= top_k, rerank order
  std::map<std::string, double> overlaps;      // entry id -> tag overlap (survivors)
};

/// Phase 1 keeps pool entries whose tag overlap with the card exceeds
/// alpha; phase 2 reranks the survivors semantically. No survivors means no
/// gateway call.
RetrievalResult retrieve_similar(const Card& card, const std::vector<PoolEntry>& pool,
                                 const EnrichConfig& config, Gateway& gateway);

// Sentinel the synthesizer returns when no candidate value applies.
inline constexpr const char* kNotApplicableSentinel = "NOT_APPLICABLE";

/// Synthesizes a value for `key` from candidate values of similar cards.
/// Never called for Unique fields.
std::string synthesize_field(const std::vector<std::string>& values, const Card& card,
                             const FieldKey& key, Gateway& gateway);

struct EnrichFieldTrace {
  std::string field;
  std::vector<std::string> candidate_ids;      // reranked similar cards
  std::map<std::string, double> overlaps;      // survivor id -> overlap
  std::string outcome;  // enriched | not_applicable | skipped_unique |
                        // no_candidates | no_values | error
  std::string detail;
};

struct IccMpResult {
  Card card;
  std::vector<EnrichFieldTrace> trace;
  bool attempted = false;  // false when the card was already complete
};

IccMpResult run_icc_mp(const Card& card, const std::vector<PoolEntry>& pool,
                       const EnrichConfig& config, Gateway& gateway);

std::string enrich_trace_jsonl(const std::vector<EnrichFieldTrace>& trace);

}  // namespace cardforge

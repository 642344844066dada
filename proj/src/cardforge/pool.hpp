#pragma once

#include <set>
#include <string>
#include <vector>

#include "cardforge/gateway.hpp"
#include "cardforge/ingest.hpp"
#include "cardforge/schema.hpp"

namespace cardforge {

struct PoolEntry {
  Card card;
  std::set<std::string> tags;
  long long downloads = 0;
  long long likes = 0;
  double wcci = 0.0;
  std::string source_ref;  // DOI/arXiv identifier, may be empty
};

struct PoolConfig {
  double wcci_percentile = 0.10;
  long long min_downloads = 100;

  // Completeness percentile differs by kind: top 10% of model cards,
  // top 30% of data cards.
  static PoolConfig defaults_for(CardKind kind) {
    return PoolConfig{kind == CardKind::Model ? 0.10 : 0.30, 100};
  }
  static PoolConfig from_json(const std::string& json_text, CardKind kind);
};

/// Applies the dual quality filter: drop entries under min_downloads, then
/// keep the top ceil(percentile * survivors) by WCCI. Boundary ties resolve
/// by downloads (desc), then id (asc). Result is sorted by WCCI descending.
std::vector<PoolEntry> build_pool(std::vector<PoolEntry> entries, const PoolConfig& config);

std::string pool_to_jsonl(const std::vector<PoolEntry>& entries);

/// Loads a pool snapshot; the stored wcci of every entry is recomputed from
/// its card and a mismatch is a load error.
std::vector<PoolEntry> pool_from_jsonl(const std::string& jsonl);

PoolEntry make_pool_entry(Card card, const HubRecord& record);

// ---- hub ingestion -------------------------------------------------------

struct FetchOptions {
  std::string base_url = "https://huggingface.co";
  std::vector<std::string> modality_filters;
  int page_budget = 1;
  int page_size = 100;
  std::string record_dir;  // save each page response here
  std::string replay_dir;  // read page responses from here instead of HTTP
};

struct FetchResult {
  std::vector<HubRecord> records;
  std::vector<std::string> warnings;  // skipped malformed records
};

FetchResult fetch_hub_records(CardKind kind, const FetchOptions& options);

/// Keeps records whose tags carry an arXiv or DOI identifier and stores the
/// matched identifier as source_ref.
std::vector<HubRecord> filter_paper_linked(const std::vector<HubRecord>& records);

/// Prompts the gateway to structure a raw description into a card; one
/// repair re-prompt is attempted on unparsable output.
Card structure_card(const HubRecord& record, CardKind kind, Gateway& gateway);

std::string pool_stats_json(const std::vector<PoolEntry>& entries,
                            const std::set<std::string>& report_tags = {});

}  // namespace cardforge

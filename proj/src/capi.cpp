#include "cardforge/cardforge.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "json.hpp"

#include "cardforge/enrich.hpp"
#include "cardforge/extract.hpp"
#include "cardforge/fileio.hpp"
#include "cardforge/gateway.hpp"
#include "cardforge/ingest.hpp"
#include "cardforge/judge.hpp"
#include "cardforge/metrics.hpp"
#include "cardforge/pool.hpp"
#include "cardforge/schema.hpp"
#include "cardforge/trace_stats.hpp"

using nlohmann::ordered_json;
namespace cf = cardforge;

struct cf_gateway {
  std::unique_ptr<cf::Gateway> impl;
};

struct cf_pool {
  std::vector<cf::PoolEntry> entries;
};

namespace {

thread_local std::string t_last_error;

cf_status status_of(const cf::Error& e) {
  switch (e.code()) {
    case cf::Errc::MalformedJson:
    case cf::Errc::UnknownField:
    case cf::Errc::KindMismatch:
    case cf::Errc::InvalidConfidence:
    case cf::Errc::MalformedTrace:
      return CF_ERR_PARSE;
    case cf::Errc::ValidationFailed:
    case cf::Errc::CoverageMismatch:
    case cf::Errc::StructuringFailed:
    case cf::Errc::JudgeParseError:
      return CF_ERR_VALIDATION;
    case cf::Errc::InvalidConfig:
      return CF_ERR_CONFIG;
    case cf::Errc::IoError:
      return CF_ERR_IO;
    case cf::Errc::AuthError:
      return CF_ERR_GATEWAY_AUTH;
    case cf::Errc::RateLimited:
    case cf::Errc::ServiceError:
    case cf::Errc::Timeout:
    case cf::Errc::HttpError:
    case cf::Errc::ProviderUnavailable:
    case cf::Errc::NoRelevantChunks:
      return CF_ERR_GATEWAY;
    case cf::Errc::DegenerateInput:
    case cf::Errc::LengthMismatch:
      return CF_ERR_DEGENERATE;
    case cf::Errc::EmptyDocument:
    case cf::Errc::EmptyMetadata:
    case cf::Errc::EmptyInput:
    case cf::Errc::EmptyPool:
    case cf::Errc::TagAbsent:
    case cf::Errc::EmptyAfterFilter:
      return CF_ERR_EMPTY;
  }
  return CF_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

template <typename Fn>
cf_status guarded(char** out, Fn&& fn) {
  if (out) *out = nullptr;
  try {
    std::string result = fn();
    t_last_error.clear();
    if (out) {
      *out = dup_string(result);
      if (!*out) {
        t_last_error = "out of memory";
        return CF_ERR_INTERNAL;
      }
    }
    return CF_OK;
  } catch (const cf::Error& e) {
    t_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return CF_ERR_INTERNAL;
  }
}

cf_status require(bool ok, const char* message) {
  if (ok) return CF_OK;
  t_last_error = message;
  return CF_ERR_INVALID_ARGUMENT;
}

std::set<std::string> tags_from_json(const char* tags_json) {
  std::set<std::string> tags;
  if (!tags_json || !*tags_json) return tags;
  ordered_json j = ordered_json::parse(tags_json);
  if (!j.is_array()) throw cf::Error(cf::Errc::MalformedJson, "tags must be a JSON array");
  for (const auto& t : j) tags.insert(t.get<std::string>());
  return tags;
}

ordered_json trace_lines_json(const std::string& jsonl) {
  ordered_json arr = ordered_json::array();
  std::size_t start = 0;
  while (start < jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string::npos) end = jsonl.size();
    std::string line = jsonl.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      arr.push_back(ordered_json::parse(line));
    start = end + 1;
  }
  return arr;
}

}  // namespace

extern "C" {

const char* cf_version(void) { return "0.1.0"; }

const char* cf_status_name(cf_status status) {
  switch (status) {
    case CF_OK: return "ok";
    case CF_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CF_ERR_PARSE: return "parse_error";
    case CF_ERR_VALIDATION: return "validation_error";
    case CF_ERR_CONFIG: return "config_error";
    case CF_ERR_IO: return "io_error";
    case CF_ERR_GATEWAY_AUTH: return "gateway_auth_error";
    case CF_ERR_GATEWAY: return "gateway_error";
    case CF_ERR_DEGENERATE: return "degenerate_input";
    case CF_ERR_EMPTY: return "empty_input";
    case CF_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* cf_last_error(void) { return t_last_error.c_str(); }

void cf_string_free(char* s) { std::free(s); }

cf_status cf_taxonomy(const char* kind, char** out) {
  if (auto rc = require(kind && out, "kind and out required")) return rc;
  return guarded(out, [&] {
    ordered_json arr = ordered_json::array();
    for (const auto& key : cf::taxonomy(cf::card_kind_from_string(kind)))
      arr.push_back(key.name);
    return arr.dump() + "\n";
  });
}

cf_status cf_card_validate(const char* card_json, char** out) {
  if (auto rc = require(card_json && out, "card_json and out required")) return rc;
  return guarded(out, [&] {
    cf::Card card = cf::parse_card(card_json);
    cf::ValidationReport report = cf::validate_card(card);
    ordered_json j;
    j["ok"] = report.ok();
    ordered_json violations = ordered_json::array();
    for (const auto& v : report.violations)
      violations.push_back({{"field", v.field}, {"rule", v.rule}, {"detail", v.detail}});
    j["violations"] = std::move(violations);
    return j.dump(2) + "\n";
  });
}

cf_status cf_card_normalize(const char* card_json, char** out) {
  if (auto rc = require(card_json && out, "card_json and out required")) return rc;
  return guarded(out, [&] { return cf::serialize_card(cf::parse_card(card_json)); });
}

cf_status cf_wcci(const char* card_json, char** out) {
  if (auto rc = require(card_json && out, "card_json and out required")) return rc;
  return guarded(out, [&] {
    cf::Card card = cf::parse_card(card_json);
    cf::WcciScore score = cf::wcci(card);
    ordered_json j;
    j["id"] = card.id;
    j["wcci"] = score.value;
    ordered_json pf = ordered_json::object();
    for (const auto& [name, value] : score.per_field) pf[name] = value;
    j["per_field"] = std::move(pf);
    return j.dump() + "\n";
  });
}

cf_status cf_ingest(const char* markdown, const char* metadata_json, char** out) {
  if (auto rc = require(markdown && out, "markdown and out required")) return rc;
  return guarded(out, [&] {
    std::vector<cf::Chunk> chunks = cf::chunk_markdown(markdown);
    std::optional<cf::Chunk> metadata;
    if (metadata_json && *metadata_json)
      metadata = cf::metadata_chunk(cf::HubRecord::from_json(metadata_json));
    cf::Document doc = cf::make_document(std::move(chunks), std::move(metadata));
    return cf::chunks_to_jsonl(doc.chunks);
  });
}

cf_status cf_gateway_open(const char* config_json, cf_gateway** out) {
  if (!config_json || !out) {
    t_last_error = "config_json and out required";
    return CF_ERR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  try {
    auto gateway = cf::make_gateway(cf::GatewayConfig::from_json(config_json));
    *out = new cf_gateway{std::move(gateway)};
    t_last_error.clear();
    return CF_OK;
  } catch (const cf::Error& e) {
    t_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return CF_ERR_INTERNAL;
  }
}

void cf_gateway_close(cf_gateway* gateway) { delete gateway; }

cf_status cf_gateway_call_log(cf_gateway* gateway, char** out) {
  if (auto rc = require(gateway && out, "gateway and out required")) return rc;
  return guarded(out, [&] { return gateway->impl->call_log_jsonl(); });
}

cf_status cf_pool_load(const char* pool_jsonl, cf_pool** out) {
  if (!pool_jsonl || !out) {
    t_last_error = "pool_jsonl and out required";
    return CF_ERR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  try {
    auto entries = cf::pool_from_jsonl(pool_jsonl);
    *out = new cf_pool{std::move(entries)};
    t_last_error.clear();
    return CF_OK;
  } catch (const cf::Error& e) {
    t_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return CF_ERR_INTERNAL;
  }
}

void cf_pool_close(cf_pool* pool) { delete pool; }

cf_status cf_pool_build(const char* entries_jsonl, const char* config_json, char** out) {
  if (auto rc = require(entries_jsonl && out, "entries_jsonl and out required")) return rc;
  return guarded(out, [&] {
    std::vector<cf::PoolEntry> entries = cf::pool_from_jsonl(entries_jsonl);
    if (entries.empty()) throw cf::Error(cf::Errc::EmptyPool, "no entries to filter");
    cf::PoolConfig config = cf::PoolConfig::defaults_for(entries.front().card.kind);
    if (config_json && *config_json)
      config = cf::PoolConfig::from_json(config_json, entries.front().card.kind);
    return cf::pool_to_jsonl(cf::build_pool(std::move(entries), config));
  });
}

cf_status cf_pool_stats(cf_pool* pool, const char* tags_json, char** out) {
  if (auto rc = require(pool && out, "pool and out required")) return rc;
  return guarded(out, [&] {
    return cf::pool_stats_json(pool->entries, tags_from_json(tags_json));
  });
}

cf_status cf_pool_fetch(const char* options_json, char** out) {
  if (auto rc = require(options_json && out, "options_json and out required")) return rc;
  return guarded(out, [&] {
    ordered_json j;
    try {
      j = ordered_json::parse(options_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw cf::Error(cf::Errc::InvalidConfig, std::string("fetch options: ") + e.what());
    }
    cf::CardKind kind = cf::card_kind_from_string(j.value("kind", "model"));
    cf::FetchOptions options;
    options.base_url = j.value("base_url", options.base_url);
    options.page_budget = j.value("page_budget", options.page_budget);
    options.page_size = j.value("page_size", options.page_size);
    options.record_dir = j.value("record_dir", "");
    options.replay_dir = j.value("replay_dir", "");
    if (j.contains("filters"))
      for (const auto& f : j.at("filters"))
        options.modality_filters.push_back(f.get<std::string>());

    cf::FetchResult fetched = cf::fetch_hub_records(kind, options);
    std::vector<cf::HubRecord> records = std::move(fetched.records);
    if (j.value("paper_linked_only", true)) records = cf::filter_paper_linked(records);

    ordered_json result;
    ordered_json arr = ordered_json::array();
    for (const auto& r : records) {
      ordered_json rj;
      rj["id"] = r.id;
      rj["tags"] = r.tags;
      rj["downloads"] = r.downloads;
      rj["likes"] = r.likes;
      rj["description"] = r.description;
      if (!r.source_ref.empty()) rj["source_ref"] = r.source_ref;
      arr.push_back(std::move(rj));
    }
    result["records"] = std::move(arr);
    result["warnings"] = fetched.warnings;
    return result.dump(2) + "\n";
  });
}

cf_status cf_pool_structure(cf_gateway* gateway, const char* record_json,
                            const char* kind, char** out) {
  if (auto rc = require(gateway && record_json && kind && out,
                        "gateway, record_json, kind, out required"))
    return rc;
  return guarded(out, [&] {
    cf::HubRecord record = cf::HubRecord::from_json(record_json);
    cf::Card card = cf::structure_card(record, cf::card_kind_from_string(kind),
                                       *gateway->impl);
    return cf::serialize_card(card);
  });
}

cf_status cf_generate(cf_gateway* gateway, const char* chunks_jsonl,
                      const char* kind, const char* card_id,
                      const char* tags_json, const char* extraction_config_json,
                      cf_pool* pool, const char* enrich_config_json, char** out) {
  if (auto rc = require(gateway && chunks_jsonl && kind && out,
                        "gateway, chunks_jsonl, kind, out required"))
    return rc;
  return guarded(out, [&] {
    cf::Document doc = cf::document_from_jsonl(chunks_jsonl);
    cf::ExtractionConfig config;
    if (extraction_config_json && *extraction_config_json)
      config = cf::ExtractionConfig::from_json(extraction_config_json);

    cf::IpeQeResult extracted = cf::run_ipe_qe(
        doc, cf::card_kind_from_string(kind), config, *gateway->impl,
        card_id ? card_id : "", tags_from_json(tags_json));

    ordered_json bundle;
    ordered_json enrichment = nullptr;
    cf::Card final_card = extracted.card;
    if (pool && !cf::incomplete_fields(final_card).empty()) {
      cf::EnrichConfig enrich_config;
      if (enrich_config_json && *enrich_config_json)
        enrich_config = cf::EnrichConfig::from_json(enrich_config_json);
      cf::IccMpResult enriched =
          cf::run_icc_mp(final_card, pool->entries, enrich_config, *gateway->impl);
      final_card = enriched.card;
      enrichment = trace_lines_json(cf::enrich_trace_jsonl(enriched.trace));
    }

    bundle["card"] = ordered_json::parse(cf::serialize_card(final_card));
    bundle["extraction_trace"] = trace_lines_json(cf::extraction_trace_jsonl(extracted.sessions));
    bundle["enrichment_trace"] = std::move(enrichment);
    int partial = 0;
    for (const auto& s : extracted.sessions)
      if (!s.error.empty()) ++partial;
    bundle["partial_errors"] = partial;
    return bundle.dump(2) + "\n";
  });
}

cf_status cf_enrich(cf_gateway* gateway, const char* card_json, cf_pool* pool,
                    const char* enrich_config_json, char** out) {
  if (auto rc = require(gateway && card_json && pool && out,
                        "gateway, card_json, pool, out required"))
    return rc;
  return guarded(out, [&] {
    cf::Card card = cf::parse_card(card_json);
    cf::EnrichConfig config;
    if (enrich_config_json && *enrich_config_json)
      config = cf::EnrichConfig::from_json(enrich_config_json);
    cf::IccMpResult result = cf::run_icc_mp(card, pool->entries, config, *gateway->impl);
    ordered_json bundle;
    bundle["card"] = ordered_json::parse(cf::serialize_card(result.card));
    bundle["enrichment_trace"] = trace_lines_json(cf::enrich_trace_jsonl(result.trace));
    return bundle.dump(2) + "\n";
  });
}

cf_status cf_evaluate(const char* manifest_json, const char* judge_config_json,
                      char** out) {
  if (auto rc = require(manifest_json && judge_config_json && out,
                        "manifest_json, judge_config_json, out required"))
    return rc;
  return guarded(out, [&] {
    ordered_json manifest;
    try {
      manifest = ordered_json::parse(manifest_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw cf::Error(cf::Errc::MalformedJson, std::string("manifest: ") + e.what());
    }
    if (!manifest.contains("methods") || !manifest.contains("sources"))
      throw cf::Error(cf::Errc::MalformedJson, "manifest needs methods and sources");

    std::map<std::string, std::vector<cf::Card>> methods;
    for (const auto& [label, files] : manifest.at("methods").items())
      for (const auto& file : files)
        methods[label].push_back(cf::parse_card(cf::read_text_file(file.get<std::string>())));

    std::map<std::string, cf::Document> sources;
    for (const auto& [card_id, file] : manifest.at("sources").items())
      sources[card_id] = cf::document_from_jsonl(cf::read_text_file(file.get<std::string>()));

    ordered_json jc;
    try {
      jc = ordered_json::parse(judge_config_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw cf::Error(cf::Errc::InvalidConfig, std::string("judge config: ") + e.what());
    }
    cf::JudgeConfig config;
    config.rounds = jc.value("rounds", 5);
    config.seed = jc.value("seed", 0ULL);
    if (!jc.contains("judges") || !jc.at("judges").is_array() || jc.at("judges").empty())
      throw cf::Error(cf::Errc::InvalidConfig, "judge config needs a judges array");

    std::vector<std::unique_ptr<cf::Gateway>> owned;
    std::vector<cf::Gateway*> judges;
    for (const auto& judge_cfg : jc.at("judges")) {
      owned.push_back(cf::make_gateway(cf::GatewayConfig::from_json(judge_cfg.dump())));
      judges.push_back(owned.back().get());
    }
    return cf::evaluate(methods, sources, config, judges).to_json();
  });
}

cf_status cf_trace_stats(const char* traces_json, char** out) {
  if (auto rc = require(traces_json && out, "traces_json and out required")) return rc;
  return guarded(out, [&] {
    ordered_json j;
    try {
      j = ordered_json::parse(traces_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw cf::Error(cf::Errc::MalformedJson, std::string("traces: ") + e.what());
    }
    std::vector<std::string> extraction, enrichment;
    if (j.contains("extraction"))
      for (const auto& t : j.at("extraction")) extraction.push_back(t.get<std::string>());
    if (j.contains("enrichment"))
      for (const auto& t : j.at("enrichment")) enrichment.push_back(t.get<std::string>());
    return cf::trace_stats_json(extraction, enrichment);
  });
}

}  // extern "C"

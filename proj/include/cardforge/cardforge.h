/* cardforge C API: opaque handles + status codes over the card-generation
 * core. Strings returned through out-parameters are heap-allocated UTF-8
 * and must be released with cf_string_free. All inputs are UTF-8 JSON
 * unless noted. Thread-safe; the per-thread failure detail is available
 * via cf_last_error.
 */
#ifndef CARDFORGE_H
#define CARDFORGE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cf_status {
  CF_OK = 0,
  CF_ERR_INVALID_ARGUMENT = 1,
  CF_ERR_PARSE = 2,        /* malformed JSON / unknown field / bad confidence */
  CF_ERR_VALIDATION = 3,   /* card or pool failed an invariant */
  CF_ERR_CONFIG = 4,       /* unusable configuration */
  CF_ERR_IO = 5,           /* file read/write failure */
  CF_ERR_GATEWAY_AUTH = 6, /* credentials rejected */
  CF_ERR_GATEWAY = 7,      /* service/transport failure after retries */
  CF_ERR_DEGENERATE = 8,   /* statistically undefined input */
  CF_ERR_EMPTY = 9,        /* empty document/pool/input */
  CF_ERR_INTERNAL = 10
} cf_status;

typedef struct cf_gateway cf_gateway; /* text-generation/rerank/embed client */
typedef struct cf_pool cf_pool;       /* immutable pool snapshot */

const char* cf_version(void);
const char* cf_status_name(cf_status status);

/* Message for the most recent failure on this thread ("" if none). */
const char* cf_last_error(void);

void cf_string_free(char* s);

/* ---- schema / metrics -------------------------------------------------- */

/* kind is "model" or "data". *out: JSON array of canonical field names. */
cf_status cf_taxonomy(const char* kind, char** out);

/* *out: {"ok": bool, "violations": [{"field","rule","detail"}...]} */
cf_status cf_card_validate(const char* card_json, char** out);

/* Parses and re-serializes a card in canonical form. */
cf_status cf_card_normalize(const char* card_json, char** out);

/* *out: {"id", "wcci", "per_field": {...}} */
cf_status cf_wcci(const char* card_json, char** out);

/* ---- ingestion ---------------------------------------------------------- */

/* markdown: raw text (not JSON). metadata_json: optional repository record
 * {"id","tags","downloads","likes","description"} or NULL.
 * *out: chunk JSONL. */
cf_status cf_ingest(const char* markdown, const char* metadata_json, char** out);

/* ---- gateway ------------------------------------------------------------ */

/* config_json keys: base_url, model, rerank_url, embed_url, temperature,
 * top_p, max_output_tokens, max_concurrency, mock_script (path; switches to
 * the scripted offline mock). Secret comes from $CARDFORGE_API_KEY. */
cf_status cf_gateway_open(const char* config_json, cf_gateway** out);
void cf_gateway_close(cf_gateway* gateway);

/* *out: call-log JSONL (seq, op, request_hash, transport, attempts,
 * latency_ms, outcome). */
cf_status cf_gateway_call_log(cf_gateway* gateway, char** out);

/* ---- pool ---------------------------------------------------------------- */

cf_status cf_pool_load(const char* pool_jsonl, cf_pool** out);
void cf_pool_close(cf_pool* pool);

/* entries_jsonl -> filtered pool JSONL per config {"wcci_percentile",
 * "min_downloads"} (kind-specific defaults apply). */
cf_status cf_pool_build(const char* entries_jsonl, const char* config_json, char** out);

/* tags_json: optional JSON array of tags to correlate, or NULL. */
cf_status cf_pool_stats(cf_pool* pool, const char* tags_json, char** out);

/* options_json: {"kind","base_url","filters":[...],"page_budget",
 * "page_size","record_dir","replay_dir","paper_linked_only":bool}.
 * *out: {"records":[...], "warnings":[...]}. */
cf_status cf_pool_fetch(const char* options_json, char** out);

/* Structures one raw record into a card via the gateway. */
cf_status cf_pool_structure(cf_gateway* gateway, const char* record_json,
                            const char* kind, char** out);

/* ---- pipeline ------------------------------------------------------------ */

/* chunks_jsonl: ingest output. tags_json: optional JSON array. pool: may be
 * NULL (no enrichment). extraction/enrich configs: optional JSON or NULL for
 * defaults. *out: {"card":..., "extraction_trace":[...],
 * "enrichment_trace":[...]|null, "partial_errors":N}. */
cf_status cf_generate(cf_gateway* gateway, const char* chunks_jsonl,
                      const char* kind, const char* card_id,
                      const char* tags_json, const char* extraction_config_json,
                      cf_pool* pool, const char* enrich_config_json, char** out);

/* Enrich an existing card from a pool. *out: {"card":...,
 * "enrichment_trace":[...]} */
cf_status cf_enrich(cf_gateway* gateway, const char* card_json, cf_pool* pool,
                    const char* enrich_config_json, char** out);

/* manifest_json: {"methods": {label: [card file path, ...]},
 * "sources": {card_id: chunk JSONL path}}.
 * judge_config_json: {"rounds", "seed", "judges": [gateway config, ...]}.
 * *out: evaluation report JSON. */
cf_status cf_evaluate(const char* manifest_json, const char* judge_config_json,
                      char** out);

/* traces_json: {"extraction": [file content, ...],
 * "enrichment": [file content, ...]}. */
cf_status cf_trace_stats(const char* traces_json, char** out);

#ifdef __cplusplus
}
#endif

#endif /* CARDFORGE_H */

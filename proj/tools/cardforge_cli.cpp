// cardforge command-line interface. All functionality flows through the
// shared library's C API; this binary only handles files, flags, and exit
// codes (0 success, 1 abort, 2 partial per-field failure).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cardforge/cardforge.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAbort = 1;
constexpr int kExitPartial = 2;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError("cannot write " + path);
  out << content;
}

// Wraps a C API string result and frees it on scope exit.
struct ApiString {
  char* value = nullptr;
  ~ApiString() { cf_string_free(value); }
  std::string str() const { return value ? std::string(value) : std::string(); }
};

void check(cf_status status, const char* what) {
  if (status == CF_OK) return;
  throw CliError(std::string(what) + ": " + cf_status_name(status) + " (" +
                 cf_last_error() + ")");
}

struct GatewayHandle {
  cf_gateway* ptr = nullptr;
  ~GatewayHandle() { cf_gateway_close(ptr); }
};

struct PoolHandle {
  cf_pool* ptr = nullptr;
  ~PoolHandle() { cf_pool_close(ptr); }
};

// One config file feeds every subcommand; sections are optional.
struct Config {
  ordered_json root = ordered_json::object();

  static Config load(const std::string& path) {
    Config c;
    if (path.empty()) return c;
    try {
      c.root = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw CliError("config " + path + ": " + e.what());
    }
    return c;
  }

  ordered_json section(const std::string& name) const {
    if (root.contains(name) && root.at(name).is_object()) return root.at(name);
    return ordered_json::object();
  }
};

std::string gateway_config_json(const Config& config, const std::string& mock_script) {
  ordered_json gw = config.section("gateway");
  if (!mock_script.empty()) gw["mock_script"] = mock_script;
  return gw.dump();
}

ordered_json with_overrides(ordered_json section,
                            const std::vector<std::pair<std::string, std::optional<double>>>& nums) {
  for (const auto& [key, value] : nums)
    if (value) section[key] = *value;
  return section;
}

std::string detect_kind(const std::string& flag_value) {
  if (flag_value != "model" && flag_value != "data")
    throw CliError("--kind must be model or data");
  return flag_value;
}

// Markdown in, chunk JSONL out (a .jsonl input passes through).
std::string load_chunks(const std::string& input, const std::string& metadata_path) {
  if (input.size() > 6 && input.substr(input.size() - 6) == ".jsonl") {
    if (!metadata_path.empty())
      throw CliError("--metadata only applies to Markdown inputs");
    return read_file(input);
  }
  std::string markdown = read_file(input);
  std::string metadata;
  if (!metadata_path.empty()) metadata = read_file(metadata_path);
  ApiString out;
  check(cf_ingest(markdown.c_str(), metadata_path.empty() ? nullptr : metadata.c_str(),
                  &out.value),
        "ingest");
  return out.str();
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content;
  else
    write_file(out_path, content);
}

// ---- subcommand bodies ----------------------------------------------------

int run_ingest(const std::string& input, const std::string& metadata_path,
               const std::string& out_path) {
  emit(out_path, load_chunks(input, metadata_path));
  return kExitOk;
}

int run_generate(const std::string& input, const std::string& metadata_path,
                 const std::string& kind, const std::string& id,
                 const std::vector<std::string>& tags, const Config& config,
                 const std::string& mock_script, const std::string& pool_path,
                 const std::string& out_dir,
                 const std::optional<double>& r_max, const std::optional<double>& epsilon,
                 const std::optional<double>& top_chunks, const std::optional<double>& cutoff,
                 const std::optional<double>& alpha, const std::optional<double>& top_k) {
  std::string chunks = load_chunks(input, metadata_path);

  std::string card_id = id;
  std::string tags_json;
  {
    ordered_json t = ordered_json::array();
    for (const auto& tag : tags) t.push_back(tag);
    // Metadata records contribute id and tags unless given explicitly.
    if (!metadata_path.empty()) {
      ordered_json meta = ordered_json::parse(read_file(metadata_path));
      if (card_id.empty() && meta.contains("id")) card_id = meta.at("id").get<std::string>();
      if (t.empty() && meta.contains("tags")) t = meta.at("tags");
    }
    if (card_id.empty()) card_id = fs::path(input).stem().string();
    tags_json = t.dump();
  }

  GatewayHandle gateway;
  check(cf_gateway_open(gateway_config_json(config, mock_script).c_str(), &gateway.ptr),
        "gateway");

  PoolHandle pool;
  if (!pool_path.empty())
    check(cf_pool_load(read_file(pool_path).c_str(), &pool.ptr), "pool");

  const std::string extraction = with_overrides(config.section("extraction"),
                                                {{"r_max", r_max},
                                                 {"epsilon", epsilon},
                                                 {"top_chunks", top_chunks},
                                                 {"rerank_cutoff", cutoff}})
                                     .dump();
  const std::string enrich = with_overrides(config.section("enrich"),
                                            {{"alpha", alpha}, {"top_k", top_k}})
                                 .dump();

  ApiString bundle_text;
  check(cf_generate(gateway.ptr, chunks.c_str(), kind.c_str(), card_id.c_str(),
                    tags_json.c_str(), extraction.c_str(), pool.ptr, enrich.c_str(),
                    &bundle_text.value),
        "generate");

  ordered_json bundle = ordered_json::parse(bundle_text.str());
  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "card.json").string(), bundle.at("card").dump(2) + "\n");

  std::string extraction_trace;
  for (const auto& line : bundle.at("extraction_trace")) extraction_trace += line.dump() + "\n";
  write_file((fs::path(out_dir) / "extraction_trace.jsonl").string(), extraction_trace);

  if (!bundle.at("enrichment_trace").is_null()) {
    std::string enrichment_trace;
    for (const auto& line : bundle.at("enrichment_trace")) enrichment_trace += line.dump() + "\n";
    write_file((fs::path(out_dir) / "enrichment_trace.jsonl").string(), enrichment_trace);
  }

  ApiString call_log;
  check(cf_gateway_call_log(gateway.ptr, &call_log.value), "call log");
  write_file((fs::path(out_dir) / "call_log.jsonl").string(), call_log.str());

  const int partial = bundle.at("partial_errors").get<int>();
  if (partial > 0) {
    std::cerr << partial << " field(s) failed extraction; see extraction_trace.jsonl\n";
    return kExitPartial;
  }
  return kExitOk;
}

int run_enrich(const std::string& card_path, const std::string& pool_path,
               const Config& config, const std::string& mock_script,
               const std::string& out_dir, const std::optional<double>& alpha,
               const std::optional<double>& top_k) {
  GatewayHandle gateway;
  check(cf_gateway_open(gateway_config_json(config, mock_script).c_str(), &gateway.ptr),
        "gateway");
  PoolHandle pool;
  check(cf_pool_load(read_file(pool_path).c_str(), &pool.ptr), "pool");

  const std::string enrich = with_overrides(config.section("enrich"),
                                            {{"alpha", alpha}, {"top_k", top_k}})
                                 .dump();
  ApiString bundle_text;
  check(cf_enrich(gateway.ptr, read_file(card_path).c_str(), pool.ptr, enrich.c_str(),
                  &bundle_text.value),
        "enrich");

  ordered_json bundle = ordered_json::parse(bundle_text.str());
  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "card.json").string(), bundle.at("card").dump(2) + "\n");
  std::string trace;
  for (const auto& line : bundle.at("enrichment_trace")) trace += line.dump() + "\n";
  write_file((fs::path(out_dir) / "enrichment_trace.jsonl").string(), trace);
  ApiString call_log;
  check(cf_gateway_call_log(gateway.ptr, &call_log.value), "call log");
  write_file((fs::path(out_dir) / "call_log.jsonl").string(), call_log.str());
  return kExitOk;
}

int run_wcci(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::string output;
  std::size_t cards = 0;
  double sum = 0.0;
  for (const auto& path : inputs) {
    std::vector<std::string> docs;
    std::string content = read_file(path);
    if (path.size() > 6 && path.substr(path.size() - 6) == ".jsonl") {
      std::istringstream in(content);
      std::string line;
      while (std::getline(in, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) docs.push_back(line);
    } else {
      docs.push_back(content);
    }
    for (const auto& doc : docs) {
      ApiString line;
      check(cf_wcci(doc.c_str(), &line.value), "wcci");
      output += line.str();
      sum += ordered_json::parse(line.str()).at("wcci").get<double>();
      ++cards;
    }
  }
  ordered_json aggregate;
  aggregate["cards"] = cards;
  aggregate["mean_wcci"] = cards ? sum / static_cast<double>(cards) : 0.0;
  output += aggregate.dump() + "\n";
  emit(out_path, output);
  return kExitOk;
}

// Raw fetch output -> structured entries, one gateway structuring call per
// record (records that repeatedly fail to structure are skipped with a
// warning).
std::string structure_records(const std::string& records_path, const std::string& kind,
                              const Config& config, const std::string& mock_script) {
  ordered_json fetched = ordered_json::parse(read_file(records_path));
  const ordered_json& records =
      fetched.is_object() && fetched.contains("records") ? fetched.at("records") : fetched;
  if (!records.is_array() || records.empty())
    throw CliError("no records to structure in " + records_path);

  GatewayHandle gateway;
  check(cf_gateway_open(gateway_config_json(config, mock_script).c_str(), &gateway.ptr),
        "gateway");

  std::string entries;
  std::size_t structured = 0;
  for (const auto& record : records) {
    ApiString card;
    cf_status status =
        cf_pool_structure(gateway.ptr, record.dump().c_str(), kind.c_str(), &card.value);
    if (status != CF_OK) {
      std::cerr << "skipping " << record.value("id", std::string("<unknown>")) << ": "
                << cf_last_error() << "\n";
      continue;
    }
    ApiString score;
    check(cf_wcci(card.str().c_str(), &score.value), "wcci");
    ordered_json entry;
    entry["card"] = ordered_json::parse(card.str());
    entry["tags"] = record.value("tags", ordered_json::array());
    entry["downloads"] = record.value("downloads", 0LL);
    entry["likes"] = record.value("likes", 0LL);
    entry["wcci"] = ordered_json::parse(score.str()).at("wcci");
    if (record.contains("source_ref")) entry["source_ref"] = record.at("source_ref");
    entries += entry.dump() + "\n";
    ++structured;
  }
  if (structured == 0) throw CliError("every record failed to structure");
  return entries;
}

int run_pool_build(const std::string& entries_path, const std::string& records_path,
                   const std::string& kind, const Config& config,
                   const std::string& mock_script, const std::optional<double>& percentile,
                   const std::optional<double>& min_downloads, const std::string& out_path) {
  std::string entries;
  if (!records_path.empty())
    entries = structure_records(records_path, kind, config, mock_script);
  else if (!entries_path.empty())
    entries = read_file(entries_path);
  else
    throw CliError("pool build needs an entries file or --from-records");

  ordered_json filter = ordered_json::object();
  if (percentile) filter["wcci_percentile"] = *percentile;
  if (min_downloads) filter["min_downloads"] = static_cast<long long>(*min_downloads);
  ApiString out;
  check(cf_pool_build(entries.c_str(), filter.dump().c_str(), &out.value), "pool build");
  emit(out_path, out.str());
  return kExitOk;
}

int run_pool_fetch(const std::string& kind, const std::vector<std::string>& filters,
                   int pages, const std::string& base_url, const std::string& record_dir,
                   const std::string& replay_dir, bool keep_all, const std::string& out_path) {
  ordered_json options;
  options["kind"] = kind;
  options["filters"] = filters;
  options["page_budget"] = pages;
  if (!base_url.empty()) options["base_url"] = base_url;
  if (!record_dir.empty()) options["record_dir"] = record_dir;
  if (!replay_dir.empty()) options["replay_dir"] = replay_dir;
  options["paper_linked_only"] = !keep_all;
  ApiString out;
  check(cf_pool_fetch(options.dump().c_str(), &out.value), "pool fetch");
  emit(out_path, out.str());
  return kExitOk;
}

int run_pool_stats(const std::string& pool_path, const std::vector<std::string>& tags,
                   const std::string& out_path) {
  PoolHandle pool;
  check(cf_pool_load(read_file(pool_path).c_str(), &pool.ptr), "pool");
  std::string tags_json;
  if (!tags.empty()) {
    ordered_json t = ordered_json::array();
    for (const auto& tag : tags) t.push_back(tag);
    tags_json = t.dump();
  }
  ApiString out;
  check(cf_pool_stats(pool.ptr, tags_json.empty() ? nullptr : tags_json.c_str(), &out.value),
        "pool stats");
  emit(out_path, out.str());
  return kExitOk;
}

int run_evaluate(const std::string& manifest_path, const Config& config,
                 const std::string& mock_script, const std::optional<double>& rounds,
                 const std::optional<double>& seed, const std::string& out_path) {
  ordered_json judge = config.section("judge");
  if (rounds) judge["rounds"] = static_cast<int>(*rounds);
  if (seed) judge["seed"] = static_cast<std::uint64_t>(*seed);
  if (!judge.contains("judges") || !judge.at("judges").is_array() || judge.at("judges").empty()) {
    // Default: two judges on the base gateway config.
    ordered_json judges = ordered_json::array();
    judges.push_back(config.section("gateway"));
    judges.push_back(config.section("gateway"));
    judge["judges"] = std::move(judges);
  }
  if (!mock_script.empty())
    for (auto& j : judge.at("judges")) j["mock_script"] = mock_script;

  ApiString out;
  check(cf_evaluate(read_file(manifest_path).c_str(), judge.dump().c_str(), &out.value),
        "evaluate");
  emit(out_path, out.str());
  return kExitOk;
}

int run_trace_stats(const std::vector<std::string>& extraction,
                    const std::vector<std::string>& enrichment, const std::string& out_path) {
  ordered_json traces;
  traces["extraction"] = ordered_json::array();
  traces["enrichment"] = ordered_json::array();
  for (const auto& path : extraction) traces["extraction"].push_back(read_file(path));
  for (const auto& path : enrichment) traces["enrichment"].push_back(read_file(path));
  ApiString out;
  check(cf_trace_stats(traces.dump().c_str(), &out.value), "trace-stats");
  emit(out_path, out.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardforge: model/data card generation, enrichment, and evaluation"};
  app.require_subcommand(1);

  std::string config_path, mock_script, out_path, out_dir = "out";
  std::string input, metadata_path, kind = "model", card_id, pool_path, manifest_path;
  std::vector<std::string> tags, inputs, filters, extraction_traces, enrichment_traces;
  std::optional<double> r_max, epsilon, top_chunks, cutoff, alpha, top_k, rounds, seed;
  std::optional<double> percentile, min_downloads;
  int pages = 1;
  std::string base_url, record_dir, replay_dir;
  bool keep_all = false;

  auto* ingest = app.add_subcommand("ingest", "chunk a Markdown paper (+ metadata) into JSONL");
  ingest->add_option("input", input, "paper .md file")->required();
  ingest->add_option("--metadata", metadata_path, "repository record JSON");
  ingest->add_option("--out", out_path, "output file (default stdout)");

  auto* generate = app.add_subcommand("generate", "run extraction (and enrichment) to a card");
  generate->add_option("input", input, "paper .md or chunk .jsonl")->required();
  generate->add_option("--kind", kind, "model|data")->required();
  generate->add_option("--metadata", metadata_path, "repository record JSON");
  generate->add_option("--id", card_id, "card id (default: metadata id or file stem)");
  generate->add_option("--tag", tags, "card tags");
  generate->add_option("--config", config_path, "pipeline config JSON");
  generate->add_option("--mock", mock_script, "mock script path (offline run)");
  generate->add_option("--pool", pool_path, "pool JSONL for enrichment");
  generate->add_option("--out", out_dir, "output directory");
  generate->add_option("--r-max", r_max, "max expansion rounds");
  generate->add_option("--epsilon", epsilon, "gain threshold");
  generate->add_option("--top-chunks", top_chunks, "chunks kept per query");
  generate->add_option("--rerank-cutoff", cutoff, "minimum rerank score");
  generate->add_option("--alpha", alpha, "tag overlap threshold");
  generate->add_option("--top-k", top_k, "similar cards kept");

  auto* enrich = app.add_subcommand("enrich", "complete missing fields from a pool");
  enrich->add_option("card", input, "card JSON file")->required();
  enrich->add_option("--pool", pool_path, "pool JSONL")->required();
  enrich->add_option("--config", config_path, "pipeline config JSON");
  enrich->add_option("--mock", mock_script, "mock script path");
  enrich->add_option("--out", out_dir, "output directory");
  enrich->add_option("--alpha", alpha, "tag overlap threshold");
  enrich->add_option("--top-k", top_k, "similar cards kept");

  auto* wcci = app.add_subcommand("wcci", "score card completeness");
  wcci->add_option("cards", inputs, "card .json / .jsonl files")->required();
  wcci->add_option("--out", out_path, "output file (default stdout)");

  auto* pool = app.add_subcommand("pool", "pool construction and reporting");
  pool->require_subcommand(1);
  auto* pool_build = pool->add_subcommand("build", "filter entries into a pool");
  pool_build->add_option("entries", input, "entry JSONL");
  pool_build->add_option("--from-records", manifest_path,
                         "structure raw fetch records via the gateway first");
  pool_build->add_option("--kind", kind, "model|data (for --from-records)");
  pool_build->add_option("--config", config_path, "pipeline config JSON");
  pool_build->add_option("--mock", mock_script, "mock script path");
  pool_build->add_option("--percentile", percentile, "wcci percentile (0,1]");
  pool_build->add_option("--min-downloads", min_downloads, "popularity floor");
  pool_build->add_option("--out", out_path, "output file (default stdout)");
  auto* pool_fetch = pool->add_subcommand("fetch", "list hub records");
  pool_fetch->add_option("--kind", kind, "model|data")->required();
  pool_fetch->add_option("--filter", filters, "modality filters");
  pool_fetch->add_option("--pages", pages, "page budget");
  pool_fetch->add_option("--base-url", base_url, "hub base url");
  pool_fetch->add_option("--record", record_dir, "record responses to dir");
  pool_fetch->add_option("--replay", replay_dir, "replay responses from dir");
  pool_fetch->add_flag("--all", keep_all, "keep records without paper links");
  pool_fetch->add_option("--out", out_path, "output file (default stdout)");
  auto* pool_stats = pool->add_subcommand("stats", "pool summary statistics");
  pool_stats->add_option("--pool", pool_path, "pool JSONL")->required();
  pool_stats->add_option("--tag", tags, "tags to correlate");
  pool_stats->add_option("--out", out_path, "output file (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "LLM-as-a-judge comparison");
  evaluate->add_option("--manifest", manifest_path, "methods/sources manifest JSON")->required();
  evaluate->add_option("--config", config_path, "pipeline config JSON");
  evaluate->add_option("--mock", mock_script, "mock script for every judge");
  evaluate->add_option("--rounds", rounds, "evaluation rounds");
  evaluate->add_option("--seed", seed, "presentation shuffle seed");
  evaluate->add_option("--out", out_path, "report file (default stdout)");

  auto* trace_stats = app.add_subcommand("trace-stats", "summarize trace files");
  trace_stats->add_option("--extraction", extraction_traces, "extraction trace JSONL");
  trace_stats->add_option("--enrichment", enrichment_traces, "enrichment trace JSONL");
  trace_stats->add_option("--out", out_path, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    Config config = Config::load(config_path);
    if (ingest->parsed()) return run_ingest(input, metadata_path, out_path);
    if (generate->parsed())
      return run_generate(input, metadata_path, detect_kind(kind), card_id, tags, config,
                          mock_script, pool_path, out_dir, r_max, epsilon, top_chunks,
                          cutoff, alpha, top_k);
    if (enrich->parsed())
      return run_enrich(input, pool_path, config, mock_script, out_dir, alpha, top_k);
    if (wcci->parsed()) return run_wcci(inputs, out_path);
    if (pool_build->parsed())
      return run_pool_build(input, manifest_path, detect_kind(kind), config, mock_script,
                            percentile, min_downloads, out_path);
    if (pool_fetch->parsed())
      return run_pool_fetch(detect_kind(kind), filters, pages, base_url, record_dir,
                            replay_dir, keep_all, out_path);
    if (pool_stats->parsed()) return run_pool_stats(pool_path, tags, out_path);
    if (evaluate->parsed())
      return run_evaluate(manifest_path, config, mock_script, rounds, seed, out_path);
    if (trace_stats->parsed())
      return run_trace_stats(extraction_traces, enrichment_traces, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAbort;
  }
  return kExitAbort;
}

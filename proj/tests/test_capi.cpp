#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "cardforge/cardforge.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Str {
  char* value = nullptr;
  ~Str() { cf_string_free(value); }
  std::string str() const { return value ? std::string(value) : std::string(); }
};

std::string model_card_json(const std::string& id, const std::string& status) {
  Str tax;
  REQUIRE(cf_taxonomy("model", &tax.value) == CF_OK);
  json fields = json::object();
  for (const auto& name : json::parse(tax.str())) {
    json f;
    f["status"] = status;
    if (status == "filled") {
      f["value"] = "text for " + name.get<std::string>();
      f["confidence"] = 1.0;
    }
    fields[name.get<std::string>()] = f;
  }
  json card;
  card["id"] = id;
  card["kind"] = "model";
  card["tags"] = {"t1"};
  card["fields"] = fields;
  return card.dump();
}

std::string write_temp(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "cardforge_capi";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p);
  out << content;
  return p.string();
}

}  // namespace

TEST_CASE("taxonomy and status strings") {
  Str out;
  REQUIRE(cf_taxonomy("model", &out.value) == CF_OK);
  json names = json::parse(out.str());
  CHECK(names.size() == 8);
  CHECK(names[0] == "model_details");

  Str data;
  REQUIRE(cf_taxonomy("data", &data.value) == CF_OK);
  CHECK(json::parse(data.str()).size() == 12);

  Str bad;
  CHECK(cf_taxonomy("neither", &bad.value) == CF_ERR_PARSE);
  CHECK(std::string(cf_last_error()).find("kind") != std::string::npos);
  CHECK(cf_taxonomy(nullptr, &bad.value) == CF_ERR_INVALID_ARGUMENT);
  CHECK(std::string(cf_status_name(CF_ERR_PARSE)) == "parse_error");
}

TEST_CASE("validate, normalize, and wcci") {
  const std::string card = model_card_json("m", "filled");
  Str report;
  REQUIRE(cf_card_validate(card.c_str(), &report.value) == CF_OK);
  CHECK(json::parse(report.str()).at("ok") == true);

  Str normalized;
  REQUIRE(cf_card_normalize(card.c_str(), &normalized.value) == CF_OK);
  CHECK(json::parse(normalized.str()).at("fields").size() == 8);

  Str score;
  REQUIRE(cf_wcci(card.c_str(), &score.value) == CF_OK);
  json j = json::parse(score.str());
  CHECK(j.at("wcci") == 1.0);
  CHECK(j.at("per_field").size() == 8);

  Str err;
  CHECK(cf_wcci("{broken", &err.value) == CF_ERR_PARSE);
}

TEST_CASE("ingest markdown with metadata") {
  Str out;
  REQUIRE(cf_ingest("# Title\nbody text\n## Part\nmore\n",
                    R"({"id": "org/m", "tags": ["a"], "description": "desc"})",
                    &out.value) == CF_OK);
  std::string jsonl = out.str();
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 3);
  CHECK(jsonl.find("repo_metadata") != std::string::npos);

  Str empty;
  CHECK(cf_ingest("   ", nullptr, &empty.value) == CF_ERR_EMPTY);
}

TEST_CASE("gateway + generate through the mock") {
  const std::string script =
      R"({"op": "rerank", "match": "", "score_all": 0.9})"
      "\n"
      R"({"match": "\nQuestion: ", "response": "useful facts\nCONFIDENCE: 0.75"})"
      "\n"
      R"({"match": "Completeness review", "response": "COMPLETE"})"
      "\n";
  const std::string script_path = write_temp("gen.jsonl", script);

  json config;
  config["base_url"] = "http://127.0.0.1:9";  // never dialed: mock transport
  config["mock_script"] = script_path;

  cf_gateway* gateway = nullptr;
  REQUIRE(cf_gateway_open(config.dump().c_str(), &gateway) == CF_OK);

  Str chunks;
  REQUIRE(cf_ingest("# Paper\nfindings here\n", nullptr, &chunks.value) == CF_OK);

  Str bundle;
  REQUIRE(cf_generate(gateway, chunks.str().c_str(), "model", "the-id", R"(["t"])",
                      nullptr, nullptr, nullptr, &bundle.value) == CF_OK);
  json b = json::parse(bundle.str());
  CHECK(b.at("card").at("id") == "the-id");
  CHECK(b.at("partial_errors") == 0);
  CHECK(b.at("enrichment_trace").is_null());
  CHECK(b.at("extraction_trace").size() == 8);
  for (const auto& [name, field] : b.at("card").at("fields").items()) {
    CHECK(field.at("status") == "filled");
    CHECK(field.at("value") == "useful facts");
  }

  Str log;
  REQUIRE(cf_gateway_call_log(gateway, &log.value) == CF_OK);
  CHECK(log.str().find("\"transport\":\"mock\"") != std::string::npos);
  CHECK(log.str().find("\"transport\":\"http\"") == std::string::npos);

  cf_gateway_close(gateway);
}

TEST_CASE("pool build, load, stats, enrich") {
  // Build entries: distinct wcci via different confidence mixes.
  json entries = json::array();
  for (int i = 0; i < 4; ++i) {
    json entry;
    entry["card"] = json::parse(model_card_json("pool-" + std::to_string(i),
                                                i < 2 ? "filled" : "missing"));
    entry["tags"] = {"a", "b"};
    entry["downloads"] = 100 * (i + 1);
    entry["likes"] = 3;
    json& fields = entry["card"]["fields"];
    (void)fields;
    entries.push_back(entry);
  }
  std::string jsonl;
  for (const auto& e : entries) jsonl += e.dump() + "\n";

  Str filtered;
  REQUIRE(cf_pool_build(jsonl.c_str(), R"({"wcci_percentile": 0.5, "min_downloads": 0})",
                        &filtered.value) == CF_OK);
  const std::string filtered_text = filtered.str();
  CHECK(std::count(filtered_text.begin(), filtered_text.end(), '\n') == 2);

  cf_pool* pool = nullptr;
  REQUIRE(cf_pool_load(filtered.str().c_str(), &pool) == CF_OK);
  Str stats;
  REQUIRE(cf_pool_stats(pool, nullptr, &stats.value) == CF_OK);
  CHECK(json::parse(stats.str()).at("size") == 2);

  // Enrich a card whose intended_use is missing.
  json card = json::parse(model_card_json("target", "filled"));
  card["fields"]["intended_use"] = {{"status", "missing"}};
  card["tags"] = {"a", "b"};

  const std::string script =
      R"({"op": "rerank", "match": "", "score_all": 0.9})"
      "\n"
      R"({"match": "Synthesis target field: intended_use", "response": "borrowed purpose\nCONFIDENCE: 0.5"})"
      "\n";
  json config;
  config["mock_script"] = write_temp("enrich.jsonl", script);
  cf_gateway* gateway = nullptr;
  REQUIRE(cf_gateway_open(config.dump().c_str(), &gateway) == CF_OK);

  Str enriched;
  REQUIRE(cf_enrich(gateway, card.dump().c_str(), pool, nullptr, &enriched.value) == CF_OK);
  json result = json::parse(enriched.str());
  CHECK(result.at("card").at("fields").at("intended_use").at("value") == "borrowed purpose");
  CHECK(result.at("card").at("fields").at("intended_use").at("provenance").at("source") ==
        "pool_transfer");

  cf_gateway_close(gateway);
  cf_pool_close(pool);
}

TEST_CASE("evaluate via manifest files") {
  const std::string sources_path =
      write_temp("sources.jsonl",
                 R"({"id": 0, "source": "paper_section", "heading": "H", "body": "content"})"
                 "\n");
  const std::string x_path = write_temp("x.json", model_card_json("shared", "filled"));
  std::string y_json = model_card_json("shared", "filled");
  // Make y's content distinguishable for the mock.
  json y = json::parse(y_json);
  for (auto& [name, field] : y.at("fields").items()) field["value"] = "weaker " + name;
  const std::string y_path = write_temp("y.json", y.dump());

  const std::string script =
      R"({"match": "text for ", "response": "5"})"
      "\n"
      R"({"match": "weaker ", "response": "3"})"
      "\n";
  const std::string script_path = write_temp("judge.jsonl", script);

  json manifest;
  manifest["methods"]["alpha"] = {x_path};
  manifest["methods"]["beta"] = {y_path};
  manifest["sources"]["shared"] = sources_path;

  json judge_config;
  judge_config["rounds"] = 2;
  judge_config["seed"] = 11;
  judge_config["judges"] = {json{{"mock_script", script_path}},
                            json{{"mock_script", script_path}}};

  Str report;
  REQUIRE(cf_evaluate(manifest.dump().c_str(), judge_config.dump().c_str(), &report.value) ==
          CF_OK);
  json r = json::parse(report.str());
  CHECK(r.at("mean_scores").at("alpha").at("faithfulness") == 5.0);
  CHECK(r.at("mean_scores").at("beta").at("faithfulness") == 3.0);
  CHECK(r.at("ranks").at("alpha").at("average") == 1.0);
  CHECK(r.at("records").size() == 2 * 5 * 2 * 2);
}

TEST_CASE("trace stats over the C boundary") {
  json traces;
  traces["extraction"] = {R"({"field": "f", "round": 0, "outcome": "complete"})" "\n"};
  traces["enrichment"] = json::array();
  Str out;
  REQUIRE(cf_trace_stats(traces.dump().c_str(), &out.value) == CF_OK);
  CHECK(json::parse(out.str()).at("sessions") == 1);

  Str err;
  CHECK(cf_trace_stats(R"({"extraction": ["nonsense"]})", &err.value) == CF_ERR_PARSE);
  CHECK(std::string(cf_last_error()).find("trace") != std::string::npos);
}

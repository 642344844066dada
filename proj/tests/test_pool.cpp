#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "support.hpp"

#include "cardforge/fileio.hpp"
#include "cardforge/metrics.hpp"
#include "cardforge/pool.hpp"
#include "cardforge/rng.hpp"

using namespace cardforge;
using namespace cftest;
using nlohmann::json;

TEST_CASE("build_pool keeps the top percentile by wcci") {
  std::vector<PoolEntry> entries;
  SplitMix64 rng(808);
  std::vector<double> values;
  for (int i = 0; i < 100; ++i) values.push_back(0.005 * (i + 1));
  deterministic_shuffle(values, 99);
  for (int i = 0; i < 100; ++i)
    entries.push_back(synthetic_entry("m" + std::to_string(i), CardKind::Model,
                                      values[static_cast<std::size_t>(i)], 1000));

  PoolConfig config{0.10, 0};
  auto pool = build_pool(entries, config);
  REQUIRE(pool.size() == 10);

  std::vector<double> sorted = values;
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 0; i < pool.size(); ++i)
    CHECK(pool[i].wcci == doctest::Approx(sorted[i]));
  // Output sorted descending; every kept wcci >= every dropped one.
  for (std::size_t i = 0; i + 1 < pool.size(); ++i) CHECK(pool[i].wcci >= pool[i + 1].wcci);
}

TEST_CASE("build_pool size is ceil(percentile x survivors) exactly") {
  SplitMix64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.next_below(40);
    std::vector<PoolEntry> entries;
    for (std::size_t i = 0; i < n; ++i)
      entries.push_back(synthetic_entry("e" + std::to_string(i), CardKind::Data,
                                        static_cast<double>(rng.next_below(1000)) / 1000.0,
                                        static_cast<long long>(rng.next_below(500))));
    const long long min_downloads = static_cast<long long>(rng.next_below(300));
    std::size_t survivors = 0;
    for (const auto& e : entries)
      if (e.downloads >= min_downloads) ++survivors;
    if (survivors == 0) continue;
    const double pct = 0.05 + 0.001 * static_cast<double>(rng.next_below(950));
    auto pool = build_pool(entries, PoolConfig{pct, min_downloads});
    REQUIRE(pool.size() ==
            static_cast<std::size_t>(std::ceil(pct * static_cast<double>(survivors))));
  }
}

TEST_CASE("build_pool popularity floor and tie handling") {
  std::vector<PoolEntry> low;
  low.push_back(synthetic_entry("a", CardKind::Model, 0.9, 5));
  low.push_back(synthetic_entry("b", CardKind::Model, 0.8, 50));
  try {
    build_pool(low, PoolConfig{0.5, 100});
    FAIL("expected EmptyAfterFilter");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyAfterFilter);
  }

  // Two entries tied at the boundary: downloads decide.
  std::vector<PoolEntry> tied;
  tied.push_back(synthetic_entry("rich", CardKind::Model, 0.5, 9000));
  tied.push_back(synthetic_entry("poor", CardKind::Model, 0.5, 10));
  tied.push_back(synthetic_entry("top", CardKind::Model, 0.9, 10));
  auto pool = build_pool(tied, PoolConfig{0.67, 0});  // keep ceil(2.01) = 3? no: 0.67*3=2.01 -> 3
  // pick a percentile that keeps exactly 2 of 3
  pool = build_pool(tied, PoolConfig{0.5, 0});  // ceil(1.5) = 2
  REQUIRE(pool.size() == 2);
  CHECK(pool[0].card.id == "top");
  CHECK(pool[1].card.id == "rich");

  std::vector<PoolEntry> mixed{synthetic_entry("m", CardKind::Model, 0.5, 10),
                               synthetic_entry("d", CardKind::Data, 0.5, 10)};
  CHECK_THROWS_AS(build_pool(mixed, PoolConfig{0.5, 0}), Error);
  CHECK_THROWS_AS(build_pool({}, PoolConfig{0.5, 0}), Error);
}

TEST_CASE("pool save/load round-trips and revalidates wcci") {
  std::vector<PoolEntry> entries;
  entries.push_back(make_pool_entry(filled_card("one", CardKind::Model, 1.0), HubRecord{}));
  Card half = empty_card("two", CardKind::Model);
  half.fields[0].value = "v";
  half.fields[0].status = FieldStatus::filled(Confidence::from_weight(0.5));
  HubRecord rec;
  rec.tags = {"text-generation", "arxiv:2301.00001"};
  rec.downloads = 777;
  rec.source_ref = "arxiv:2301.00001";
  entries.push_back(make_pool_entry(half, rec));

  std::string jsonl = pool_to_jsonl(entries);
  auto loaded = pool_from_jsonl(jsonl);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].card == entries[0].card);
  CHECK(loaded[1].downloads == 777);
  CHECK(loaded[1].tags.contains("arxiv:2301.00001"));
  CHECK(loaded[1].source_ref == "arxiv:2301.00001");
  CHECK(loaded[1].wcci == doctest::Approx(0.5 / 8.0));
  CHECK(pool_to_jsonl(loaded) == jsonl);  // lossless

  // A corrupted wcci is a load error, not a silent fix.
  std::string corrupted = jsonl;
  auto pos = corrupted.find("\"wcci\":1.0");
  REQUIRE(pos != std::string::npos);
  corrupted.replace(pos, 10, "\"wcci\":0.3");
  try {
    pool_from_jsonl(corrupted);
    FAIL("expected wcci mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ValidationFailed);
  }
}

TEST_CASE("filter_paper_linked") {
  HubRecord with_arxiv;
  with_arxiv.id = "a";
  with_arxiv.tags = {"task:x", "arxiv:2301.00001"};
  HubRecord plain;
  plain.id = "b";
  plain.tags = {"license:mit"};
  HubRecord with_doi;
  with_doi.id = "c";
  with_doi.tags = {"DOI:10.5555/abc"};

  auto kept = filter_paper_linked({with_arxiv, plain, with_doi});
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].id == "a");
  CHECK(kept[0].source_ref == "arxiv:2301.00001");
  CHECK(kept[1].id == "c");
  CHECK(kept[1].source_ref == "DOI:10.5555/abc");
}

namespace {

struct ListingServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~ListingServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string origin() const { return "http://127.0.0.1:" + std::to_string(port); }
};

json listing_record(const std::string& id, long long downloads) {
  return json{{"id", id},
              {"tags", {"text-generation", "arxiv:2301.0000" + id.substr(id.size() - 1)}},
              {"downloads", downloads},
              {"likes", downloads / 10},
              {"description", "model " + id}};
}

}  // namespace

TEST_CASE("fetch_hub_records pages through a fixture server") {
  ListingServer ls;
  ls.server.Get("/api/models", [](const httplib::Request& req, httplib::Response& res) {
    const int page = std::stoi(req.get_param_value("page"));
    json body = json::array();
    if (page == 0)
      body = {listing_record("org/m0", 100), listing_record("org/m1", 200),
              listing_record("org/m2", 300)};
    else if (page == 1)
      body = {listing_record("org/m3", 400), listing_record("org/m4", 500),
              listing_record("org/m5", 600)};
    res.set_content(body.dump(), "application/json");
  });
  ls.start();

  FetchOptions options;
  options.base_url = ls.origin();
  options.page_budget = 3;  // page 2 is empty, fetch stops there
  auto result = fetch_hub_records(CardKind::Model, options);
  REQUIRE(result.records.size() == 6);
  CHECK(result.records[0].id == "org/m0");
  CHECK(result.records[5].id == "org/m5");

  options.page_budget = 1;
  auto first_page = fetch_hub_records(CardKind::Model, options);
  CHECK(first_page.records.size() == 3);
}

TEST_CASE("fetch_hub_records surfaces http failures and skips bad records") {
  ListingServer ls;
  ls.server.Get("/api/datasets", [](const httplib::Request&, httplib::Response& res) {
    json body = json::array();
    body.push_back(listing_record("org/d0", 10));
    body.push_back(json{{"tags", {"no-id-here"}}});  // malformed: no id
    res.set_content(body.dump(), "application/json");
  });
  ls.start();

  FetchOptions options;
  options.base_url = ls.origin();
  auto result = fetch_hub_records(CardKind::Data, options);
  CHECK(result.records.size() == 1);
  CHECK(result.warnings.size() == 1);

  FetchOptions missing;
  missing.base_url = ls.origin();
  missing.page_budget = 1;
  try {
    fetch_hub_records(CardKind::Model, missing);  // no /api/models route -> 404
    FAIL("expected HttpError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::HttpError);
    CHECK(std::string(e.what()).find("404") != std::string::npos);
  }
}

TEST_CASE("fetch_hub_records records and replays pages") {
  ListingServer ls;
  ls.server.Get("/api/models", [](const httplib::Request& req, httplib::Response& res) {
    const int page = std::stoi(req.get_param_value("page"));
    json body = json::array();
    if (page == 0) body = {listing_record("org/m0", 100)};
    res.set_content(body.dump(), "application/json");
  });
  ls.start();

  const auto dir = std::filesystem::temp_directory_path() / "cardforge_fetch_fixture";
  std::filesystem::remove_all(dir);

  FetchOptions record_opts;
  record_opts.base_url = ls.origin();
  record_opts.record_dir = dir.string();
  record_opts.page_budget = 2;
  auto live = fetch_hub_records(CardKind::Model, record_opts);
  REQUIRE(live.records.size() == 1);

  FetchOptions replay_opts;
  replay_opts.base_url = "http://127.0.0.1:9";  // unreachable: replay must not dial out
  replay_opts.replay_dir = dir.string();
  replay_opts.page_budget = 2;
  auto replayed = fetch_hub_records(CardKind::Model, replay_opts);
  REQUIRE(replayed.records.size() == 1);
  CHECK(replayed.records[0].id == live.records[0].id);
  std::filesystem::remove_all(dir);
}

namespace {

std::string data_card_fields_json() {
  json fields = json::object();
  for (const auto& entry : taxonomy_entries(CardKind::Data))
    fields[std::string(entry.name)] = {{"value", "described " + std::string(entry.name)},
                                       {"status", "filled"},
                                       {"confidence", 0.75}};
  return fields.dump();
}

}  // namespace

TEST_CASE("structure_card parses a clean response") {
  HubRecord record;
  record.id = "org/dataset";
  record.tags = {"task:asr"};
  record.downloads = 10;
  record.description = "a speech corpus";

  MockGateway mock;
  mock.add_generate("Structure the following repository description",
                    data_card_fields_json());
  Card card = structure_card(record, CardKind::Data, mock);
  CHECK(card.id == "org/dataset");
  CHECK(card.kind == CardKind::Data);
  CHECK(validate_card(card).ok());
  for (const auto& f : card.fields) {
    CHECK(f.status.is_filled());
    CHECK(f.status.confidence.weight() == 0.75);
    CHECK(f.provenance.kind == ProvenanceKind::Imported);
  }
}

TEST_CASE("structure_card repairs truncated output once") {
  HubRecord record;
  record.id = "org/fixit";
  record.description = "needs repair";

  MockGateway mock;
  mock.add_generate("Structure the following repository description",
                    "{\"dataset_details\": {\"value\": \"oops");  // truncated
  mock.add_generate("could not be parsed", data_card_fields_json());
  Card card = structure_card(record, CardKind::Data, mock);
  CHECK(validate_card(card).ok());

  // The call log shows the second, repair call.
  auto log = mock.call_log();
  REQUIRE(log.size() == 2);
  CHECK(log[1].outcome == "repair");
}

TEST_CASE("structure_card gives up after the repair attempt") {
  HubRecord record;
  record.id = "org/prose";
  record.description = "never valid";

  MockGateway mock;
  mock.add_generate("Structure the following repository description",
                    "Sorry, I can only describe it in prose.");
  mock.add_generate("could not be parsed", "Still prose, my apologies.");
  try {
    structure_card(record, CardKind::Data, mock);
    FAIL("expected StructuringFailed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::StructuringFailed);
    CHECK(std::string(e.what()).find("org/prose") != std::string::npos);
  }

  HubRecord empty;
  empty.id = "org/empty";
  CHECK_THROWS_AS(structure_card(empty, CardKind::Data, mock), Error);
}

TEST_CASE("pool stats summarize size, quartiles, tags, and correlations") {
  std::vector<PoolEntry> entries;
  for (int i = 0; i < 8; ++i) {
    std::set<std::string> tags{"base"};
    if (i >= 4) tags.insert("good-docs");
    entries.push_back(synthetic_entry("s" + std::to_string(i), CardKind::Model,
                                      0.1 * (i + 1), 50 * (i + 1), tags));
  }
  std::string stats = pool_stats_json(entries, {"good-docs"});
  json j = json::parse(stats);
  CHECK(j.at("size") == 8);
  CHECK(j.at("wcci_quartiles").at("min") == doctest::Approx(0.1));
  CHECK(j.at("wcci_quartiles").at("max") == doctest::Approx(0.8));
  CHECK(j.at("tag_frequencies").at("base") == 8);
  CHECK(j.at("tag_correlations").at("good-docs").at("spearman_rho").get<double>() > 0.0);

  CHECK_THROWS_AS(pool_stats_json({}, {}), Error);
}

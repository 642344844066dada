#include "doctest.h"

#include <cmath>

#include "support.hpp"

#include "cardforge/enrich.hpp"
#include "cardforge/metrics.hpp"
#include "cardforge/rng.hpp"

using namespace cardforge;
using namespace cftest;

namespace {

PoolEntry entry_with_field(const std::string& id, const std::set<std::string>& tags,
                           const std::string& field_name, const std::string& value) {
  PoolEntry entry = synthetic_entry(id, CardKind::Model, 0.0, 1000, tags);
  for (auto& f : entry.card.fields) {
    if (f.key.name == field_name) {
      f.value = value;
      f.status = FieldStatus::filled(Confidence::from_weight(1.0));
      f.provenance = FieldProvenance::imported();
    }
  }
  entry.wcci = wcci(entry.card).value;
  return entry;
}

}  // namespace

TEST_CASE("incomplete_fields selects Missing only") {
  Card card = filled_card("f", CardKind::Model);
  CHECK(incomplete_fields(card).empty());

  Card mixed = empty_card("m", CardKind::Model);
  mixed.fields[0].value = "present";
  mixed.fields[0].status = FieldStatus::filled(Confidence::from_weight(1.0));
  for (std::size_t i = 1; i + 3 < mixed.fields.size(); ++i) {
    mixed.fields[i].value = "x";
    mixed.fields[i].status = FieldStatus::filled(Confidence::from_weight(0.5));
  }
  // Last three: two missing, one not-applicable.
  mixed.fields[5].status = FieldStatus::missing();
  mixed.fields[5].value.clear();
  mixed.fields[6].status = FieldStatus::missing();
  mixed.fields[6].value.clear();
  mixed.fields[7].status = FieldStatus::not_applicable();
  mixed.fields[7].value.clear();

  auto missing = incomplete_fields(mixed);
  CHECK(missing == std::set<std::string>{"ethical_considerations", "performance_metrics"});

  Card all_missing = empty_card("a", CardKind::Model);
  CHECK(incomplete_fields(all_missing).size() == 8);
}

TEST_CASE("idf closed forms") {
  std::vector<PoolEntry> pool;
  for (int i = 0; i < 10; ++i) {
    std::set<std::string> tags{"everywhere"};
    if (i == 0) tags.insert("rare");
    pool.push_back(synthetic_entry("e" + std::to_string(i), CardKind::Model, 0.0, 1, tags));
  }
  IdfTable idf = IdfTable::from_pool(pool);
  CHECK(idf.weight("everywhere") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(idf.weight("rare") == doctest::Approx(std::log(11.0 / 2.0) + 1.0).epsilon(1e-12));
  CHECK(idf.weight("rare") == doctest::Approx(2.7047).epsilon(1e-4));
  // Unseen tags take the df = 0 smoothing.
  CHECK(idf.weight("never-seen") == doctest::Approx(std::log(11.0) + 1.0).epsilon(1e-12));

  CHECK_THROWS_AS(IdfTable::from_pool({}), Error);
}

TEST_CASE("tag_overlap weighted jaccard") {
  std::vector<PoolEntry> pool{synthetic_entry("a", CardKind::Model, 0.0, 1, {"x"}),
                              synthetic_entry("b", CardKind::Model, 0.0, 1, {"y"})};
  IdfTable idf = IdfTable::from_pool(pool);

  TagVector same_a = TagVector::of({"x", "y"}, idf);
  TagVector same_b = TagVector::of({"x", "y"}, idf);
  CHECK(tag_overlap(same_a, same_b) == 1.0);

  TagVector disjoint = TagVector::of({"z1", "z2"}, idf);
  CHECK(tag_overlap(same_a, disjoint) == 0.0);

  CHECK(tag_overlap(TagVector{}, TagVector{}) == 0.0);

  // Uniform weights: {x,y} vs {y,z} -> 1/3.
  TagVector u1, u2;
  u1.weights = {{"x", 1.0}, {"y", 1.0}};
  u2.weights = {{"y", 1.0}, {"z", 1.0}};
  CHECK(tag_overlap(u1, u2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("tag_overlap matches a brute-force oracle on random sets") {
  SplitMix64 rng(606);
  for (int trial = 0; trial < 500; ++trial) {
    TagVector a, b;
    const std::size_t universe = 10;
    std::map<std::string, double> weights;
    for (std::size_t t = 0; t < universe; ++t)
      weights["t" + std::to_string(t)] = 0.25 + static_cast<double>(rng.next_below(100)) / 25.0;
    for (const auto& [tag, w] : weights) {
      if (rng.next_below(2)) a.weights[tag] = w;
      if (rng.next_below(2)) b.weights[tag] = w;
    }

    double inter = 0.0, uni = 0.0;
    for (const auto& [tag, w] : weights) {
      const bool in_a = a.weights.contains(tag);
      const bool in_b = b.weights.contains(tag);
      if (in_a && in_b) inter += w;
      if (in_a || in_b) uni += w;
    }
    const double expected = uni == 0.0 ? 0.0 : inter / uni;
    REQUIRE(tag_overlap(a, b) == doctest::Approx(expected).epsilon(1e-12));
    REQUIRE(tag_overlap(b, a) == doctest::Approx(tag_overlap(a, b)).epsilon(1e-15));
    REQUIRE(tag_overlap(a, b) >= 0.0);
    REQUIRE(tag_overlap(a, b) <= 1.0);
    const bool equal_sets = a.weights == b.weights;
    if (equal_sets && !a.weights.empty()) REQUIRE(tag_overlap(a, b) == 1.0);
    if (!equal_sets && !a.weights.empty() && !b.weights.empty())
      REQUIRE((tag_overlap(a, b) < 1.0 || a.weights == b.weights));
  }
}

TEST_CASE("field categories") {
  CHECK(field_category(FieldKey::make(CardKind::Model, "model_details")) == FieldCategory::Unique);
  CHECK(field_category(FieldKey::make(CardKind::Model, "intended_use")) == FieldCategory::Shared);
  CHECK(field_category(FieldKey::make(CardKind::Model, "caveats_recommendations")) ==
        FieldCategory::Shared);
  CHECK(field_category(FieldKey::make(CardKind::Model, "safety_considerations")) ==
        FieldCategory::General);
  CHECK(field_category(FieldKey::make(CardKind::Model, "ethical_considerations")) ==
        FieldCategory::General);
  CHECK(field_category(FieldKey::make(CardKind::Data, "dataset_details")) == FieldCategory::Unique);
  CHECK(field_category(FieldKey::make(CardKind::Data, "legal_ethical")) == FieldCategory::General);
  CHECK(field_category(FieldKey::make(CardKind::Data, "dataset_structure")) == FieldCategory::Shared);

  // Total over both taxonomies.
  for (CardKind kind : {CardKind::Model, CardKind::Data})
    for (const auto& key : taxonomy(kind)) CHECK_NOTHROW(field_category(key));
}

TEST_CASE("retrieve_similar applies threshold then rerank") {
  Card card = empty_card("target", CardKind::Model);
  card.tags = {"a", "b"};

  SUBCASE("no survivor means no gateway call") {
    std::vector<PoolEntry> pool{
        synthetic_entry("far", CardKind::Model, 0.0, 1, {"z1", "z2"})};
    MockGateway mock;
    auto result = retrieve_similar(card, pool, EnrichConfig{}, mock);
    CHECK(result.selected.empty());
    CHECK(mock.call_log().empty());
  }

  SUBCASE("three survivors, k = 10, mock order") {
    std::vector<PoolEntry> pool;
    pool.push_back(synthetic_entry("p0", CardKind::Model, 0.0, 1, {"a", "b"}));
    pool.push_back(synthetic_entry("p1", CardKind::Model, 0.0, 1, {"a", "b"}));
    pool.push_back(synthetic_entry("p2", CardKind::Model, 0.0, 1, {"a", "b"}));
    pool.push_back(synthetic_entry("off", CardKind::Model, 0.0, 1, {"q"}));
    MockGateway mock;
    mock.add_rerank("", {0.1, 0.9, 0.5});  // survivors p0, p1, p2
    auto result = retrieve_similar(card, pool, EnrichConfig{}, mock);
    REQUIRE(result.selected.size() == 3);
    CHECK(result.selected[0].card.id == "p1");
    CHECK(result.selected[1].card.id == "p2");
    CHECK(result.selected[2].card.id == "p0");
    CHECK(result.overlaps.size() == 3);
    CHECK(!result.overlaps.contains("off"));
  }

  SUBCASE("fifteen survivors truncate to top k") {
    std::vector<PoolEntry> pool;
    std::vector<double> scores;
    for (int i = 0; i < 15; ++i) {
      pool.push_back(synthetic_entry("p" + std::to_string(i), CardKind::Model, 0.0, 1,
                                     {"a", "b"}));
      scores.push_back(static_cast<double>(i));  // p14 best
    }
    MockGateway mock;
    mock.add_rerank("", scores);
    auto result = retrieve_similar(card, pool, EnrichConfig{}, mock);
    REQUIRE(result.selected.size() == 10);
    CHECK(result.selected.front().card.id == "p14");
    CHECK(result.selected.back().card.id == "p5");
  }

  SUBCASE("empty pool errors") {
    MockGateway mock;
    CHECK_THROWS_AS(retrieve_similar(card, {}, EnrichConfig{}, mock), Error);
  }
}

TEST_CASE("synthesize_field transfers and signals non-applicability") {
  Card card = empty_card("t", CardKind::Model);
  MockGateway mock;
  mock.add_generate("Synthesis target field: intended_use",
                    "chat assistants and coding help\nCONFIDENCE: 0.75");
  std::string out = synthesize_field({"chat assistants and coding help"}, card,
                                     FieldKey::make(CardKind::Model, "intended_use"), mock);
  CHECK(out.find("chat assistants and coding help") != std::string::npos);

  mock.add_generate("Synthesis target field: safety_considerations", "NOT_APPLICABLE");
  out = synthesize_field({"whatever"}, card,
                         FieldKey::make(CardKind::Model, "safety_considerations"), mock);
  CHECK(out == "NOT_APPLICABLE");

  // Unique fields are a precondition violation, not a call.
  auto before = mock.call_log().size();
  CHECK_THROWS_AS(synthesize_field({"v"}, card,
                                   FieldKey::make(CardKind::Model, "model_details"), mock),
                  Error);
  CHECK(mock.call_log().size() == before);
  CHECK_THROWS_AS(synthesize_field({}, card,
                                   FieldKey::make(CardKind::Model, "intended_use"), mock),
                  Error);
}

TEST_CASE("run_icc_mp leaves complete cards untouched with zero calls") {
  Card card = filled_card("done", CardKind::Model);
  std::vector<PoolEntry> pool{entry_with_field("p", {"a"}, "intended_use", "v")};
  MockGateway mock;
  IccMpResult result = run_icc_mp(card, pool, EnrichConfig{}, mock);
  CHECK(mock.call_log().empty());
  CHECK(serialize_card(result.card) == serialize_card(card));
  CHECK(result.card == card);
}

TEST_CASE("run_icc_mp fills a missing shared field with pool provenance") {
  Card card = filled_card("target", CardKind::Model);
  card.tags = {"a", "b"};
  for (auto& f : card.fields) {
    if (f.key.name == "intended_use") {
      f.value.clear();
      f.status = FieldStatus::missing();
      f.provenance = FieldProvenance::unset();
    }
  }

  std::vector<PoolEntry> pool{
      entry_with_field("org/first", {"a", "b"}, "intended_use", "serving chat"),
      entry_with_field("org/second", {"a", "b"}, "intended_use", "assistants"),
  };

  MockGateway mock;
  mock.add_rerank("", {0.9, 0.8});
  mock.add_generate("Synthesis target field: intended_use",
                    "synthesized intended use\nCONFIDENCE: 0.75");

  IccMpResult result = run_icc_mp(card, pool, EnrichConfig{}, mock);
  const Field* enriched = result.card.find("intended_use");
  REQUIRE(enriched != nullptr);
  CHECK(enriched->status.state == FieldState::Filled);
  CHECK(enriched->value == "synthesized intended use");
  CHECK(enriched->status.confidence.weight() == 0.75);
  CHECK(enriched->provenance.kind == ProvenanceKind::PoolTransfer);
  CHECK(enriched->provenance.source_card_ids ==
        std::vector<std::string>{"org/first", "org/second"});

  bool saw_enriched_trace = false;
  for (const auto& t : result.trace)
    if (t.field == "intended_use" && t.outcome == "enriched") saw_enriched_trace = true;
  CHECK(saw_enriched_trace);

  // The synthesis prompt carries candidate values and the category rubric.
  const std::string& prompt = mock.call_log().back().request_text;
  CHECK(prompt.find("serving chat") != std::string::npos);
  CHECK(prompt.find("assistants") != std::string::npos);
  CHECK(prompt.find("shared property") != std::string::npos);
}

TEST_CASE("run_icc_mp never touches unique fields") {
  Card card = filled_card("target", CardKind::Model);
  card.tags = {"a"};
  for (auto& f : card.fields) {
    if (f.key.name == "model_details") {
      f.value.clear();
      f.status = FieldStatus::missing();
      f.provenance = FieldProvenance::unset();
    }
  }
  std::vector<PoolEntry> pool{entry_with_field("p", {"a"}, "model_details", "someone else's")};
  MockGateway mock;  // any gateway use would be unscripted and explode
  IccMpResult result = run_icc_mp(card, pool, EnrichConfig{}, mock);
  CHECK(result.card.find("model_details")->status.state == FieldState::Missing);
  CHECK(mock.call_log().empty());
  bool saw_skip = false;
  for (const auto& t : result.trace)
    if (t.field == "model_details" && t.outcome == "skipped_unique") saw_skip = true;
  CHECK(saw_skip);
}

TEST_CASE("run_icc_mp respects the NOT_APPLICABLE sentinel") {
  Card card = filled_card("t", CardKind::Model);
  card.tags = {"a"};
  for (auto& f : card.fields) {
    if (f.key.name == "safety_considerations") {
      f.value.clear();
      f.status = FieldStatus::missing();
      f.provenance = FieldProvenance::unset();
    }
  }
  std::vector<PoolEntry> pool{entry_with_field("p", {"a"}, "safety_considerations", "filters")};
  MockGateway mock;
  mock.add_rerank_all("", 0.9);
  mock.add_generate("Synthesis target field: safety_considerations", "NOT_APPLICABLE");
  IccMpResult result = run_icc_mp(card, pool, EnrichConfig{}, mock);
  const Field* f = result.card.find("safety_considerations");
  CHECK(f->status.state == FieldState::NotApplicable);
  CHECK(f->value.empty());
  CHECK(f->provenance.kind == ProvenanceKind::PoolTransfer);
}

TEST_CASE("run_icc_mp fuzz: non-destructive and unique-safe") {
  SplitMix64 rng(171717);
  std::vector<PoolEntry> pool;
  for (int i = 0; i < 6; ++i) {
    PoolEntry entry = synthetic_entry("pool" + std::to_string(i),
                                      i % 2 ? CardKind::Model : CardKind::Data, 0.0, 500,
                                      {"shared-tag", "extra" + std::to_string(i % 3)});
    for (auto& f : entry.card.fields) {
      f.value = "pool value for " + f.key.name;
      f.status = FieldStatus::filled(Confidence::from_weight(1.0));
    }
    entry.wcci = wcci(entry.card).value;
    pool.push_back(std::move(entry));
  }

  for (int trial = 0; trial < 200; ++trial) {
    const CardKind kind = trial % 2 ? CardKind::Model : CardKind::Data;
    Card card = empty_card("fuzz" + std::to_string(trial), kind);
    card.tags = {"shared-tag", "extra0"};
    for (auto& f : card.fields) {
      if (rng.next_below(2)) {
        f.value = "kept " + f.key.name + " #" + std::to_string(trial);
        f.status = FieldStatus::filled(Confidence::from_weight(0.75));
      } else if (rng.next_below(4) == 0) {
        f.status = FieldStatus::not_applicable();
      }
    }

    std::vector<PoolEntry> kind_pool;
    for (const auto& e : pool)
      if (e.card.kind == kind) kind_pool.push_back(e);

    MockGateway mock;
    mock.add_rerank_all("", 0.9);
    mock.add_generate("Synthesis target field:", "synthesized\nCONFIDENCE: 0.5");

    const std::string before = serialize_card(card);
    IccMpResult result = run_icc_mp(card, kind_pool, EnrichConfig{}, mock);

    const bool had_missing = !incomplete_fields(card).empty();
    if (!had_missing) {
      REQUIRE(mock.call_log().empty());
      REQUIRE(serialize_card(result.card) == before);
    }
    for (std::size_t i = 0; i < card.fields.size(); ++i) {
      const Field& was = card.fields[i];
      const Field& now = result.card.fields[i];
      if (was.status.is_filled()) {
        REQUIRE(now.value == was.value);  // byte-for-byte
        REQUIRE(now.status == was.status);
      }
      if (was.status.state == FieldState::NotApplicable)
        REQUIRE(now.status.state == FieldState::NotApplicable);
      if (field_category(was.key) == FieldCategory::Unique)
        REQUIRE(now.status == was.status);
    }
  }
}

TEST_CASE("enrich trace serialization") {
  EnrichFieldTrace t;
  t.field = "intended_use";
  t.candidate_ids = {"a", "b"};
  t.overlaps = {{"a", 0.8}, {"b", 0.7}};
  t.outcome = "enriched";
  std::string jsonl = enrich_trace_jsonl({t});
  CHECK(jsonl.find("\"field\":\"intended_use\"") != std::string::npos);
  CHECK(jsonl.find("\"outcome\":\"enriched\"") != std::string::npos);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 1);
}

#include "cardforge/enrich.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "cardforge/extract.hpp"

namespace cardforge {

using nlohmann::ordered_json;

void EnrichConfig::validate() const {
  if (top_k < 1) throw Error(Errc::InvalidConfig, "top_k must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) throw Error(Errc::InvalidConfig, "alpha must be in [0, 1]");
}

EnrichConfig EnrichConfig::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("enrich config: ") + e.what());
  }
  EnrichConfig c;
  c.top_k = j.value("top_k", 10);
  c.alpha = j.value("alpha", 0.5);
  c.validate();
  return c;
}

IdfTable IdfTable::from_pool(const std::vector<PoolEntry>& pool) {
  if (pool.empty()) throw Error(Errc::EmptyPool, "idf needs a non-empty pool");
  IdfTable table;
  table.pool_size_ = pool.size();
  std::map<std::string, std::size_t> df;
  for (const auto& entry : pool)
    for (const auto& tag : entry.tags) ++df[tag];
  for (const auto& [tag, count] : df)
    table.weights_[tag] = std::log((1.0 + static_cast<double>(pool.size())) /
                                   (1.0 + static_cast<double>(count))) + 1.0;
  return table;
}

double IdfTable::weight(const std::string& tag) const {
  auto it = weights_.find(tag);
  if (it != weights_.end()) return it->second;
  return std::log(1.0 + static_cast<double>(pool_size_)) + 1.0;  // df = 0
}

TagVector TagVector::of(const std::set<std::string>& tags, const IdfTable& idf) {
  TagVector v;
  for (const auto& tag : tags) v.weights[tag] = idf.weight(tag);
  return v;
}

double tag_overlap(const TagVector& a, const TagVector& b) {
  double inter = 0.0, uni = 0.0;
  auto ia = a.weights.begin();
  auto ib = b.weights.begin();
  while (ia != a.weights.end() || ib != b.weights.end()) {
    if (ib == b.weights.end() || (ia != a.weights.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.weights.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += ia->second;
      uni += ia->second;
      ++ia;
      ++ib;
    }
  }
  if (uni == 0.0) return 0.0;
  return inter / uni;
}

std::string_view to_string(FieldCategory c) {
  switch (c) {
    case FieldCategory::Shared: return "shared";
    case FieldCategory::Unique: return "unique";
    case FieldCategory::General: return "general";
  }
  return "shared";
}

FieldCategory field_category(const FieldKey& key) {
  if (!find_taxonomy_entry(key.kind, key.name))
    throw Error(Errc::UnknownField, key.name);
  if (key.kind == CardKind::Model) {
    if (key.name == "model_details") return FieldCategory::Unique;
    if (key.name == "safety_considerations" || key.name == "ethical_considerations")
      return FieldCategory::General;
    return FieldCategory::Shared;
  }
  if (key.name == "dataset_details") return FieldCategory::Unique;
  if (key.name == "legal_ethical") return FieldCategory::General;
  return FieldCategory::Shared;
}

std::set<std::string> incomplete_fields(const Card& card) {
  require_valid(card);
  std::set<std::string> missing;
  for (const auto& f : card.fields)
    if (f.status.state == FieldState::Missing) missing.insert(f.key.name);
  return missing;
}

std::string card_summary(const Card& card) {
  std::string out = "name: " + card.id + "\ntags: ";
  bool first = true;
  for (const auto& tag : card.tags) {
    if (!first) out += ", ";
    first = false;
    out += tag;
  }
  out += "\n";
  for (const auto& f : card.fields) {
    if (!f.status.is_filled()) continue;
    out += f.key.name + ": " + f.value.substr(0, 400) + "\n";
  }
  return out;
}

RetrievalResult retrieve_similar(const Card& card, const std::vector<PoolEntry>& pool,
                                 const EnrichConfig& config, Gateway& gateway) {
  config.validate();
  if (pool.empty()) throw Error(Errc::EmptyPool, "cannot retrieve from an empty pool");

  const IdfTable idf = IdfTable::from_pool(pool);
  const TagVector target = TagVector::of(card.tags, idf);

  RetrievalResult result;
  std::vector<const PoolEntry*> survivors;
  for (const auto& entry : pool) {
    double overlap = tag_overlap(target, TagVector::of(entry.tags, idf));
    if (overlap > config.alpha) {
      survivors.push_back(&entry);
      result.overlaps[entry.card.id] = overlap;
    }
  }
  if (survivors.empty()) return result;

  std::vector<std::string> summaries;
  summaries.reserve(survivors.size());
  for (const PoolEntry* e : survivors) summaries.push_back(card_summary(e->card));

  RerankResult ranked = gateway.rerank(card_summary(card), summaries);
  for (const auto& item : ranked.ranking) {
    if (result.selected.size() == static_cast<std::size_t>(config.top_k)) break;
    result.selected.push_back(*survivors[item.index]);
  }
  return result;
}

std::string synthesize_field(const std::vector<std::string>& values, const Card& card,
                             const FieldKey& key, Gateway& gateway) {
  if (values.empty()) throw Error(Errc::EmptyInput, "no candidate values to synthesize from");
  const FieldCategory category = field_category(key);
  if (category == FieldCategory::Unique)
    throw Error(Errc::ValidationFailed,
                "unique field \"" + key.name + "\" must never be transferred");

  const TaxonomyEntry* entry = find_taxonomy_entry(key.kind, key.name);
  std::string user = "Synthesis target field: " + key.name + "\n";
  user += "Field scope: " + (entry ? std::string(entry->description) : "") + "\n";
  if (category == FieldCategory::Shared)
    user +=
        "Category guidance: shared property; values from closely related "
        "artifacts may be adapted when they plausibly hold for the target.\n";
  else
    user +=
        "Category guidance: general information; broadly applicable "
        "statements may be reused when they fit the target's context.\n";
  user += "\nTarget card (filled fields):\n";
  for (const auto& f : card.fields) {
    if (!f.status.is_filled()) continue;
    user += f.key.name + ": " + f.value.substr(0, 400) + "\n";
  }
  user += "\nCandidate values from similar cards:\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    user += std::to_string(i + 1) + ". " + values[i] + "\n";
  user +=
      "\nWrite a value for the target field that integrates the relevant "
      "candidate information while staying accurate for the target "
      "artifact. If none of the candidates applies, reply with exactly "
      "NOT_APPLICABLE. End with a final line of the form\n"
      "CONFIDENCE: 0.25|0.5|0.75|1.0";

  return gateway.generate(make_prompt(
      "You complete documentation fields by adapting values from similar, "
      "well-documented artifacts without inventing artifact-specific facts.",
      user));
}

IccMpResult run_icc_mp(const Card& card, const std::vector<PoolEntry>& pool,
                       const EnrichConfig& config, Gateway& gateway) {
  config.validate();
  require_valid(card);

  IccMpResult result;
  result.card = card;

  const std::set<std::string> missing = incomplete_fields(card);
  if (missing.empty()) return result;  // C = C', zero gateway calls

  // Unique fields are out of bounds regardless of pool contents.
  std::vector<FieldKey> targets;
  for (const auto& name : missing) {
    FieldKey key{card.kind, name};
    if (field_category(key) == FieldCategory::Unique) {
      result.trace.push_back(EnrichFieldTrace{name, {}, {}, "skipped_unique", ""});
    } else {
      targets.push_back(std::move(key));
    }
  }
  if (targets.empty() || pool.empty()) {
    for (const auto& key : targets)
      result.trace.push_back(EnrichFieldTrace{key.name, {}, {}, "no_candidates", ""});
    return result;
  }

  result.attempted = true;

  // Retrieval depends only on the card, not the field: one pass serves all
  // missing fields.
  RetrievalResult retrieved;
  try {
    retrieved = retrieve_similar(card, pool, config, gateway);
  } catch (const Error& e) {
    if (e.code() == Errc::AuthError) throw;
    for (const auto& key : targets)
      result.trace.push_back(EnrichFieldTrace{key.name, {}, {}, "error", e.what()});
    return result;
  }

  std::vector<std::string> candidate_ids;
  for (const auto& entry : retrieved.selected) candidate_ids.push_back(entry.card.id);

  for (const auto& key : targets) {
    EnrichFieldTrace trace{key.name, candidate_ids, retrieved.overlaps, "", ""};
    if (retrieved.selected.empty()) {
      trace.outcome = "no_candidates";
      result.trace.push_back(std::move(trace));
      continue;
    }
    std::vector<std::string> values;
    std::vector<std::string> value_sources;
    for (const auto& entry : retrieved.selected) {
      const Field* f = entry.card.find(key.name);
      if (f && f->status.is_filled()) {
        values.push_back(f->value);
        value_sources.push_back(entry.card.id);
      }
    }
    if (values.empty()) {
      trace.outcome = "no_values";
      result.trace.push_back(std::move(trace));
      continue;
    }
    try {
      std::string response = synthesize_field(values, card, key, gateway);
      AnswerValue parsed = strip_confidence_marker(response);
      Field* target = nullptr;
      for (auto& f : result.card.fields)
        if (f.key.name == key.name) target = &f;
      if (parsed.text == kNotApplicableSentinel ||
          classify_value(parsed.text) == FieldState::NotApplicable) {
        target->value.clear();
        target->status = FieldStatus::not_applicable();
        target->provenance = FieldProvenance::pool_transfer(value_sources);
        trace.outcome = "not_applicable";
      } else if (classify_value(parsed.text) == FieldState::Missing) {
        trace.outcome = "no_values";
        trace.detail = "synthesis produced an empty value";
      } else {
        target->value = parsed.text;
        target->status = FieldStatus::filled(parsed.confidence);
        target->provenance = FieldProvenance::pool_transfer(value_sources);
        trace.outcome = "enriched";
      }
    } catch (const Error& e) {
      if (e.code() == Errc::AuthError) throw;
      trace.outcome = "error";
      trace.detail = e.what();
    }
    result.trace.push_back(std::move(trace));
  }
  return result;
}

std::string enrich_trace_jsonl(const std::vector<EnrichFieldTrace>& trace) {
  std::string out;
  for (const auto& t : trace) {
    ordered_json j;
    j["field"] = t.field;
    j["candidates"] = t.candidate_ids;
    ordered_json overlaps = ordered_json::object();
    for (const auto& [id, score] : t.overlaps) overlaps[id] = score;
    j["overlap"] = std::move(overlaps);
    j["outcome"] = t.outcome;
    if (!t.detail.empty()) j["detail"] = t.detail;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace cardforge

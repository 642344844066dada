#pragma once

// Shared fixture builders for the test suites.

#include <string>
#include <vector>

#include "cardforge/ingest.hpp"
#include "cardforge/pool.hpp"
#include "cardforge/rng.hpp"
#include "cardforge/schema.hpp"

namespace cftest {

using namespace cardforge;

inline Card model_card_with_statuses(const std::string& id,
                                     const std::vector<FieldStatus>& statuses) {
  Card card = empty_card(id, CardKind::Model);
  for (std::size_t i = 0; i < statuses.size() && i < card.fields.size(); ++i) {
    card.fields[i].status = statuses[i];
    if (statuses[i].state == FieldState::Filled)
      card.fields[i].value = "value for " + card.fields[i].key.name;
  }
  return card;
}

inline Card filled_card(const std::string& id, CardKind kind, double confidence = 1.0,
                        const std::string& value_stub = "content") {
  Card card = empty_card(id, kind);
  for (auto& f : card.fields) {
    f.value = value_stub + " for " + f.key.name;
    f.status = FieldStatus::filled(Confidence::from_weight(confidence));
  }
  return card;
}

// Deterministic pseudo-random valid card.
inline Card random_valid_card(SplitMix64& rng) {
  const CardKind kind = rng.next_below(2) == 0 ? CardKind::Model : CardKind::Data;
  Card card = empty_card("card-" + std::to_string(rng.next()), kind);
  const double weights[4] = {0.25, 0.5, 0.75, 1.0};
  const std::size_t n_tags = rng.next_below(4);
  for (std::size_t i = 0; i < n_tags; ++i)
    card.tags.insert("tag-" + std::to_string(rng.next_below(12)));
  for (auto& f : card.fields) {
    switch (rng.next_below(3)) {
      case 0: {
        f.status = FieldStatus::filled(
            Confidence::from_weight(weights[rng.next_below(4)]));
        f.value = "text " + std::to_string(rng.next()) + " é中";
        switch (rng.next_below(3)) {
          case 0:
            f.provenance = FieldProvenance::extraction(static_cast<int>(rng.next_below(10)));
            break;
          case 1:
            f.provenance = FieldProvenance::pool_transfer(
                {"src-" + std::to_string(rng.next_below(100))});
            break;
          default:
            f.provenance = FieldProvenance::imported();
        }
        break;
      }
      case 1:
        f.status = FieldStatus::missing();
        break;
      default:
        f.status = FieldStatus::not_applicable();
    }
  }
  return card;
}

inline Document two_chunk_document() {
  Document doc;
  doc.chunks.push_back(Chunk{0, ChunkSource::PaperSection, "Intro", "about the work"});
  doc.chunks.push_back(Chunk{1, ChunkSource::PaperSection, "Details", "more specifics"});
  return doc;
}

inline PoolEntry synthetic_entry(const std::string& id, CardKind kind, double wcci_value,
                                 long long downloads,
                                 const std::set<std::string>& tags = {}) {
  PoolEntry entry;
  entry.card = empty_card(id, kind);
  entry.card.tags = tags;
  entry.tags = tags;
  entry.downloads = downloads;
  entry.likes = downloads / 10;
  entry.wcci = wcci_value;
  return entry;
}

}  // namespace cftest

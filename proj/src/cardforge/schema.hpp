#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cardforge/errors.hpp"

namespace cardforge {

enum class CardKind { Model, Data };

std::string_view to_string(CardKind kind);
CardKind card_kind_from_string(std::string_view s);  // "model" | "data"

/// Confidence attached to a filled field. Only the four enumerated weights
/// are representable.
class Confidence {
public:
  Confidence() = default;
  static Confidence from_weight(double w);  // throws InvalidConfidence
  static bool valid_weight(double w);

  double weight() const noexcept { return weight_; }
  bool operator==(const Confidence&) const = default;

private:
  explicit Confidence(double w) : weight_(w) {}
  double weight_ = 0.5;
};

// Midpoint of the scale, used whenever an upstream response omits the marker.
inline constexpr double kDefaultConfidenceWeight = 0.5;

enum class FieldState { Filled, Missing, NotApplicable };

struct FieldStatus {
  FieldState state = FieldState::Missing;
  Confidence confidence;  // meaningful only when state == Filled

  static FieldStatus filled(Confidence c) { return {FieldState::Filled, c}; }
  static FieldStatus missing() { return {FieldState::Missing, {}}; }
  static FieldStatus not_applicable() { return {FieldState::NotApplicable, {}}; }

  bool is_filled() const noexcept { return state == FieldState::Filled; }
  bool operator==(const FieldStatus& o) const {
    if (state != o.state) return false;
    return state != FieldState::Filled || confidence == o.confidence;
  }
};

enum class ProvenanceKind { Extraction, PoolTransfer, Imported, Unset };

struct FieldProvenance {
  ProvenanceKind kind = ProvenanceKind::Unset;
  int round = 0;                             // Extraction only
  std::vector<std::string> source_card_ids;  // PoolTransfer only

  static FieldProvenance unset() { return {}; }
  static FieldProvenance imported() { return {ProvenanceKind::Imported, 0, {}}; }
  static FieldProvenance extraction(int round) {
    return {ProvenanceKind::Extraction, round, {}};
  }
  static FieldProvenance pool_transfer(std::vector<std::string> ids) {
    return {ProvenanceKind::PoolTransfer, 0, std::move(ids)};
  }
  bool operator==(const FieldProvenance&) const = default;
};

struct FieldKey {
  CardKind kind = CardKind::Model;
  std::string name;

  static FieldKey make(CardKind kind, std::string_view name);  // validated
  bool operator==(const FieldKey&) const = default;
  bool operator<(const FieldKey& o) const {
    return kind != o.kind ? kind < o.kind : name < o.name;
  }
};

struct Field {
  FieldKey key;
  std::string value;
  FieldStatus status;
  FieldProvenance provenance;

  bool operator==(const Field&) const = default;
};

struct Card {
  std::string id;
  CardKind kind = CardKind::Model;
  std::vector<Field> fields;   // full taxonomy, taxonomy order
  std::set<std::string> tags;

  const Field* find(std::string_view field_name) const;
  bool operator==(const Card&) const = default;
};

/// One taxonomy row: canonical key, display title, and the scope text used
/// to seed queries and prompt guidance.
struct TaxonomyEntry {
  std::string_view name;
  std::string_view title;
  std::string_view description;
};

const std::vector<TaxonomyEntry>& taxonomy_entries(CardKind kind);
std::vector<FieldKey> taxonomy(CardKind kind);
const TaxonomyEntry* find_taxonomy_entry(CardKind kind, std::string_view name);
std::size_t taxonomy_size(CardKind kind);

// ---- Value normalization ----------------------------------------------
// A value counts as empty when it is blank or one of the conventional
// "nothing here" phrases; "not applicable" is a distinct state.
bool is_empty_value(std::string_view value);
bool is_not_applicable_value(std::string_view value);
FieldState classify_value(std::string_view value);

// ---- (De)serialization and validation ----------------------------------
Card parse_card(const std::string& json_text);
std::string serialize_card(const Card& card);

struct Violation {
  std::string field;  // offending field name ("" for card-level rules)
  std::string rule;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

ValidationReport validate_card(const Card& card);

/// Throws ValidationFailed if the card does not pass validate_card.
void require_valid(const Card& card);

/// A card of the right shape with every field Missing.
Card empty_card(std::string id, CardKind kind);

}  // namespace cardforge

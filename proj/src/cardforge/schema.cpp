#include "cardforge/schema.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "json.hpp"

namespace cardforge {

using nlohmann::ordered_json;

std::string_view to_string(CardKind kind) {
  return kind == CardKind::Model ? "model" : "data";
}

CardKind card_kind_from_string(std::string_view s) {
  if (s == "model") return CardKind::Model;
  if (s == "data") return CardKind::Data;
  throw Error(Errc::MalformedJson,
              "kind must be \"model\" or \"data\", got \"" + std::string(s) + "\"");
}

bool Confidence::valid_weight(double w) {
  return w == 0.25 || w == 0.5 || w == 0.75 || w == 1.0;
}

Confidence Confidence::from_weight(double w) {
  if (!valid_weight(w))
    throw Error(Errc::InvalidConfidence,
                "confidence must be one of {0.25, 0.5, 0.75, 1.0}, got " +
                    std::to_string(w));
  return Confidence(w);
}

namespace {

// Card taxonomy. Canonical keys are snake_case slugs of the field titles;
// the data-card "Intended Use" is keyed dataset_intended_use so that the
// two taxonomies never collide on a bare key (see docs/taxonomy.md).
const std::vector<TaxonomyEntry> kModelTaxonomy = {
    {"model_details", "Model Details",
     "Information about the model developer, architecture, size, training "
     "methodology, modalities, version, license, and contact details"},
    {"intended_use", "Intended Use",
     "Primary applications, target users, supported languages/domains, "
     "out-of-scope uses, and age restrictions"},
    {"generative_capabilities", "Generative Capabilities",
     "Generation quality, content types, length limitations, consistency, "
     "latency, and customization options"},
    {"safety_considerations", "Safety Considerations",
     "Content safety measures, bias analysis, fairness metrics, red team "
     "testing, jailbreaking resistance, and child safety"},
    {"training_data", "Training Data",
     "Training corpus details, data filtering processes, demographic "
     "representation, language coverage, consent/privacy, and evaluation "
     "datasets"},
    {"performance_metrics", "Performance Metrics",
     "Generation quality metrics, safety metrics, factual accuracy, bias "
     "metrics, cultural sensitivity, and robustness measures"},
    {"ethical_considerations", "Ethical Considerations",
     "Dual-use risks, misinformation potential, intellectual property "
     "concerns, economic/environmental impact, cultural appropriation, "
     "privacy, and consent issues"},
    {"caveats_recommendations", "Caveats & Recommendations",
     "Known limitations, deployment recommendations, monitoring "
     "requirements, and user guidelines"},
};

const std::vector<TaxonomyEntry> kDataTaxonomy = {
    {"dataset_details", "Dataset Details",
     "Dataset name, version, creators/curators, funding, type, text "
     "language, license, and related resources"},
    {"dataset_structure", "Dataset Structure",
     "Instances, fields, missing information, relationships, splits, and "
     "size statistics"},
    {"data_collection", "Data Collection",
     "Collection process, data sources, timeframe, ethical review, consent "
     "process, and data validation"},
    {"data_processing", "Data Processing",
     "Preprocessing steps, cleaning procedures, labeling process, quality "
     "control, filtering criteria, and deduplication"},
    {"dataset_intended_use", "Intended Use",
     "Primary tasks, suitable/unsuitable applications, research "
     "applications, commercial applications, and prohibited uses"},
    {"bias_fairness", "Bias & Fairness",
     "Demographic representation, geographic/temporal coverage, known "
     "biases, bias mitigation, and fairness considerations"},
    {"privacy_security", "Privacy & Security",
     "Personally identifiable information, sensitive information, privacy "
     "protection measures, data security, anonymization/pseudonymization, "
     "and retention/deletion policies"},
    {"content_analysis", "Content Analysis",
     "Content types, harmful content identification, content moderation, "
     "toxicity analysis, misinformation risks, and cultural sensitivity"},
    {"legal_ethical", "Legal & Ethical",
     "Copyright considerations, terms of use, ethical guidelines, "
     "compliance requirements, subject rights, and institutional review"},
    {"maintenance_updates", "Maintenance & Updates",
     "Maintenance plan, update frequency, versioning, error reporting, "
     "community contribution, and deprecation plan"},
    {"distribution_access", "Distribution & Access",
     "Access mechanism, distribution format, download instructions, API "
     "access, access restrictions, and citation requirements"},
    {"limitations_recommendations", "Limitations & Recommendations",
     "Known limitations, recommended uses, usage guidelines, performance "
     "considerations, environmental impact, and future work"},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Lowercase + collapse runs of whitespace to single spaces.
std::string fold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

const std::vector<TaxonomyEntry>& taxonomy_entries(CardKind kind) {
  return kind == CardKind::Model ? kModelTaxonomy : kDataTaxonomy;
}

std::vector<FieldKey> taxonomy(CardKind kind) {
  std::vector<FieldKey> keys;
  for (const auto& e : taxonomy_entries(kind))
    keys.push_back(FieldKey{kind, std::string(e.name)});
  return keys;
}

const TaxonomyEntry* find_taxonomy_entry(CardKind kind, std::string_view name) {
  for (const auto& e : taxonomy_entries(kind))
    if (e.name == name) return &e;
  return nullptr;
}

std::size_t taxonomy_size(CardKind kind) { return taxonomy_entries(kind).size(); }

FieldKey FieldKey::make(CardKind kind, std::string_view name) {
  if (find_taxonomy_entry(kind, name)) return FieldKey{kind, std::string(name)};
  CardKind other = kind == CardKind::Model ? CardKind::Data : CardKind::Model;
  if (find_taxonomy_entry(other, name))
    throw Error(Errc::KindMismatch, "field \"" + std::string(name) +
                                        "\" belongs to the " +
                                        std::string(to_string(other)) + " taxonomy");
  throw Error(Errc::UnknownField, std::string(name));
}

const Field* Card::find(std::string_view field_name) const {
  for (const auto& f : fields)
    if (f.key.name == field_name) return &f;
  return nullptr;
}

bool is_not_applicable_value(std::string_view value) {
  return fold(value) == "not applicable";
}

bool is_empty_value(std::string_view value) {
  std::string f = fold(value);
  return f.empty() || f == "n/a value not stated" || f == "not specified" ||
         f == "unknown";
}

FieldState classify_value(std::string_view value) {
  if (is_not_applicable_value(value)) return FieldState::NotApplicable;
  if (is_empty_value(value)) return FieldState::Missing;
  return FieldState::Filled;
}

Card empty_card(std::string id, CardKind kind) {
  Card card;
  card.id = std::move(id);
  card.kind = kind;
  for (const auto& e : taxonomy_entries(kind))
    card.fields.push_back(Field{FieldKey{kind, std::string(e.name)}, "",
                                FieldStatus::missing(), FieldProvenance::unset()});
  return card;
}

// ---- serialization ------------------------------------------------------

namespace {

ordered_json provenance_to_json(const FieldProvenance& p) {
  ordered_json j;
  switch (p.kind) {
    case ProvenanceKind::Extraction:
      j["source"] = "extraction";
      j["round"] = p.round;
      break;
    case ProvenanceKind::PoolTransfer:
      j["source"] = "pool_transfer";
      j["source_card_ids"] = p.source_card_ids;
      break;
    case ProvenanceKind::Imported:
      j["source"] = "imported";
      break;
    case ProvenanceKind::Unset:
      j["source"] = "unset";
      break;
  }
  return j;
}

FieldProvenance provenance_from_json(const ordered_json& j, const std::string& field) {
  if (!j.is_object())
    throw Error(Errc::MalformedJson, "provenance of \"" + field + "\" must be an object");
  std::string source = "unset";
  if (j.contains("source")) {
    if (!j.at("source").is_string())
      throw Error(Errc::MalformedJson, "provenance source of \"" + field + "\" must be a string");
    source = j.at("source").get<std::string>();
  }
  for (const auto& [key, _] : j.items()) {
    bool known = key == "source" ||
                 (source == "extraction" && key == "round") ||
                 (source == "pool_transfer" && key == "source_card_ids");
    if (!known) throw Error(Errc::UnknownField, "provenance key \"" + key + "\" on \"" + field + "\"");
  }
  if (source == "unset") return FieldProvenance::unset();
  if (source == "imported") return FieldProvenance::imported();
  if (source == "extraction") {
    if (!j.contains("round") || !j.at("round").is_number_integer())
      throw Error(Errc::MalformedJson, "extraction provenance of \"" + field + "\" needs integer round");
    int round = j.at("round").get<int>();
    if (round < 0)
      throw Error(Errc::MalformedJson, "extraction round of \"" + field + "\" must be >= 0");
    return FieldProvenance::extraction(round);
  }
  if (source == "pool_transfer") {
    if (!j.contains("source_card_ids") || !j.at("source_card_ids").is_array() ||
        j.at("source_card_ids").empty())
      throw Error(Errc::MalformedJson, "pool_transfer provenance of \"" + field +
                                           "\" needs non-empty source_card_ids");
    std::vector<std::string> ids;
    for (const auto& el : j.at("source_card_ids")) {
      if (!el.is_string())
        throw Error(Errc::MalformedJson, "source_card_ids of \"" + field + "\" must be strings");
      ids.push_back(el.get<std::string>());
    }
    return FieldProvenance::pool_transfer(std::move(ids));
  }
  throw Error(Errc::MalformedJson, "unknown provenance source \"" + source + "\" on \"" + field + "\"");
}

std::string_view status_string(FieldState s) {
  switch (s) {
    case FieldState::Filled: return "filled";
    case FieldState::Missing: return "missing";
    case FieldState::NotApplicable: return "not_applicable";
  }
  return "missing";
}

}  // namespace

std::string serialize_card(const Card& card) {
  ordered_json j;
  j["id"] = card.id;
  j["kind"] = std::string(to_string(card.kind));
  j["tags"] = card.tags;
  ordered_json fields = ordered_json::object();
  // Taxonomy order regardless of the in-memory field order.
  for (const auto& entry : taxonomy_entries(card.kind)) {
    const Field* f = card.find(entry.name);
    if (!f) continue;
    ordered_json fj;
    fj["value"] = f->value;
    fj["status"] = std::string(status_string(f->status.state));
    if (f->status.state == FieldState::Filled)
      fj["confidence"] = f->status.confidence.weight();
    else
      fj["confidence"] = nullptr;
    fj["provenance"] = provenance_to_json(f->provenance);
    fields[std::string(entry.name)] = std::move(fj);
  }
  j["fields"] = std::move(fields);
  return j.dump(2) + "\n";
}

Card parse_card(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedJson, e.what());
  }
  if (!j.is_object()) throw Error(Errc::MalformedJson, "card must be a JSON object");

  for (const auto& [key, _] : j.items()) {
    if (key != "id" && key != "kind" && key != "tags" && key != "fields")
      throw Error(Errc::UnknownField, key);
  }
  if (!j.contains("kind")) throw Error(Errc::MalformedJson, "card is missing \"kind\"");
  if (!j.at("kind").is_string()) throw Error(Errc::MalformedJson, "\"kind\" must be a string");

  Card card;
  card.kind = card_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("id")) {
    if (!j.at("id").is_string()) throw Error(Errc::MalformedJson, "\"id\" must be a string");
    card.id = j.at("id").get<std::string>();
  }
  if (j.contains("tags")) {
    if (!j.at("tags").is_array()) throw Error(Errc::MalformedJson, "\"tags\" must be an array");
    for (const auto& t : j.at("tags")) {
      if (!t.is_string()) throw Error(Errc::MalformedJson, "tags must be strings");
      card.tags.insert(t.get<std::string>());
    }
  }

  ordered_json fields = ordered_json::object();
  if (j.contains("fields")) {
    if (!j.at("fields").is_object())
      throw Error(Errc::MalformedJson, "\"fields\" must be an object");
    fields = j.at("fields");
  }

  for (const auto& [name, fj] : fields.items()) {
    FieldKey::make(card.kind, name);  // throws UnknownField / KindMismatch
    if (!fj.is_object())
      throw Error(Errc::MalformedJson, "field \"" + name + "\" must be an object");
    for (const auto& [key, _] : fj.items()) {
      if (key != "value" && key != "status" && key != "confidence" && key != "provenance")
        throw Error(Errc::UnknownField, "field key \"" + key + "\" on \"" + name + "\"");
    }
  }

  for (const auto& entry : taxonomy_entries(card.kind)) {
    std::string name(entry.name);
    Field field;
    field.key = FieldKey{card.kind, name};
    field.status = FieldStatus::missing();
    field.provenance = FieldProvenance::unset();

    if (fields.contains(name)) {
      const ordered_json& fj = fields.at(name);
      std::string value;
      if (fj.contains("value")) {
        if (!fj.at("value").is_string())
          throw Error(Errc::MalformedJson, "value of \"" + name + "\" must be a string");
        value = fj.at("value").get<std::string>();
      }
      std::optional<Confidence> confidence;
      if (fj.contains("confidence") && !fj.at("confidence").is_null()) {
        if (!fj.at("confidence").is_number())
          throw Error(Errc::InvalidConfidence, "confidence of \"" + name + "\" must be a number");
        confidence = Confidence::from_weight(fj.at("confidence").get<double>());
      }
      std::optional<std::string> declared;
      if (fj.contains("status") && !fj.at("status").is_null()) {
        if (!fj.at("status").is_string())
          throw Error(Errc::MalformedJson, "status of \"" + name + "\" must be a string");
        declared = fj.at("status").get<std::string>();
        if (*declared != "filled" && *declared != "missing" && *declared != "not_applicable")
          throw Error(Errc::MalformedJson, "status of \"" + name + "\" must be filled, missing, or not_applicable");
      }
      if (fj.contains("provenance") && !fj.at("provenance").is_null())
        field.provenance = provenance_from_json(fj.at("provenance"), name);

      // Reconcile declared status with the value text so that every parsed
      // card satisfies filled <=> non-empty normalized value.
      FieldState state;
      if (!declared) {
        state = classify_value(value);
      } else if (*declared == "missing") {
        state = FieldState::Missing;
      } else if (*declared == "not_applicable") {
        state = FieldState::NotApplicable;
      } else {
        state = classify_value(value);
      }
      switch (state) {
        case FieldState::Filled:
          field.value = value;
          field.status = FieldStatus::filled(
              confidence.value_or(Confidence::from_weight(kDefaultConfidenceWeight)));
          break;
        case FieldState::Missing:
          field.status = FieldStatus::missing();
          break;
        case FieldState::NotApplicable:
          field.status = FieldStatus::not_applicable();
          break;
      }
    }
    card.fields.push_back(std::move(field));
  }
  return card;
}

// ---- validation ---------------------------------------------------------

ValidationReport validate_card(const Card& card) {
  ValidationReport report;
  auto flag = [&](const std::string& field, const char* rule, std::string detail) {
    report.violations.push_back(Violation{field, rule, std::move(detail)});
  };

  std::set<std::string> seen;
  for (const auto& f : card.fields) {
    if (f.key.kind != card.kind)
      flag(f.key.name, "field_kind_mismatch", "field kind differs from card kind");
    const TaxonomyEntry* entry = find_taxonomy_entry(card.kind, f.key.name);
    if (!entry) {
      CardKind other = card.kind == CardKind::Model ? CardKind::Data : CardKind::Model;
      flag(f.key.name, find_taxonomy_entry(other, f.key.name) ? "kind_mismatch" : "unknown_key",
           "not in the " + std::string(to_string(card.kind)) + " taxonomy");
      continue;
    }
    if (!seen.insert(f.key.name).second) flag(f.key.name, "duplicate_key", "field appears more than once");

    switch (f.status.state) {
      case FieldState::Filled:
        if (is_empty_value(f.value)) flag(f.key.name, "empty_filled_value", "filled field has empty value");
        break;
      case FieldState::Missing:
      case FieldState::NotApplicable:
        if (!trim(f.value).empty())
          flag(f.key.name, "nonempty_empty_value", "missing/not-applicable field carries a value");
        break;
    }
    if (f.provenance.kind == ProvenanceKind::Extraction && f.provenance.round < 0)
      flag(f.key.name, "bad_provenance", "extraction round must be >= 0");
    if (f.provenance.kind == ProvenanceKind::PoolTransfer && f.provenance.source_card_ids.empty())
      flag(f.key.name, "bad_provenance", "pool_transfer needs source card ids");
  }
  for (const auto& entry : taxonomy_entries(card.kind)) {
    if (!seen.contains(std::string(entry.name)))
      flag(std::string(entry.name), "missing_key", "taxonomy field absent from card");
  }
  return report;
}

void require_valid(const Card& card) {
  ValidationReport report = validate_card(card);
  if (report.ok()) return;
  const Violation& v = report.violations.front();
  throw Error(Errc::ValidationFailed,
              "card \"" + card.id + "\": " + v.rule + " on \"" + v.field + "\" (" +
                  std::to_string(report.violations.size()) + " violation(s))");
}

}  // namespace cardforge

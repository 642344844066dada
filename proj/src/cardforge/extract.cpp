#include "cardforge/extract.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"

namespace cardforge {

using nlohmann::ordered_json;

void ExtractionConfig::validate() const {
  if (r_max < 1) throw Error(Errc::InvalidConfig, "r_max must be >= 1");
  if (epsilon < 0 || epsilon > 3) throw Error(Errc::InvalidConfig, "epsilon must be in [0, 3]");
  if (top_chunks < 1) throw Error(Errc::InvalidConfig, "top_chunks must be >= 1");
}

ExtractionConfig ExtractionConfig::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("extraction config: ") + e.what());
  }
  ExtractionConfig c;
  c.r_max = j.value("r_max", 10);
  c.epsilon = j.value("epsilon", 1);
  c.top_chunks = j.value("top_chunks", 4);
  c.rerank_cutoff = j.value("rerank_cutoff", 0.0);
  c.validate();
  return c;
}

std::string_view to_string(ExtractOutcome o) {
  switch (o) {
    case ExtractOutcome::Complete: return "complete";
    case ExtractOutcome::Stalled: return "stalled";
    case ExtractOutcome::MaxRounds: return "max_rounds";
  }
  return "stalled";
}

std::map<std::string, std::string> initial_queries(CardKind kind) {
  std::map<std::string, std::string> queries;
  const char* noun = kind == CardKind::Model ? "model" : "dataset";
  for (const auto& entry : taxonomy_entries(kind)) {
    std::string q = "What does the source material say about the ";
    q += noun;
    q += "'s ";
    q += entry.title;
    q += "? Cover: ";
    q += entry.description;
    q += ".";
    queries[std::string(entry.name)] = std::move(q);
  }
  return queries;
}

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string chunk_text(const Chunk& chunk) {
  if (chunk.heading.empty()) return chunk.body;
  return chunk.heading + "\n" + chunk.body;
}

// First contiguous digit run in the text, or nullopt.
std::optional<long> first_integer(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    try {
      return std::stol(text.substr(i, j - i));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

const char* kAnswerSystem =
    "You are a careful technical writer extracting documentation fields from "
    "source material. Use only the provided excerpts and previous answer.";

}  // namespace

AnswerValue strip_confidence_marker(const std::string& answer) {
  AnswerValue out{trim_copy(answer), Confidence::from_weight(kDefaultConfidenceWeight)};
  auto pos = out.text.rfind('\n');
  std::string last = pos == std::string::npos ? out.text : out.text.substr(pos + 1);
  std::string rest = pos == std::string::npos ? "" : out.text.substr(0, pos);
  std::string t = trim_copy(last);
  if (t.rfind("CONFIDENCE:", 0) == 0) {
    std::string v = trim_copy(t.substr(11));
    try {
      out.confidence = Confidence::from_weight(std::stod(v));
      out.text = trim_copy(rest);
    } catch (const std::exception&) {
      // Malformed marker: keep the whole text and the default weight.
    }
  }
  return out;
}

std::string answer_round(const std::string& query, const Document& doc,
                         const std::optional<std::string>& prev_answer,
                         const ExtractionConfig& config, Gateway& gateway) {
  if (doc.empty()) throw Error(Errc::EmptyDocument, "no chunks to retrieve from");

  std::vector<std::string> candidates;
  candidates.reserve(doc.chunks.size());
  for (const auto& c : doc.chunks) candidates.push_back(chunk_text(c));

  RerankResult ranked = gateway.rerank(query, candidates);
  std::vector<std::size_t> kept;
  for (const auto& item : ranked.ranking) {
    if (item.score < config.rerank_cutoff) continue;
    kept.push_back(item.index);
    if (kept.size() == static_cast<std::size_t>(config.top_chunks)) break;
  }
  if (kept.empty())
    throw Error(Errc::NoRelevantChunks, "no chunk scored at or above the cutoff");

  std::string user = "Question: " + query + "\n\nSource excerpts:\n";
  for (std::size_t idx : kept) {
    const Chunk& c = doc.chunks[idx];
    user += "--- [chunk " + std::to_string(c.id) + "] " + c.heading + "\n";
    user += c.body + "\n";
  }
  user += "\nPrevious answer: ";
  user += prev_answer ? *prev_answer : kNoPreviousAnswerMarker;
  user +=
      "\n\nWrite the best cumulative answer to the question, revising and "
      "extending the previous answer with what the excerpts support. If the "
      "excerpts contain nothing relevant, reply with the single word "
      "UNKNOWN. End with a final line of the form\n"
      "CONFIDENCE: 0.25|0.5|0.75|1.0";

  return gateway.generate(make_prompt(kAnswerSystem, user));
}

AssessResult assess_and_refine(const std::string& initial_query,
                               const std::string& answer,
                               const std::vector<std::string>& history,
                               const FieldKey& field, Gateway& gateway) {
  if (trim_copy(answer).empty()) throw Error(Errc::EmptyInput, "empty answer");

  const TaxonomyEntry* entry = find_taxonomy_entry(field.kind, field.name);
  std::string user = "Completeness review for field: " + field.name + "\n";
  if (entry) user += "Field scope: " + std::string(entry->description) + "\n";
  user += "Seed question: " + initial_query + "\nQueries asked so far:\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    user += std::to_string(i + 1) + ". " + history[i] + "\n";
  user += "Current answer:\n" + answer + "\n\n";
  user +=
      "If the current answer fully covers the field scope, reply with "
      "exactly\nCOMPLETE\nOtherwise reply with one new question (a single "
      "line) that targets the most important information gap and does not "
      "repeat any earlier query.";

  std::string response = gateway.generate(
      make_prompt("You review documentation answers for completeness and "
                  "propose follow-up questions.",
                  user));
  std::string trimmed = trim_copy(response);
  if (trimmed.empty()) throw Error(Errc::ServiceError, "EmptyRefinement");
  if (trimmed == kCompleteSentinel) return AssessResult{true, ""};
  return AssessResult{false, trimmed};
}

GainResult compute_gain(const std::string& prev_answer, const std::string& curr_answer,
                        const std::string& initial_query, const FieldKey& field,
                        Gateway& gateway) {
  if (prev_answer.empty() || curr_answer.empty())
    throw Error(Errc::EmptyInput, "gain needs two non-empty answers");

  std::string user = "Information-gain rubric for field: " + field.name + "\n";
  user += "Seed question: " + initial_query + "\n";
  user += "Previous answer:\n" + prev_answer + "\n\nRevised answer:\n" + curr_answer + "\n\n";
  user +=
      "Rate the revised answer against the previous one on completeness, "
      "quality, new information, and utility. Reply with a single integer "
      "from 0 (no improvement) to 3 (major improvement).";

  std::string response = gateway.generate(
      make_prompt("You score the improvement between two answers.", user));
  auto value = first_integer(response);
  if (!value || *value < 0 || *value > 3) return GainResult{0, true};
  return GainResult{static_cast<int>(*value), false};
}

std::pair<Field, ExtractionSession> extract_field(const Document& doc,
                                                  const FieldKey& field,
                                                  const std::string& initial_query,
                                                  const ExtractionConfig& config,
                                                  Gateway& gateway) {
  config.validate();
  if (doc.empty()) throw Error(Errc::EmptyDocument, "no chunks to extract from");

  ExtractionSession session;
  session.field = field;
  session.initial_query = initial_query;
  session.query_history.push_back(initial_query);

  Field out;
  out.key = field;
  out.status = FieldStatus::missing();
  out.provenance = FieldProvenance::unset();

  std::string query = initial_query;
  int r = 0;
  while (true) {
    std::string answer;
    try {
      std::optional<std::string> prev;
      if (!session.answers.empty()) prev = session.answers.back();
      answer = answer_round(query, doc, prev, config, gateway);
    } catch (const Error& e) {
      if (e.code() == Errc::NoRelevantChunks && r == 0) {
        // Nothing retrievable for this field at all.
        session.round = 0;
        session.outcome = ExtractOutcome::Stalled;
        session.error = "NoRelevantChunks";
        return {out, session};
      }
      if (e.code() == Errc::NoRelevantChunks) {
        // A later query retrieved nothing; keep what earlier rounds produced.
        session.round = static_cast<int>(session.answers.size()) - 1;
        session.outcome = ExtractOutcome::Stalled;
        session.error = "NoRelevantChunks";
        break;
      }
      throw;
    }
    session.answers.push_back(answer);

    AssessResult assessed = assess_and_refine(initial_query, answer,
                                              session.query_history, field, gateway);
    if (assessed.complete) {
      session.round = r;
      session.outcome = ExtractOutcome::Complete;
      break;
    }

    if (r > 0) {
      GainResult gain = compute_gain(session.answers[static_cast<std::size_t>(r) - 1],
                                     session.answers[static_cast<std::size_t>(r)],
                                     initial_query, field, gateway);
      session.gains.push_back(gain.gain);
      session.gain_fallbacks.push_back(gain.parse_fallback);
      if (gain.gain <= config.epsilon)
        ++session.stall_count;
      else
        session.stall_count = 0;
      if (session.stall_count >= 2) {
        session.round = r;
        session.outcome = ExtractOutcome::Stalled;
        break;
      }
    }

    ++r;
    if (r >= config.r_max) {
      session.round = config.r_max;
      session.outcome = ExtractOutcome::MaxRounds;
      break;
    }
    query = assessed.next_query;
    session.query_history.push_back(query);
  }

  if (!session.answers.empty()) {
    AnswerValue parsed = strip_confidence_marker(session.answers.back());
    const int producing_round = static_cast<int>(session.answers.size()) - 1;
    switch (classify_value(parsed.text)) {
      case FieldState::Filled:
        out.value = parsed.text;
        out.status = FieldStatus::filled(parsed.confidence);
        out.provenance = FieldProvenance::extraction(producing_round);
        break;
      case FieldState::NotApplicable:
        out.status = FieldStatus::not_applicable();
        out.provenance = FieldProvenance::extraction(producing_round);
        break;
      case FieldState::Missing:
        out.status = FieldStatus::missing();
        break;
    }
  }
  return {out, session};
}

IpeQeResult run_ipe_qe(const Document& doc, CardKind kind,
                       const ExtractionConfig& config, Gateway& gateway,
                       const std::string& card_id, const std::set<std::string>& tags) {
  config.validate();
  if (doc.empty()) throw Error(Errc::EmptyDocument, "no chunks to extract from");

  IpeQeResult result;
  result.card = empty_card(card_id, kind);
  result.card.tags = tags;

  const auto queries = initial_queries(kind);
  for (auto& field : result.card.fields) {
    const std::string& q0 = queries.at(field.key.name);
    try {
      auto [extracted, session] = extract_field(doc, field.key, q0, config, gateway);
      field = extracted;
      result.sessions.push_back(std::move(session));
    } catch (const Error& e) {
      if (e.code() == Errc::AuthError) throw;  // credential problems abort the run
      ExtractionSession failed;
      failed.field = field.key;
      failed.initial_query = q0;
      failed.query_history.push_back(q0);
      failed.outcome = ExtractOutcome::Stalled;
      failed.error = e.what();
      result.sessions.push_back(std::move(failed));
    }
  }
  return result;
}

std::string extraction_trace_jsonl(const std::vector<ExtractionSession>& sessions) {
  std::string out;
  for (const auto& s : sessions) {
    const std::size_t rounds = s.answers.size();
    if (rounds == 0) {
      ordered_json j;
      j["field"] = s.field.name;
      j["round"] = 0;
      j["query"] = s.initial_query;
      j["gain"] = nullptr;
      j["stall_count"] = s.stall_count;
      j["outcome"] = std::string(to_string(s.outcome));
      if (!s.error.empty()) j["error"] = s.error;
      out += j.dump() + "\n";
      continue;
    }
    for (std::size_t r = 0; r < rounds; ++r) {
      ordered_json j;
      j["field"] = s.field.name;
      j["round"] = r;
      j["query"] = r < s.query_history.size() ? s.query_history[r] : "";
      if (r >= 1 && r - 1 < s.gains.size())
        j["gain"] = s.gains[r - 1];
      else
        j["gain"] = nullptr;
      j["stall_count"] = s.stall_count;
      j["outcome"] = r + 1 == rounds ? std::string(to_string(s.outcome)) : "active";
      if (r + 1 == rounds && !s.error.empty()) j["error"] = s.error;
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace cardforge

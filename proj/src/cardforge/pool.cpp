#include "cardforge/pool.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

#include "cardforge/fileio.hpp"
#include "cardforge/metrics.hpp"

namespace cardforge {

using nlohmann::json;
using nlohmann::ordered_json;

PoolConfig PoolConfig::from_json(const std::string& json_text, CardKind kind) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("pool config: ") + e.what());
  }
  PoolConfig c = defaults_for(kind);
  c.wcci_percentile = j.value("wcci_percentile", c.wcci_percentile);
  c.min_downloads = j.value("min_downloads", c.min_downloads);
  if (c.wcci_percentile <= 0.0 || c.wcci_percentile > 1.0)
    throw Error(Errc::InvalidConfig, "wcci_percentile must be in (0, 1]");
  if (c.min_downloads < 0) throw Error(Errc::InvalidConfig, "min_downloads must be >= 0");
  return c;
}

std::vector<PoolEntry> build_pool(std::vector<PoolEntry> entries, const PoolConfig& config) {
  if (config.wcci_percentile <= 0.0 || config.wcci_percentile > 1.0)
    throw Error(Errc::InvalidConfig, "wcci_percentile must be in (0, 1]");
  if (config.min_downloads < 0)
    throw Error(Errc::InvalidConfig, "min_downloads must be >= 0");
  if (entries.empty()) throw Error(Errc::EmptyPool, "no entries to filter");
  for (const auto& e : entries)
    if (e.card.kind != entries.front().card.kind)
      throw Error(Errc::KindMismatch, "pool entries must share one card kind");

  std::vector<PoolEntry> survivors;
  for (auto& e : entries)
    if (e.downloads >= config.min_downloads) survivors.push_back(std::move(e));
  if (survivors.empty())
    throw Error(Errc::EmptyAfterFilter, "every entry fell below min_downloads");

  std::sort(survivors.begin(), survivors.end(), [](const PoolEntry& a, const PoolEntry& b) {
    if (a.wcci != b.wcci) return a.wcci > b.wcci;
    if (a.downloads != b.downloads) return a.downloads > b.downloads;
    return a.card.id < b.card.id;
  });

  const auto keep = static_cast<std::size_t>(
      std::ceil(config.wcci_percentile * static_cast<double>(survivors.size())));
  survivors.resize(std::min(survivors.size(), std::max<std::size_t>(keep, 1)));
  return survivors;
}

std::string pool_to_jsonl(const std::vector<PoolEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    ordered_json j;
    j["card"] = ordered_json::parse(serialize_card(e.card));
    j["tags"] = e.tags;
    j["downloads"] = e.downloads;
    j["likes"] = e.likes;
    j["wcci"] = e.wcci;
    if (e.source_ref.empty())
      j["source_ref"] = nullptr;
    else
      j["source_ref"] = e.source_ref;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<PoolEntry> pool_from_jsonl(const std::string& jsonl) {
  std::vector<PoolEntry> entries;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(Errc::MalformedJson,
                  "pool line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("card"))
      throw Error(Errc::MalformedJson, "pool line " + std::to_string(line_no) + ": no card");
    PoolEntry entry;
    entry.card = parse_card(j.at("card").dump());
    if (j.contains("tags"))
      for (const auto& t : j.at("tags")) entry.tags.insert(t.get<std::string>());
    else
      entry.tags = entry.card.tags;
    entry.downloads = j.value("downloads", 0LL);
    entry.likes = j.value("likes", 0LL);
    if (j.contains("source_ref") && j.at("source_ref").is_string())
      entry.source_ref = j.at("source_ref").get<std::string>();

    const double recomputed = wcci(entry.card).value;
    if (j.contains("wcci") && !j.at("wcci").is_null()) {
      const double stored = j.at("wcci").get<double>();
      if (std::fabs(stored - recomputed) > 1e-9)
        throw Error(Errc::ValidationFailed,
                    "pool line " + std::to_string(line_no) + ": stored wcci " +
                        std::to_string(stored) + " does not match card (" +
                        std::to_string(recomputed) + ")");
    }
    entry.wcci = recomputed;
    entries.push_back(std::move(entry));
  }
  return entries;
}

PoolEntry make_pool_entry(Card card, const HubRecord& record) {
  PoolEntry entry;
  entry.tags = std::set<std::string>(record.tags.begin(), record.tags.end());
  entry.downloads = record.downloads;
  entry.likes = record.likes;
  entry.source_ref = record.source_ref;
  entry.wcci = wcci(card).value;
  entry.card = std::move(card);
  if (entry.card.tags.empty()) entry.card.tags = entry.tags;
  return entry;
}

// ---- hub ingestion ---------------------------------------------------------

namespace {

std::vector<HubRecord> parse_listing_page(const std::string& body,
                                          std::vector<std::string>& warnings) {
  json page;
  try {
    page = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(Errc::HttpError, std::string("listing page is not JSON: ") + e.what());
  }
  if (!page.is_array()) throw Error(Errc::HttpError, "listing page must be a JSON array");

  std::vector<HubRecord> records;
  for (const auto& item : page) {
    try {
      records.push_back(HubRecord::from_json(item.dump()));
    } catch (const Error&) {
      std::string id = item.is_object() && item.contains("id") && item.at("id").is_string()
                           ? item.at("id").get<std::string>()
                           : "<unknown>";
      warnings.push_back("skipped malformed record " + id);
    }
  }
  return records;
}

std::string page_file_name(CardKind kind, int page) {
  return std::string("page_") + std::string(to_string(kind)) + "_" +
         std::to_string(page) + ".json";
}

}  // namespace

FetchResult fetch_hub_records(CardKind kind, const FetchOptions& options) {
  if (options.page_budget < 1)
    throw Error(Errc::InvalidConfig, "page_budget must be >= 1");

  FetchResult result;
  const std::string listing = kind == CardKind::Model ? "/api/models" : "/api/datasets";

  for (int page = 0; page < options.page_budget; ++page) {
    std::string body;
    if (!options.replay_dir.empty()) {
      const auto path = std::filesystem::path(options.replay_dir) / page_file_name(kind, page);
      if (!std::filesystem::exists(path)) break;  // no more recorded pages
      body = read_text_file(path.string());
    } else {
      std::string query = listing + "?limit=" + std::to_string(options.page_size) +
                          "&page=" + std::to_string(page) + "&full=true";
      for (const auto& f : options.modality_filters) query += "&filter=" + f;
      httplib::Client client(options.base_url);
      client.set_follow_location(true);
      auto res = client.Get(query);
      if (!res) throw Error(Errc::HttpError, "listing request failed: " +
                                                 httplib::to_string(res.error()));
      if (res->status != 200)
        throw Error(Errc::HttpError, "listing returned HTTP " + std::to_string(res->status));
      body = res->body;
      if (!options.record_dir.empty()) {
        std::filesystem::create_directories(options.record_dir);
        write_text_file((std::filesystem::path(options.record_dir) /
                         page_file_name(kind, page)).string(), body);
      }
    }
    auto records = parse_listing_page(body, result.warnings);
    if (records.empty()) break;
    for (auto& r : records) result.records.push_back(std::move(r));
  }
  return result;
}

std::vector<HubRecord> filter_paper_linked(const std::vector<HubRecord>& records) {
  static const std::regex arxiv_re(R"(arxiv:\d{4}\.\d{4,5})", std::regex::icase);
  static const std::regex doi_re(R"(doi:10\.\S+)", std::regex::icase);

  std::vector<HubRecord> kept;
  for (const auto& record : records) {
    for (const auto& tag : record.tags) {
      std::smatch m;
      if (std::regex_search(tag, m, arxiv_re) || std::regex_search(tag, m, doi_re)) {
        HubRecord copy = record;
        copy.source_ref = m.str();
        kept.push_back(std::move(copy));
        break;
      }
    }
  }
  return kept;
}

Card structure_card(const HubRecord& record, CardKind kind, Gateway& gateway) {
  if (record.description.find_first_not_of(" \t\r\n") == std::string::npos)
    throw Error(Errc::EmptyInput, "record \"" + record.id + "\" has no description");

  std::string user = "Structure the following repository description into a ";
  user += to_string(kind);
  user += " card.\nFields:\n";
  for (const auto& entry : taxonomy_entries(kind)) {
    user += "- ";
    user += entry.name;
    user += ": ";
    user += entry.description;
    user += "\n";
  }
  user +=
      "\nRespond with a single JSON object mapping every field name to an "
      "object {\"value\": string, \"status\": \"filled\"|\"missing\"|"
      "\"not_applicable\", \"confidence\": 0.25|0.5|0.75|1.0}. Use status "
      "\"missing\" with an empty value when the description says nothing "
      "about a field.\n\nDescription:\n";
  user += record.description;

  const Prompt prompt = make_prompt(
      "You convert unstructured repository descriptions into structured "
      "documentation cards and report a confidence for every field.",
      user);

  auto try_parse = [&](const std::string& response) -> Card {
    std::string text = response;
    // Tolerate a fenced ```json block around the object.
    auto start = text.find('{');
    auto end = text.rfind('}');
    if (start == std::string::npos || end == std::string::npos || end < start)
      throw Error(Errc::MalformedJson, "no JSON object in response");
    text = text.substr(start, end - start + 1);

    ordered_json card_doc;
    card_doc["id"] = record.id;
    card_doc["kind"] = std::string(to_string(kind));
    card_doc["tags"] = record.tags;
    card_doc["fields"] = ordered_json::parse(text);  // throws parse_error
    Card card = parse_card(card_doc.dump());
    for (auto& f : card.fields)
      if (f.status.is_filled()) f.provenance = FieldProvenance::imported();
    return card;
  };

  std::string response = gateway.generate(prompt);
  std::string first_error;
  try {
    return try_parse(response);
  } catch (const std::exception& e) {
    first_error = e.what();
  }

  std::string repair_user =
      "Your previous response could not be parsed as the requested JSON "
      "object (" + first_error + ").\nPrevious response:\n" + response +
      "\n\nRespond again with only the corrected JSON object.";
  std::string repaired = gateway.generate(make_prompt(
      "You convert unstructured repository descriptions into structured "
      "documentation cards and report a confidence for every field.",
      repair_user));
  gateway.annotate_last_call("repair");
  try {
    return try_parse(repaired);
  } catch (const std::exception& e) {
    throw Error(Errc::StructuringFailed, record.id + ": " + e.what());
  }
}

std::string pool_stats_json(const std::vector<PoolEntry>& entries,
                            const std::set<std::string>& report_tags) {
  if (entries.empty()) throw Error(Errc::EmptyPool, "no entries to summarize");

  std::vector<double> values;
  values.reserve(entries.size());
  for (const auto& e : entries) values.push_back(e.wcci);
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };

  std::map<std::string, std::size_t> tag_freq;
  for (const auto& e : entries)
    for (const auto& t : e.tags) ++tag_freq[t];

  ordered_json j;
  j["size"] = entries.size();
  j["wcci_quartiles"] = {{"min", values.front()}, {"q1", quantile(0.25)},
                         {"median", quantile(0.5)}, {"q3", quantile(0.75)},
                         {"max", values.back()}};
  ordered_json freq = ordered_json::object();
  for (const auto& [tag, count] : tag_freq) freq[tag] = count;
  j["tag_frequencies"] = std::move(freq);

  std::set<std::string> tags = report_tags;
  if (tags.empty()) {
    // Default: the most frequent tags, capped at ten.
    std::vector<std::pair<std::string, std::size_t>> by_freq(tag_freq.begin(), tag_freq.end());
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < by_freq.size() && i < 10; ++i) tags.insert(by_freq[i].first);
  }

  ordered_json correlations = ordered_json::object();
  if (entries.size() >= 2 && !tags.empty()) {
    auto report = tag_correlation_report(entries, tags);
    for (const auto& [tag, r] : report) {
      ordered_json rj;
      if (std::isnan(r.spearman_rho)) {
        rj["spearman_rho"] = nullptr;
        rj["pearson_r"] = nullptr;
      } else {
        rj["spearman_rho"] = r.spearman_rho;
        rj["pearson_r"] = r.pearson_r;
      }
      rj["n"] = r.n;
      rj["p_note"] = r.p_note;
      correlations[tag] = std::move(rj);
    }
  }
  j["tag_correlations"] = std::move(correlations);
  return j.dump(2) + "\n";
}

}  // namespace cardforge

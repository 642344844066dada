#include "cardforge/trace_stats.hpp"

#include <map>
#include <sstream>

#include "json.hpp"

namespace cardforge {

using nlohmann::ordered_json;

std::string trace_stats_json(const std::vector<std::string>& extraction_traces,
                             const std::vector<std::string>& enrichment_traces) {
  if (extraction_traces.empty() && enrichment_traces.empty())
    throw Error(Errc::EmptyInput, "no trace files given");

  // (file, field) -> terminal round; a session counts as active at every
  // round up to and including the one it ended on.
  std::map<std::pair<std::size_t, std::string>, int> end_round;
  for (std::size_t file = 0; file < extraction_traces.size(); ++file) {
    std::istringstream in(extraction_traces[file]);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ordered_json j = ordered_json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("field") || !j.contains("round") ||
          !j.at("round").is_number_integer())
        throw Error(Errc::MalformedTrace,
                    "extraction trace " + std::to_string(file) + " line " + std::to_string(line_no));
      auto key = std::make_pair(file, j.at("field").get<std::string>());
      int round = j.at("round").get<int>();
      auto [it, inserted] = end_round.emplace(key, round);
      if (!inserted) it->second = std::max(it->second, round);
    }
  }

  std::map<std::string, std::map<int, std::size_t>> per_field_active;
  std::map<int, std::size_t> overall_active;
  for (const auto& [key, last] : end_round) {
    for (int r = 0; r <= last; ++r) {
      ++per_field_active[key.second][r];
      ++overall_active[r];
    }
  }

  std::map<std::string, std::size_t> enrich_counts;
  for (std::size_t file = 0; file < enrichment_traces.size(); ++file) {
    std::istringstream in(enrichment_traces[file]);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ordered_json j = ordered_json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("outcome"))
        throw Error(Errc::MalformedTrace,
                    "enrichment trace " + std::to_string(file) + " line " + std::to_string(line_no));
      const std::string outcome = j.at("outcome").get<std::string>();
      if (outcome == "enriched" || outcome == "not_applicable")
        ++enrich_counts["enriched"];
      else if (outcome == "skipped_unique")
        ++enrich_counts["skipped"];
      else if (outcome == "no_candidates" || outcome == "no_values")
        ++enrich_counts["empty"];
      else
        ++enrich_counts["error"];
    }
  }

  ordered_json out;
  out["sessions"] = end_round.size();
  ordered_json overall = ordered_json::object();
  for (const auto& [round, count] : overall_active) overall[std::to_string(round)] = count;
  out["active_rounds"] = std::move(overall);
  ordered_json per_field = ordered_json::object();
  for (const auto& [field, hist] : per_field_active) {
    ordered_json h = ordered_json::object();
    for (const auto& [round, count] : hist) h[std::to_string(round)] = count;
    per_field[field] = std::move(h);
  }
  out["active_rounds_per_field"] = std::move(per_field);
  ordered_json counts = ordered_json::object();
  counts["enriched"] = enrich_counts.count("enriched") ? enrich_counts["enriched"] : 0;
  counts["skipped"] = enrich_counts.count("skipped") ? enrich_counts["skipped"] : 0;
  counts["empty"] = enrich_counts.count("empty") ? enrich_counts["empty"] : 0;
  counts["error"] = enrich_counts.count("error") ? enrich_counts["error"] : 0;
  out["enrichment_outcomes"] = std::move(counts);
  return out.dump(2) + "\n";
}

}  // namespace cardforge

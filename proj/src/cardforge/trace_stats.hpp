#pragma once

#include <string>
#include <vector>

#include "cardforge/errors.hpp"

namespace cardforge {

/// Summarizes extraction and enrichment trace files: per-field histograms of
/// fields still active at each round, and enrichment outcome counts.
/// Each input string is the full text of one trace JSONL file.
std::string trace_stats_json(const std::vector<std::string>& extraction_traces,
                             const std::vector<std::string>& enrichment_traces);

}  // namespace cardforge

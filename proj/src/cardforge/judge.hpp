#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cardforge/gateway.hpp"
#include "cardforge/ingest.hpp"
#include "cardforge/metrics.hpp"
#include "cardforge/schema.hpp"

namespace cardforge {

enum class MetricKind { Faithfulness, Relevance, Accuracy, Consistency, Usefulness };

inline constexpr std::array<MetricKind, 5> kAllMetrics = {
    MetricKind::Faithfulness, MetricKind::Relevance, MetricKind::Accuracy,
    MetricKind::Consistency, MetricKind::Usefulness};

std::string_view metric_name(MetricKind m);
std::string_view metric_rubric(MetricKind m);

struct JudgeConfig {
  int rounds = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Anonymized rendering: field titles and values only, no id, tags, or
/// provenance.
std::string render_card_for_judging(const Card& card);

/// Scores one card 1-5 against a metric rubric; an unparsable reply earns
/// one re-prompt, then JudgeParseError.
int judge_card(const Card& card, const Document& sources, MetricKind metric,
               Gateway& gateway);

struct ScoreRecord {
  std::string method;  // anonymized label ("A", "B", ...)
  std::string card_id;
  MetricKind metric = MetricKind::Faithfulness;
  int judge_index = 0;
  int round_index = 0;
  int score = 0;
};

struct EvaluationReport {
  // Keyed by the caller's original method labels.
  std::map<std::string, std::map<std::string, double>> mean_scores;  // method -> metric -> mean
  std::map<std::string, std::map<std::string, double>> ranks;        // method -> metric|"average" -> rank
  std::map<int, std::map<std::string, std::map<std::string, double>>> per_judge;
  std::map<std::string, CorrelationResult> agreement;  // metric -> judges 0/1
  std::vector<ScoreRecord> records;                    // anonymized labels
  std::map<std::string, std::string> label_map;        // anonymized -> original
  int missing_scores = 0;

  std::string to_json() const;
};

/// Runs the full protocol: seeded label anonymization, per-round reshuffled
/// presentation, every (method, card, metric, judge, round) scored once,
/// means over judges and rounds, competition ranks with averaged ties.
/// Failed judge calls are dropped from the means and counted.
EvaluationReport evaluate(const std::map<std::string, std::vector<Card>>& methods,
                          const std::map<std::string, Document>& sources,
                          const JudgeConfig& config,
                          const std::vector<Gateway*>& judges);

/// Descending-score competition ranks, tied means averaged.
std::map<std::string, double> rank_methods(const std::map<std::string, double>& mean_by_method);

/// Spearman/Pearson between judge 0 and judge 1 over per-(method, card)
/// round-mean scores, one result per metric.
std::map<std::string, CorrelationResult> judge_agreement(const EvaluationReport& report);

}  // namespace cardforge

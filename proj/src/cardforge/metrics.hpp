#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cardforge/schema.hpp"

namespace cardforge {

struct PoolEntry;  // pool.hpp

/// Per-field completeness: missing 0.0, not-applicable 1.0, filled fields
/// contribute their confidence weight.
double completeness_score(const Field& field);

struct WcciScore {
  double value = 0.0;
  std::map<std::string, double> per_field;
};

/// Mean completeness over the card's taxonomy. The card must validate;
/// shape violations are errors, not zero scores.
WcciScore wcci(const Card& card);

std::vector<double> fractional_ranks(std::span<const double> xs);

double pearson(std::span<const double> xs, std::span<const double> ys);
double spearman(std::span<const double> xs, std::span<const double> ys);

struct CorrelationResult {
  double spearman_rho = 0.0;
  double pearson_r = 0.0;
  std::size_t n = 0;
  std::string p_note;
};

/// Correlates binary tag presence against WCCI across pool entries.
/// Degenerate tags (constant presence vector) are reported with NaN
/// coefficients and an explanatory p_note rather than dropped.
std::map<std::string, CorrelationResult> tag_correlation_report(
    const std::vector<PoolEntry>& entries, const std::set<std::string>& tags);

using EmbeddingProvider = std::function<std::vector<double>(const std::string&)>;

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct AgreementReport {
  std::map<std::string, double> per_field_similarity;
  double agreement_rate = 0.0;
  double threshold = 0.8;
};

/// Per-field semantic agreement between two same-kind cards. Fields empty on
/// both sides agree with similarity 1.0; a field empty on exactly one side
/// scores 0.0 without consulting the provider.
AgreementReport agreement_rate(const Card& a, const Card& b,
                               const EmbeddingProvider& provider,
                               double threshold = 0.8);

}  // namespace cardforge

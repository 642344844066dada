#include "cardforge/judge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>

#include "json.hpp"

#include "cardforge/rng.hpp"

namespace cardforge {

using nlohmann::ordered_json;

std::string_view metric_name(MetricKind m) {
  switch (m) {
    case MetricKind::Faithfulness: return "faithfulness";
    case MetricKind::Relevance: return "relevance";
    case MetricKind::Accuracy: return "accuracy";
    case MetricKind::Consistency: return "consistency";
    case MetricKind::Usefulness: return "usefulness";
  }
  return "faithfulness";
}

std::string_view metric_rubric(MetricKind m) {
  switch (m) {
    case MetricKind::Faithfulness:
      return "Accurately reflects information from source materials without "
             "introducing unsupported claims or omitting key points";
    case MetricKind::Relevance:
      return "Content focused on the specific category being evaluated, "
             "avoiding unrelated or off-topic information";
    case MetricKind::Accuracy:
      return "Statements are factually correct based on available references "
             "and can be directly verified";
    case MetricKind::Consistency:
      return "Information is internally consistent within the card, with no "
             "contradictions or logical gaps";
    case MetricKind::Usefulness:
      return "Provides clear, practical, and helpful information for users or "
             "researchers who want to understand or use the model or dataset";
  }
  return "";
}

void JudgeConfig::validate() const {
  if (rounds < 1) throw Error(Errc::InvalidConfig, "rounds must be >= 1");
}

std::string render_card_for_judging(const Card& card) {
  std::string out;
  for (const auto& f : card.fields) {
    const TaxonomyEntry* entry = find_taxonomy_entry(card.kind, f.key.name);
    out += "### ";
    out += entry ? entry->title : f.key.name;
    out += "\n";
    switch (f.status.state) {
      case FieldState::Filled: out += f.value; break;
      case FieldState::Missing: out += "(missing)"; break;
      case FieldState::NotApplicable: out += "(not applicable)"; break;
    }
    out += "\n\n";
  }
  return out;
}

namespace {

std::optional<int> first_score(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i > 1) return std::nullopt;  // multi-digit is never a 1-5 score
    return text[i] - '0';
  }
  return std::nullopt;
}

std::string judge_user_prompt(const Card& card, const Document& sources, MetricKind metric) {
  std::string user = "Rubric: ";
  user += metric_name(metric);
  user += " -- ";
  user += metric_rubric(metric);
  user += ".\nScore the following card from 1 (poor) to 5 (excellent) against the rubric.\n\n";
  user += "Card:\n" + render_card_for_judging(card);
  user += "Source material:\n";
  for (const auto& c : sources.chunks) {
    if (!c.heading.empty()) user += "## " + c.heading + "\n";
    user += c.body + "\n";
  }
  user += "\nReply with a single integer from 1 to 5.";
  return user;
}

constexpr const char* kJudgeSystem =
    "You are an impartial documentation quality judge. Apply the rubric "
    "strictly and reply with a single integer score.";

}  // namespace

int judge_card(const Card& card, const Document& sources, MetricKind metric,
               Gateway& gateway) {
  if (sources.empty()) throw Error(Errc::EmptyDocument, "judging needs source chunks");

  std::string response = gateway.generate(
      make_prompt(kJudgeSystem, judge_user_prompt(card, sources, metric)));
  auto score = first_score(response);
  if (score && *score >= 1 && *score <= 5) return *score;

  std::string retry_user =
      "Your previous reply (\"" + response +
      "\") did not contain a score. Reply with a single integer from 1 to 5.";
  response = gateway.generate(make_prompt(kJudgeSystem, retry_user));
  score = first_score(response);
  if (score && *score >= 1 && *score <= 5) return *score;
  throw Error(Errc::JudgeParseError, "no 1-5 score in \"" + response + "\"");
}

std::map<std::string, double> rank_methods(const std::map<std::string, double>& mean_by_method) {
  std::vector<std::pair<std::string, double>> ordered(mean_by_method.begin(), mean_by_method.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::map<std::string, double> ranks;
  std::size_t i = 0;
  while (i < ordered.size()) {
    std::size_t j = i;
    while (j + 1 < ordered.size() && ordered[j + 1].second == ordered[i].second) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[ordered[k].first] = rank;
    i = j + 1;
  }
  return ranks;
}

EvaluationReport evaluate(const std::map<std::string, std::vector<Card>>& methods,
                          const std::map<std::string, Document>& sources,
                          const JudgeConfig& config,
                          const std::vector<Gateway*>& judges) {
  config.validate();
  if (methods.size() < 1) throw Error(Errc::EmptyInput, "no methods to evaluate");
  if (judges.empty()) throw Error(Errc::EmptyInput, "no judges configured");

  // Every method must cover the same card ids, and each id needs sources.
  std::set<std::string> id_set;
  for (const auto& [label, cards] : methods) {
    std::set<std::string> ids;
    for (const auto& c : cards) ids.insert(c.id);
    if (ids.size() != cards.size())
      throw Error(Errc::CoverageMismatch, "duplicate card ids under method " + label);
    if (label == methods.begin()->first) {
      id_set = ids;
    } else if (ids != id_set) {
      throw Error(Errc::CoverageMismatch, "method " + label + " covers a different card set");
    }
  }
  for (const auto& id : id_set)
    if (!sources.contains(id))
      throw Error(Errc::CoverageMismatch, "no sources for card " + id);

  EvaluationReport report;

  // Anonymize method labels with a seeded shuffle: the judge prompts carry
  // card content only; labels exist solely in our bookkeeping.
  std::vector<std::string> original_labels;
  for (const auto& [label, _] : methods) original_labels.push_back(label);
  std::vector<std::string> shuffled = original_labels;
  deterministic_shuffle(shuffled, config.seed);
  std::map<std::string, std::string> anon_of;  // original -> anonymized
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    std::string anon;
    std::size_t n = i;
    do {
      anon.insert(anon.begin(), static_cast<char>('A' + n % 26));
      n /= 26;
    } while (n > 0);
    anon_of[shuffled[i]] = anon;
    report.label_map[anon] = shuffled[i];
  }

  struct Item {
    std::string original;
    std::string card_id;
  };
  std::vector<Item> base_items;
  for (const auto& label : original_labels)
    for (const auto& id : id_set) base_items.push_back(Item{label, id});

  for (int judge_idx = 0; judge_idx < static_cast<int>(judges.size()); ++judge_idx) {
    for (int round = 0; round < config.rounds; ++round) {
      std::vector<Item> items = base_items;
      deterministic_shuffle(items, config.seed ^ static_cast<std::uint64_t>(round + 1));
      for (const auto& item : items) {
        const Card* card = nullptr;
        for (const auto& c : methods.at(item.original))
          if (c.id == item.card_id) card = &c;
        for (MetricKind metric : kAllMetrics) {
          try {
            int score = judge_card(*card, sources.at(item.card_id), metric,
                                   *judges[static_cast<std::size_t>(judge_idx)]);
            report.records.push_back(ScoreRecord{anon_of.at(item.original), item.card_id,
                                                 metric, judge_idx, round, score});
          } catch (const Error&) {
            ++report.missing_scores;
          }
        }
      }
    }
  }

  // Deterministic fold over the completed record set.
  std::sort(report.records.begin(), report.records.end(),
            [](const ScoreRecord& a, const ScoreRecord& b) {
              return std::tie(a.metric, a.method, a.judge_index, a.round_index, a.card_id) <
                     std::tie(b.metric, b.method, b.judge_index, b.round_index, b.card_id);
            });

  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
  std::map<int, std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>>> acc_judge;
  for (const auto& r : report.records) {
    const std::string& original = report.label_map.at(r.method);
    auto& [sum, count] = acc[original][std::string(metric_name(r.metric))];
    sum += r.score;
    ++count;
    auto& [jsum, jcount] = acc_judge[r.judge_index][original][std::string(metric_name(r.metric))];
    jsum += r.score;
    ++jcount;
  }
  for (const auto& [method, by_metric] : acc)
    for (const auto& [metric, pair] : by_metric)
      report.mean_scores[method][metric] = pair.first / static_cast<double>(pair.second);
  for (const auto& [judge_idx, by_method] : acc_judge)
    for (const auto& [method, by_metric] : by_method)
      for (const auto& [metric, pair] : by_metric)
        report.per_judge[judge_idx][method][metric] = pair.first / static_cast<double>(pair.second);

  // Per-metric competition ranks plus the cross-metric average rank.
  for (MetricKind metric : kAllMetrics) {
    const std::string name(metric_name(metric));
    std::map<std::string, double> means;
    for (const auto& [method, by_metric] : report.mean_scores)
      if (by_metric.contains(name)) means[method] = by_metric.at(name);
    if (means.empty()) continue;
    for (const auto& [method, rank] : rank_methods(means)) report.ranks[method][name] = rank;
  }
  for (auto& [method, by_metric] : report.ranks) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [metric, rank] : by_metric) {
      sum += rank;
      ++count;
    }
    if (count > 0) by_metric["average"] = sum / static_cast<double>(count);
  }

  if (judges.size() >= 2) report.agreement = judge_agreement(report);
  return report;
}

std::map<std::string, CorrelationResult> judge_agreement(const EvaluationReport& report) {
  // Per-(method, card) means over rounds for judges 0 and 1.
  std::map<std::string, std::map<std::pair<std::string, std::string>,
                                 std::array<std::pair<double, std::size_t>, 2>>> acc;
  for (const auto& r : report.records) {
    if (r.judge_index > 1) continue;
    auto& cell = acc[std::string(metric_name(r.metric))][{r.method, r.card_id}];
    cell[static_cast<std::size_t>(r.judge_index)].first += r.score;
    ++cell[static_cast<std::size_t>(r.judge_index)].second;
  }

  std::map<std::string, CorrelationResult> out;
  for (const auto& [metric, cells] : acc) {
    std::vector<double> a, b;
    for (const auto& [key, pair] : cells) {
      if (pair[0].second == 0 || pair[1].second == 0) continue;
      a.push_back(pair[0].first / static_cast<double>(pair[0].second));
      b.push_back(pair[1].first / static_cast<double>(pair[1].second));
    }
    CorrelationResult r;
    r.n = a.size();
    if (a.size() < 2) {
      r.spearman_rho = std::numeric_limits<double>::quiet_NaN();
      r.pearson_r = std::numeric_limits<double>::quiet_NaN();
      r.p_note = "degenerate: fewer than 2 paired observations";
      out[metric] = std::move(r);
      continue;
    }
    try {
      r.spearman_rho = spearman(a, b);
      r.pearson_r = pearson(a, b);
      r.p_note = "significance not computed; permutation test over " +
                 std::to_string(a.size()) + " pairs recommended";
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateInput) throw;
      r.spearman_rho = std::numeric_limits<double>::quiet_NaN();
      r.pearson_r = std::numeric_limits<double>::quiet_NaN();
      r.p_note = std::string("degenerate: ") + e.what();
    }
    out[metric] = std::move(r);
  }
  return out;
}

std::string EvaluationReport::to_json() const {
  ordered_json j;
  ordered_json means = ordered_json::object();
  for (const auto& [method, by_metric] : mean_scores) {
    ordered_json m = ordered_json::object();
    for (const auto& [metric, value] : by_metric) m[metric] = value;
    means[method] = std::move(m);
  }
  j["mean_scores"] = std::move(means);

  ordered_json rj = ordered_json::object();
  for (const auto& [method, by_metric] : ranks) {
    ordered_json m = ordered_json::object();
    for (const auto& [metric, value] : by_metric) m[metric] = value;
    rj[method] = std::move(m);
  }
  j["ranks"] = std::move(rj);

  ordered_json pj = ordered_json::object();
  for (const auto& [judge_idx, by_method] : per_judge) {
    ordered_json m = ordered_json::object();
    for (const auto& [method, by_metric] : by_method) {
      ordered_json mm = ordered_json::object();
      for (const auto& [metric, value] : by_metric) mm[metric] = value;
      m[method] = std::move(mm);
    }
    pj["judge_" + std::to_string(judge_idx)] = std::move(m);
  }
  j["per_judge"] = std::move(pj);

  ordered_json aj = ordered_json::object();
  for (const auto& [metric, r] : agreement) {
    ordered_json m;
    if (std::isnan(r.spearman_rho)) {
      m["spearman_rho"] = nullptr;
      m["pearson_r"] = nullptr;
    } else {
      m["spearman_rho"] = r.spearman_rho;
      m["pearson_r"] = r.pearson_r;
    }
    m["n"] = r.n;
    m["p_note"] = r.p_note;
    aj[metric] = std::move(m);
  }
  j["agreement"] = std::move(aj);

  j["label_map"] = label_map;
  j["missing_scores"] = missing_scores;

  ordered_json records = ordered_json::array();
  for (const auto& r : this->records) {
    ordered_json m;
    m["method"] = r.method;
    m["card_id"] = r.card_id;
    m["metric"] = std::string(metric_name(r.metric));
    m["judge"] = r.judge_index;
    m["round"] = r.round_index;
    m["score"] = r.score;
    records.push_back(std::move(m));
  }
  j["records"] = std::move(records);
  return j.dump(2) + "\n";
}

}  // namespace cardforge

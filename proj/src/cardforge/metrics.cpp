#include "cardforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cardforge/pool.hpp"

namespace cardforge {

double completeness_score(const Field& field) {
  switch (field.status.state) {
    case FieldState::Missing: return 0.0;
    case FieldState::NotApplicable: return 1.0;
    case FieldState::Filled: return field.status.confidence.weight();
  }
  return 0.0;
}

WcciScore wcci(const Card& card) {
  require_valid(card);
  WcciScore score;
  double sum = 0.0;
  for (const auto& f : card.fields) {
    double s = completeness_score(f);
    score.per_field[f.key.name] = s;
    sum += s;
  }
  score.value = sum / static_cast<double>(card.fields.size());
  return score;
}

std::vector<double> fractional_ranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    // Ties share the average of the ranks they span (1-based).
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

void check_pair(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw Error(Errc::LengthMismatch, std::to_string(xs.size()) + " vs " + std::to_string(ys.size()));
  if (xs.size() < 2)
    throw Error(Errc::DegenerateInput, "need at least 2 observations");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(xs) || constant(ys))
    throw Error(Errc::DegenerateInput, "constant sequence has no defined correlation");
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  if (vx == 0.0 || vy == 0.0)
    throw Error(Errc::DegenerateInput, "zero variance");
  return cov / std::sqrt(vx * vy);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys);
  const std::vector<double> rx = fractional_ranks(xs);
  const std::vector<double> ry = fractional_ranks(ys);
  return pearson(rx, ry);
}

std::map<std::string, CorrelationResult> tag_correlation_report(
    const std::vector<PoolEntry>& entries, const std::set<std::string>& tags) {
  if (entries.size() < 2)
    throw Error(Errc::EmptyPool, "tag correlation needs at least 2 entries");

  std::vector<double> wcci_values;
  wcci_values.reserve(entries.size());
  for (const auto& e : entries) wcci_values.push_back(e.wcci);

  std::map<std::string, CorrelationResult> report;
  for (const auto& tag : tags) {
    std::vector<double> presence;
    presence.reserve(entries.size());
    std::size_t freq = 0;
    for (const auto& e : entries) {
      bool has = e.tags.contains(tag);
      presence.push_back(has ? 1.0 : 0.0);
      if (has) ++freq;
    }
    if (freq == 0) throw Error(Errc::TagAbsent, tag);

    CorrelationResult r;
    r.n = freq;
    try {
      r.spearman_rho = spearman(presence, wcci_values);
      r.pearson_r = pearson(presence, wcci_values);
      r.p_note = "significance not computed; permutation test over " +
                 std::to_string(entries.size()) + " entries recommended";
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateInput) throw;
      r.spearman_rho = std::numeric_limits<double>::quiet_NaN();
      r.pearson_r = std::numeric_limits<double>::quiet_NaN();
      r.p_note = std::string("degenerate: ") + e.what();
    }
    report[tag] = std::move(r);
  }
  return report;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(Errc::LengthMismatch, "embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

AgreementReport agreement_rate(const Card& a, const Card& b,
                               const EmbeddingProvider& provider,
                               double threshold) {
  if (a.kind != b.kind)
    throw Error(Errc::KindMismatch, "cards must share a kind");

  AgreementReport report;
  report.threshold = threshold;
  std::size_t agreeing = 0;
  for (const auto& entry : taxonomy_entries(a.kind)) {
    const Field* fa = a.find(entry.name);
    const Field* fb = b.find(entry.name);
    const bool ea = !fa || !fa->status.is_filled();
    const bool eb = !fb || !fb->status.is_filled();
    double sim = 0.0;
    if (ea && eb) {
      sim = 1.0;
    } else if (!ea && !eb) {
      std::vector<double> va, vb;
      try {
        va = provider(fa->value);
        vb = provider(fb->value);
      } catch (const std::exception& e) {
        throw Error(Errc::ProviderUnavailable, e.what());
      }
      sim = cosine_similarity(va, vb);
    }
    report.per_field_similarity[std::string(entry.name)] = sim;
    if (sim > threshold) ++agreeing;
  }
  report.agreement_rate =
      static_cast<double>(agreeing) / static_cast<double>(taxonomy_size(a.kind));
  return report;
}

}  // namespace cardforge

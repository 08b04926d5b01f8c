#include "senm/preprocessing.hpp"

#include <algorithm>
#include <map>

namespace senm {

std::string_view to_string(EgoLabel label) { return label == EgoLabel::person ? "person" : "other"; }

std::string_view to_string(ExclusionReason reason) {
  switch (reason) {
    case ExclusionReason::too_few_tweets: return "too_few_tweets";
    case ExclusionReason::too_short_span: return "too_short_span";
    case ExclusionReason::too_sparse_months: return "too_sparse_months";
    case ExclusionReason::not_person: return "not_person";
  }
  return "unknown";
}

bool ActivityVerdict::has(ExclusionReason r) const {
  return std::find(reasons.begin(), reasons.end(), r) != reasons.end();
}

std::unordered_map<std::string, EgoLabel> load_ego_labels(const std::filesystem::path& path) {
  std::unordered_map<std::string, EgoLabel> labels;
  const auto rows = read_csv(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 2) throw ValidationError(path.string() + ": row " + std::to_string(i + 1) + " needs ego_id,label");
    const std::string id = trim(row[0]);
    const std::string label = trim(row[1]);
    if (i == 0 && id == "ego_id") continue;
    if (label == "person" || label == "people")
      labels[id] = EgoLabel::person;
    else if (label == "other" || label == "others")
      labels[id] = EgoLabel::other;
    else
      throw ValidationError(path.string() + ": unknown label '" + label + "'");
  }
  return labels;
}

EgoLabel classify_ego(const EgoTimeline& timeline, const ClassifierPolicy& policy) {
  if (policy.external_labels) {
    const auto it = policy.external_labels->find(timeline.ego_id);
    if (it == policy.external_labels->end()) throw ClassifierUnavailable(timeline.ego_id);
    return it->second;
  }
  const double posts = static_cast<double>(timeline.total_posts());
  if (posts == 0.0) return EgoLabel::other;
  const double span_days =
      std::max(1.0, static_cast<double>(timeline.last_activity - timeline.first_activity) / kSecondsPerDay);
  if (posts / span_days > policy.max_posts_per_day) return EgoLabel::other;
  if (static_cast<double>(timeline.records.size()) / posts < policy.min_interaction_ratio) return EgoLabel::other;
  return EgoLabel::person;
}

std::vector<std::size_t> monthly_post_counts(const EgoTimeline& timeline) {
  if (timeline.total_posts() == 0) return {};
  const std::int64_t first = month_index(timeline.first_activity);
  const std::int64_t last = month_index(timeline.last_activity);
  std::vector<std::size_t> counts(static_cast<std::size_t>(last - first + 1), 0);
  auto bump = [&](Timestamp ts) { ++counts[static_cast<std::size_t>(month_index(ts) - first)]; };
  for (const auto& r : timeline.records) bump(r.timestamp);
  for (Timestamp ts : timeline.noncommunicative_posts) bump(ts);
  return counts;
}

ActivityVerdict check_activity(const EgoTimeline& timeline, const ActivityPolicy& policy) {
  ActivityVerdict verdict;
  verdict.ego_id = timeline.ego_id;
  if (timeline.total_posts() < policy.min_posts) verdict.reasons.push_back(ExclusionReason::too_few_tweets);

  const double span_seconds = static_cast<double>(timeline.last_activity - timeline.first_activity);
  if (span_seconds < policy.min_span_days * kSecondsPerDay)
    verdict.reasons.push_back(ExclusionReason::too_short_span);

  const auto months = monthly_post_counts(timeline);
  if (!months.empty()) {
    const auto sparse = static_cast<double>(
        std::count_if(months.begin(), months.end(), [&](std::size_t c) { return c < policy.min_posts_per_month; }));
    if (sparse > policy.max_sparse_month_fraction * static_cast<double>(months.size()))
      verdict.reasons.push_back(ExclusionReason::too_sparse_months);
  }
  verdict.kept = verdict.reasons.empty();
  return verdict;
}

ActivityVerdict evaluate_ego(const EgoTimeline& timeline, const ActivityPolicy& activity,
                             const ClassifierPolicy& classifier) {
  ActivityVerdict verdict = check_activity(timeline, activity);
  if (classify_ego(timeline, classifier) == EgoLabel::other) {
    verdict.reasons.push_back(ExclusionReason::not_person);
    verdict.kept = false;
  }
  return verdict;
}

std::vector<RelationshipAggregate> aggregate_relationships(const EgoTimeline& timeline) {
  std::map<std::string, RelationshipAggregate> by_alter;
  for (const auto& record : timeline.records) {
    for (const auto& alter : record.alter_ids) {
      auto [it, inserted] = by_alter.try_emplace(alter);
      auto& agg = it->second;
      if (inserted) {
        agg.ego_id = timeline.ego_id;
        agg.alter_id = alter;
        agg.first_ts = record.timestamp;
        agg.last_ts = record.timestamp;
      }
      ++agg.interaction_count;
      agg.first_ts = std::min(agg.first_ts, record.timestamp);
      agg.last_ts = std::max(agg.last_ts, record.timestamp);
      if (record.has_text()) ++agg.text_interactions;
    }
  }

  std::vector<RelationshipAggregate> out;
  out.reserve(by_alter.size());
  for (auto& [alter, agg] : by_alter) {
    const double years = static_cast<double>(timeline.last_activity - agg.first_ts) / kSecondsPerYear;
    agg.annualized_frequency = static_cast<double>(agg.interaction_count) / std::max(years, kMinRelationshipYears);
    out.push_back(std::move(agg));
  }
  return out;
}

NetworkSplit split_full_active(std::span<const RelationshipAggregate> aggregates, double min_frequency) {
  NetworkSplit split;
  split.full.assign(aggregates.begin(), aggregates.end());
  for (const auto& a : aggregates)
    if (a.annualized_frequency >= min_frequency) split.active.push_back(a);
  return split;
}

}  // namespace senm

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "senm/ingestion.hpp"

namespace senm {

enum class EgoLabel { person, other };
std::string_view to_string(EgoLabel label);

class ClassifierUnavailable : public ValidationError {
 public:
  explicit ClassifierUnavailable(const std::string& ego_id)
      : ValidationError("ego labels file has no entry for ego '" + ego_id + "'") {}
};

/// Person/organisation classifier hook. With `external_labels` set the labels
/// are taken verbatim; otherwise a posting-rate heuristic is used.
struct ClassifierPolicy {
  double max_posts_per_day = 72.0;
  double min_interaction_ratio = 0.01;
  std::optional<std::unordered_map<std::string, EgoLabel>> external_labels;
};

/// Reads `ego_id,label` rows where label is `person` or `other`.
std::unordered_map<std::string, EgoLabel> load_ego_labels(const std::filesystem::path& path);

EgoLabel classify_ego(const EgoTimeline& timeline, const ClassifierPolicy& policy);

struct ActivityPolicy {
  std::size_t min_posts = 2000;
  double min_span_days = 182.0;
  std::size_t min_posts_per_month = 10;    // "once every 3 days"
  double max_sparse_month_fraction = 0.5;  // sparse months allowed up to this share
  double active_min_frequency = 1.0;       // interactions per year
};

enum class ExclusionReason { too_few_tweets, too_short_span, too_sparse_months, not_person };
std::string_view to_string(ExclusionReason reason);

struct ActivityVerdict {
  std::string ego_id;
  bool kept = true;
  std::vector<ExclusionReason> reasons;

  bool has(ExclusionReason r) const;
};

/// Posts per calendar month (UTC), from the month of first activity through
/// the month of last activity inclusive; months without posts hold zero.
std::vector<std::size_t> monthly_post_counts(const EgoTimeline& timeline);

ActivityVerdict check_activity(const EgoTimeline& timeline, const ActivityPolicy& policy = {});

/// Activity filters plus the person/other classifier.
ActivityVerdict evaluate_ego(const EgoTimeline& timeline, const ActivityPolicy& activity,
                             const ClassifierPolicy& classifier);

struct RelationshipAggregate {
  std::string ego_id;
  std::string alter_id;
  std::size_t interaction_count = 0;
  Timestamp first_ts = 0;
  Timestamp last_ts = 0;
  double annualized_frequency = 0.0;
  std::size_t text_interactions = 0;

  bool operator==(const RelationshipAggregate&) const = default;
};

/// Shortest relationship duration used for annualizing, in years.
inline constexpr double kMinRelationshipYears = 1.0 / 12.0;

/// One aggregate per distinct alter, sorted by alter id. Durations run from
/// the first interaction with the alter to the ego's last activity.
std::vector<RelationshipAggregate> aggregate_relationships(const EgoTimeline& timeline);

struct NetworkSplit {
  std::vector<RelationshipAggregate> full;
  std::vector<RelationshipAggregate> active;
};

NetworkSplit split_full_active(std::span<const RelationshipAggregate> aggregates,
                               double min_frequency = 1.0);

}  // namespace senm

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "senm/ingestion.hpp"
#include "senm/signing.hpp"
#include "senm/topics.hpp"

namespace senm {

class InfeasibleConfig : public ValidationError {
 public:
  explicit InfeasibleConfig(const std::string& what) : ValidationError("infeasible scenario: " + what) {}
};

struct CircleLevel {
  double cumulative_size = 0.0;  // expected nested size up to and including this level
  double frequency = 0.0;        // median interactions per year
};

struct TermSpec {
  std::string term;  // already normalized (lowercase, no diacritics)
  Topic topic = Topic::general;
  double weight = 1.0;
};

struct LocationSpec {
  std::string text;       // declared location string
  std::string country;    // empty: not in the emitted location map
  std::string continent;
  double weight = 1.0;
};

/// Ratio-3 levels with nested sizes 1.5, 5, 15, 45, 135.
std::vector<CircleLevel> default_circle_levels();

/// Terms named `<prefix>01`, `<prefix>02`, ... with Zipf weights 1/rank^exponent.
std::vector<TermSpec> zipf_terms(const std::string& prefix, std::size_t count, Topic topic, double exponent = 1.0,
                                 double scale = 1.0);

struct ScenarioConfig {
  std::string name = "synthetic";
  std::size_t ego_count = 100;
  std::vector<CircleLevel> circle_levels = default_circle_levels();
  double frequency_noise = 0.15;  // lognormal sigma around each level's frequency
  std::vector<double> negativity_by_level = {0.5, 0.5, 0.5, 0.5, 0.5};
  double inactive_fraction = 0.3;    // share of the full network contacted less than yearly
  double inactive_negativity = 0.2;
  // Relationship age as a fraction of the window; with the planted frequency
  // this fixes each relationship's interaction count.
  double min_age_fraction = 0.75;
  double max_age_fraction = 1.0;
  double neutral_share = 0.4;     // share of non-negative labels that are neutral
  double hashtag_rate = 0.5;      // mean hashtags per interaction
  std::vector<TermSpec> term_universe = zipf_terms("tag", 40, Topic::general);
  std::vector<LocationSpec> locations;
  std::size_t noncommunicative_posts = 200;
  bool emit_text = false;
  std::uint64_t seed = 1;
  Timestamp start = 1577836800;  // 2020-01-01T00:00:00Z
  double window_days = 730.0;
  std::size_t top_k = 20;
};

/// Throws InfeasibleConfig for invalid or overlapping configurations.
void validate(const ScenarioConfig& config);

struct AlterTruth {
  std::string alter_id;
  int level = -1;  // -1: contacted less than once a year
  double frequency = 0.0;  // realized annualized frequency
  RelationshipSign sign = RelationshipSign::positive;
  std::size_t interactions = 0;
  std::size_t negative_labels = 0;
};

struct EgoTruth {
  std::string ego_id;
  int optimum_circles = 0;  // planted levels with at least one alter
  std::vector<AlterTruth> alters;
};

using TermCount = std::pair<std::string, std::size_t>;

struct DatasetTruth {
  std::string name;
  std::vector<EgoTruth> egos;
  double full_negativity = 0.0;    // percent
  double active_negativity = 0.0;  // percent
  double active_fraction = 0.0;
  std::vector<TermCount> top_hashtags_full;
  std::vector<TermCount> top_hashtags_active;
};

struct GeneratedDataset {
  std::string name;
  std::vector<EgoTimeline> timelines;  // ordered by ego id
  DatasetTruth truth;
};

/// Deterministic in `config.seed`; egos are seeded by (seed, ego index).
GeneratedDataset generate_dataset(const ScenarioConfig& config, unsigned jobs = 1);

struct Scenario {
  std::uint64_t seed = 1;
  std::vector<ScenarioConfig> datasets;
};

/// JSON scenario file: {"seed": n, "datasets": [{...ScenarioConfig fields...}]}.
/// Datasets without an explicit seed derive one from the scenario seed.
Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});
Scenario parse_scenario(std::string_view json_text, std::optional<std::uint64_t> seed_override = {});

/// Writes datasets.csv, one directory of timelines per dataset, truth.json,
/// labelmap.csv and (when locations are configured) locations.csv.
void write_generated(const std::filesystem::path& out_dir, const std::vector<GeneratedDataset>& datasets,
                     const std::vector<ScenarioConfig>& configs);

std::string truth_to_json(const std::vector<DatasetTruth>& truths);

}  // namespace senm

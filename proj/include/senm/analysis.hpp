#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "senm/signing.hpp"

namespace senm {

class NoSignedRelationships : public DataError {
 public:
  NoSignedRelationships() : DataError("no signed relationships to compute negativity from") {}
};

class InsufficientEgos : public DataError {
 public:
  explicit InsufficientEgos(std::size_t n)
      : DataError("at least 2 non-degenerate egos are required, got " + std::to_string(n)) {}
};

class NoMatchingEgos : public DataError {
 public:
  explicit NoMatchingEgos(int k) : DataError("no egos with exactly " + std::to_string(k) + " circles") {}
};

struct NegativityTally {
  std::size_t negative = 0;
  std::size_t signed_total = 0;  // negative + positive; unsigned excluded

  NegativityTally& operator+=(const NegativityTally& o) {
    negative += o.negative;
    signed_total += o.signed_total;
    return *this;
  }
  /// Throws NoSignedRelationships when nothing is signed.
  double percentage() const;
};

NegativityTally tally(std::span<const SignedRelationship> relationships);

/// 100 * negative / (negative + positive).
double negativity_percentage(std::span<const SignedRelationship> relationships);

struct FullActiveRow {
  std::string dataset;
  double full = 0.0;    // percent
  double active = 0.0;  // percent
  double delta = 0.0;   // active - full, percentage points
};

/// Pooled over every ego of the dataset.
FullActiveRow full_vs_active_row(std::string dataset, std::span<const SignedEgoNetwork> egos);

struct CircleCountSummary {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t egos = 0;
  std::size_t egos_with_k = 0;
  int k = 5;
};

/// Mean with a Student-t 95% interval: mean +- t(0.975, n-1) * s / sqrt(n).
CircleCountSummary mean_optimum_circles(std::span<const int> circle_counts, int k = 5);
/// Over the egos that have a circle structure.
CircleCountSummary mean_optimum_circles(std::span<const SignedEgoNetwork> egos, int k = 5);

/// Per-level mean of nested circle sizes over egos with exactly k circles.
std::vector<double> mean_circle_sizes(std::span<const SignedEgoNetwork> egos, int k = 5);

enum class CircleAveraging { pooled, per_ego };

struct CircleNegativityRow {
  double mean_negative_count = 0.0;
  double percentage = 0.0;
};

/// One row per nested circle for egos with exactly k circles. Pooled rows use
/// sum(negative) / sum(signed); per-ego rows average the egos' percentages.
std::vector<CircleNegativityRow> per_circle_negativity(std::span<const SignedEgoNetwork> egos, int k = 5,
                                                        CircleAveraging averaging = CircleAveraging::pooled);

struct DriftRow {
  std::string provider;
  double full = 0.0;
  double active = 0.0;
  double delta = 0.0;
};

/// Signs a dataset with a given provider; used to compare providers on
/// identical unsigned networks.
using DatasetSigner = std::function<std::vector<SignedEgoNetwork>(const SentimentProvider&)>;

std::vector<DriftRow> compare_providers(const DatasetSigner& sign, const SentimentProvider& a,
                                        const SentimentProvider& b);

struct Place {
  std::string country;
  std::string continent;
};

/// Keys are folded (lowercase, no diacritics) and trimmed declared locations.
using LocationMap = std::unordered_map<std::string, Place>;

/// Reads `location,country,continent` rows.
LocationMap load_location_map(const std::filesystem::path& path);
std::string location_key(std::string_view declared_location);

struct EgoLocation {
  std::optional<std::string> declared_location;
  std::size_t relationships = 0;
};

struct LocationRow {
  std::string name;
  std::size_t egos = 0;
  std::size_t relationships = 0;

  bool operator==(const LocationRow&) const = default;
};

struct LocationTables {
  std::vector<LocationRow> countries;   // only places with >= country_min_egos egos
  std::vector<LocationRow> continents;  // unfiltered
};

inline constexpr const char* kUnknownPlace = "UNK";

/// Rows sorted by ego count (descending), then name.
LocationTables aggregate_by_location(std::span<const EgoLocation> egos, const LocationMap& mapping,
                                     std::size_t country_min_egos = 3);

/// Everything reported for one dataset.
struct DatasetReport {
  std::string dataset;
  FullActiveRow negativity;
  std::optional<CircleCountSummary> circles;
  std::optional<std::vector<double>> mean_circle_sizes;
  std::optional<std::vector<CircleNegativityRow>> per_circle;
  std::vector<DriftRow> provider_drift;
  std::size_t egos = 0;
  std::size_t degenerate_egos = 0;
};

DatasetReport build_dataset_report(std::string dataset, std::span<const SignedEgoNetwork> egos, int k = 5,
                                   CircleAveraging averaging = CircleAveraging::pooled);

}  // namespace senm

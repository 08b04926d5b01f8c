#include "senm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "senm/topics.hpp"

namespace senm {

double NegativityTally::percentage() const {
  if (signed_total == 0) throw NoSignedRelationships();
  return 100.0 * static_cast<double>(negative) / static_cast<double>(signed_total);
}

NegativityTally tally(std::span<const SignedRelationship> relationships) {
  NegativityTally t;
  for (const auto& r : relationships) {
    if (r.sign == RelationshipSign::unsigned_) continue;
    ++t.signed_total;
    if (r.sign == RelationshipSign::negative) ++t.negative;
  }
  return t;
}

double negativity_percentage(std::span<const SignedRelationship> relationships) {
  return tally(relationships).percentage();
}

FullActiveRow full_vs_active_row(std::string dataset, std::span<const SignedEgoNetwork> egos) {
  NegativityTally full, active;
  for (const auto& ego : egos) {
    full += tally(ego.full_relationships);
    active += tally(ego.relationships);
  }
  FullActiveRow row;
  row.dataset = std::move(dataset);
  row.full = full.percentage();
  row.active = active.percentage();
  row.delta = row.active - row.full;
  return row;
}

CircleCountSummary mean_optimum_circles(std::span<const int> circle_counts, int k) {
  const std::size_t n = circle_counts.size();
  if (n < 2) throw InsufficientEgos(n);
  CircleCountSummary s;
  s.k = k;
  s.egos = n;
  s.egos_with_k = static_cast<std::size_t>(std::count(circle_counts.begin(), circle_counts.end(), k));
  s.mean = std::accumulate(circle_counts.begin(), circle_counts.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (int c : circle_counts) ss += (c - s.mean) * (c - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double half_width = boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(n));
  s.ci_low = s.mean - half_width;
  s.ci_high = s.mean + half_width;
  return s;
}

CircleCountSummary mean_optimum_circles(std::span<const SignedEgoNetwork> egos, int k) {
  std::vector<int> counts;
  for (const auto& ego : egos)
    if (ego.circles) counts.push_back(ego.circles->optimum_circles);
  return mean_optimum_circles(counts, k);
}

namespace {

std::vector<const SignedEgoNetwork*> egos_with_circles(std::span<const SignedEgoNetwork> egos, int k) {
  std::vector<const SignedEgoNetwork*> out;
  for (const auto& ego : egos)
    if (ego.circles && ego.circles->optimum_circles == k) out.push_back(&ego);
  if (out.empty()) throw NoMatchingEgos(k);
  return out;
}

}  // namespace

std::vector<double> mean_circle_sizes(std::span<const SignedEgoNetwork> egos, int k) {
  const auto matching = egos_with_circles(egos, k);
  std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
  for (const auto* ego : matching)
    for (std::size_t level = 0; level < sums.size(); ++level)
      sums[level] += static_cast<double>(ego->circles->nested_sizes[level]);
  for (auto& s : sums) s /= static_cast<double>(matching.size());
  return sums;
}

std::vector<CircleNegativityRow> per_circle_negativity(std::span<const SignedEgoNetwork> egos, int k,
                                                        CircleAveraging averaging) {
  const auto matching = egos_with_circles(egos, k);
  const auto levels = static_cast<std::size_t>(k);
  std::vector<double> negative_sum(levels, 0.0);
  std::vector<NegativityTally> pooled(levels);
  std::vector<double> percent_sum(levels, 0.0);
  std::vector<std::size_t> percent_egos(levels, 0);

  for (const auto* ego : matching) {
    std::vector<NegativityTally> per_level(levels);
    for (const auto& rel : ego->relationships) {
      if (!rel.circle_index || rel.sign == RelationshipSign::unsigned_) continue;
      // Nested: a member of cluster c belongs to every circle from c outwards.
      for (std::size_t level = *rel.circle_index; level < levels; ++level) {
        ++per_level[level].signed_total;
        if (rel.sign == RelationshipSign::negative) ++per_level[level].negative;
      }
    }
    for (std::size_t level = 0; level < levels; ++level) {
      negative_sum[level] += static_cast<double>(per_level[level].negative);
      pooled[level] += per_level[level];
      if (per_level[level].signed_total > 0) {
        percent_sum[level] += per_level[level].percentage();
        ++percent_egos[level];
      }
    }
  }

  std::vector<CircleNegativityRow> rows(levels);
  for (std::size_t level = 0; level < levels; ++level) {
    rows[level].mean_negative_count = negative_sum[level] / static_cast<double>(matching.size());
    if (averaging == CircleAveraging::pooled) {
      rows[level].percentage = pooled[level].signed_total ? pooled[level].percentage() : 0.0;
    } else {
      rows[level].percentage = percent_egos[level] ? percent_sum[level] / static_cast<double>(percent_egos[level]) : 0.0;
    }
  }
  return rows;
}

std::vector<DriftRow> compare_providers(const DatasetSigner& sign, const SentimentProvider& a,
                                        const SentimentProvider& b) {
  std::vector<DriftRow> rows;
  for (const SentimentProvider* provider : {&a, &b}) {
    const auto networks = sign(*provider);
    const auto row = full_vs_active_row(provider->name(), networks);
    rows.push_back({provider->name(), row.full, row.active, row.delta});
  }
  return rows;
}

std::string location_key(std::string_view declared_location) { return trim(fold_text(trim(declared_location))); }

LocationMap load_location_map(const std::filesystem::path& path) {
  LocationMap map;
  const auto rows = read_csv(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 3)
      throw ValidationError(path.string() + ": row " + std::to_string(i + 1) + " needs location,country,continent");
    if (i == 0 && trim(row[0]) == "location") continue;
    map[location_key(row[0])] = Place{trim(row[1]), trim(row[2])};
  }
  return map;
}

LocationTables aggregate_by_location(std::span<const EgoLocation> egos, const LocationMap& mapping,
                                     std::size_t country_min_egos) {
  std::map<std::string, LocationRow> countries, continents;
  for (const auto& ego : egos) {
    Place place{kUnknownPlace, kUnknownPlace};
    if (ego.declared_location) {
      const auto it = mapping.find(location_key(*ego.declared_location));
      if (it != mapping.end()) place = it->second;
    }
    if (place.country.empty()) place.country = kUnknownPlace;
    if (place.continent.empty()) place.continent = kUnknownPlace;
    for (auto [table, name] : {std::pair{&countries, place.country}, std::pair{&continents, place.continent}}) {
      auto& row = (*table)[name];
      row.name = name;
      ++row.egos;
      row.relationships += ego.relationships;
    }
  }

  auto ordered = [](const std::map<std::string, LocationRow>& table, std::size_t min_egos) {
    std::vector<LocationRow> rows;
    for (const auto& [name, row] : table)
      if (row.egos >= min_egos) rows.push_back(row);
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.egos > b.egos; });
    return rows;
  };
  return {ordered(countries, country_min_egos), ordered(continents, 0)};
}

DatasetReport build_dataset_report(std::string dataset, std::span<const SignedEgoNetwork> egos, int k,
                                   CircleAveraging averaging) {
  DatasetReport report;
  report.dataset = dataset;
  report.egos = egos.size();
  report.degenerate_egos =
      static_cast<std::size_t>(std::count_if(egos.begin(), egos.end(), [](const auto& e) { return !e.circles; }));
  report.negativity = full_vs_active_row(std::move(dataset), egos);
  try {
    report.circles = mean_optimum_circles(egos, k);
  } catch (const InsufficientEgos&) {
  }
  try {
    report.mean_circle_sizes = mean_circle_sizes(egos, k);
    report.per_circle = per_circle_negativity(egos, k, averaging);
  } catch (const NoMatchingEgos&) {
  }
  return report;
}

}  // namespace senm

#include "senm/circles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace senm {

double estimate_bandwidth(std::span<const double> values, double quantile) {
  const std::size_t n = values.size();
  if (n < 2) throw DegenerateInput("bandwidth needs at least two points");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ValidationError("bandwidth quantile must be in (0, 1]");

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double range = sorted.back() - sorted.front();
  if (!(range > 0.0)) throw DegenerateInput("all values are equal");

  // The epsilon keeps 0.3 * 10 from rounding up to the 4th neighbour.
  auto k = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(n - 1) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n - 1);

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Merge the left and right neighbour sequences until k have been taken.
    std::size_t left = i, right = i;
    double kth = 0.0;
    for (std::size_t taken = 0; taken < k; ++taken) {
      const double dl = left > 0 ? sorted[i] - sorted[left - 1] : INFINITY;
      const double dr = right + 1 < n ? sorted[right + 1] - sorted[i] : INFINITY;
      if (dl <= dr) {
        kth = dl;
        --left;
      } else {
        kth = dr;
        ++right;
      }
    }
    total += kth;
  }
  const double bandwidth = total / static_cast<double>(n);
  return bandwidth > 0.0 ? bandwidth : 0.1 * range;
}

MeanShiftResult mean_shift_1d(std::span<const double> values, double bandwidth, int max_iterations,
                              double convergence_factor) {
  if (!(bandwidth > 0.0)) throw ValidationError("mean shift bandwidth must be positive");
  MeanShiftResult result;
  if (values.empty()) return result;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double tolerance = convergence_factor * bandwidth;

  auto window_mean = [&](double x) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - bandwidth);
    const auto hi = std::upper_bound(lo, sorted.end(), x + bandwidth);
    const double sum = std::accumulate(lo, hi, 0.0);
    return sum / static_cast<double>(hi - lo);
  };

  // Seeds in ascending order; duplicate values converge identically.
  std::vector<double> converged;
  converged.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      converged.push_back(converged.back());
      continue;
    }
    double x = sorted[i];
    for (int iter = 0; iter < max_iterations; ++iter) {
      const double next = window_mean(x);
      const double shift = std::abs(next - x);
      x = next;
      if (shift < tolerance) break;
    }
    converged.push_back(x);
  }
  std::sort(converged.begin(), converged.end());

  // Chain converged seeds whose gap is within the bandwidth; the mode is the
  // mean of the chain.
  std::vector<double> ascending_modes;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= converged.size(); ++i) {
    if (i < converged.size() && converged[i] - converged[i - 1] <= bandwidth) continue;
    const double sum = std::accumulate(converged.begin() + static_cast<std::ptrdiff_t>(start),
                                       converged.begin() + static_cast<std::ptrdiff_t>(i), 0.0);
    ascending_modes.push_back(sum / static_cast<double>(i - start));
    start = i;
  }
  result.modes.assign(ascending_modes.rbegin(), ascending_modes.rend());

  result.assignment.reserve(values.size());
  for (double v : values) {
    // First mode in ascending order that is strictly nearer than the next
    // one; ties therefore stay with the lower mode.
    std::size_t best = 0;
    for (std::size_t m = 1; m < ascending_modes.size(); ++m)
      if (std::abs(v - ascending_modes[m]) < std::abs(v - ascending_modes[best])) best = m;
    result.assignment.push_back(ascending_modes.size() - 1 - best);
  }
  return result;
}

CircleStructure build_circles(const std::string& ego_id, std::span<const RelationshipAggregate> active,
                              const MeanShiftResult& clustering) {
  if (active.empty()) throw EmptyNetwork(ego_id);
  if (clustering.assignment.size() != active.size())
    throw ValidationError("cluster assignment does not cover the active network of ego '" + ego_id + "'");

  const std::size_t cluster_count = clustering.modes.size();
  std::vector<std::vector<double>> members(cluster_count);
  for (std::size_t i = 0; i < active.size(); ++i) {
    const std::size_t c = clustering.assignment[i];
    if (c >= cluster_count) throw ValidationError("cluster index out of range for ego '" + ego_id + "'");
    members[c].push_back(active[i].annualized_frequency);
  }
  // Sum in sorted order so the means do not depend on input order.
  std::vector<double> sums(cluster_count, 0.0);
  std::vector<std::size_t> sizes(cluster_count, 0);
  for (std::size_t c = 0; c < cluster_count; ++c) {
    std::sort(members[c].begin(), members[c].end());
    sums[c] = std::accumulate(members[c].begin(), members[c].end(), 0.0);
    sizes[c] = members[c].size();
  }

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < cluster_count; ++c)
    if (sizes[c] > 0) order.push_back(c);
  auto mean_of = [&](std::size_t c) { return sums[c] / static_cast<double>(sizes[c]); };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mean_of(a) > mean_of(b); });

  std::vector<std::size_t> remap(cluster_count, 0);
  for (std::size_t rank = 0; rank < order.size(); ++rank) remap[order[rank]] = rank;

  CircleStructure circles;
  circles.ego_id = ego_id;
  circles.optimum_circles = static_cast<int>(order.size());
  std::size_t cumulative = 0;
  for (std::size_t c : order) {
    circles.cluster_means.push_back(mean_of(c));
    cumulative += sizes[c];
    circles.nested_sizes.push_back(cumulative);
  }
  for (std::size_t i = 0; i < active.size(); ++i)
    circles.membership[active[i].alter_id] = remap[clustering.assignment[i]];
  return circles;
}

CircleStructure compute_circles(const std::string& ego_id, std::span<const RelationshipAggregate> active,
                                const MeanShiftOptions& options) {
  if (active.empty()) throw EmptyNetwork(ego_id);
  std::vector<double> values;
  values.reserve(active.size());
  for (const auto& a : active)
    values.push_back(options.log_scale ? std::log(a.annualized_frequency) : a.annualized_frequency);
  const double bandwidth = estimate_bandwidth(values, options.bandwidth_quantile);
  const auto clustering = mean_shift_1d(values, bandwidth, options.max_iterations, options.convergence_factor);
  return build_circles(ego_id, active, clustering);
}

}  // namespace senm

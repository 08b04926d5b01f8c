#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "senm/preprocessing.hpp"

namespace senm {

class DegenerateInput : public DataError {
 public:
  explicit DegenerateInput(const std::string& what) : DataError("degenerate input: " + what) {}
};

class EmptyNetwork : public DataError {
 public:
  explicit EmptyNetwork(const std::string& ego_id) : DataError("ego '" + ego_id + "' has no active alters") {}
};

struct MeanShiftOptions {
  double bandwidth_quantile = 0.28;
  int max_iterations = 500;
  double convergence_factor = 1e-6;  // stop once a seed moves less than this times the bandwidth
  bool log_scale = true;             // cluster ln(frequency) instead of raw frequency
};

/// Mean distance from each point to its ceil(quantile * (n - 1))-th nearest
/// neighbour. Falls back to a tenth of the data range when that mean is zero.
double estimate_bandwidth(std::span<const double> values, double quantile);

struct MeanShiftResult {
  std::vector<double> modes;             // strictly descending
  std::vector<std::size_t> assignment;   // per input point, index into modes
};

/// Flat-kernel mean shift seeded at every point. Converged seeds closer than
/// `bandwidth` are chained into one mode (the mean of the chain); points go to
/// the nearest mode, equidistant points to the lower one.
MeanShiftResult mean_shift_1d(std::span<const double> values, double bandwidth, int max_iterations = 500,
                              double convergence_factor = 1e-6);

/// Nested circle structure of one ego. Cluster 0 holds the most frequently
/// contacted alters; circle k is the union of clusters 0..k.
struct CircleStructure {
  std::string ego_id;
  int optimum_circles = 0;
  std::vector<double> cluster_means;  // mean annualized frequency, strictly descending
  std::map<std::string, std::size_t> membership;
  std::vector<std::size_t> nested_sizes;

  bool operator==(const CircleStructure&) const = default;
};

/// Orders clusters by mean member frequency (descending) and accumulates the
/// nested sizes. Clusters that received no alters are dropped.
CircleStructure build_circles(const std::string& ego_id, std::span<const RelationshipAggregate> active,
                              const MeanShiftResult& clustering);

/// estimate_bandwidth + mean_shift_1d + build_circles for one ego's active
/// network. Throws EmptyNetwork for no alters and DegenerateInput when fewer
/// than two alters or all frequencies coincide.
CircleStructure compute_circles(const std::string& ego_id, std::span<const RelationshipAggregate> active,
                                const MeanShiftOptions& options = {});

}  // namespace senm

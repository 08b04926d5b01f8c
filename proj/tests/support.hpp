#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "senm/analysis.hpp"
#include "senm/circles.hpp"
#include "senm/ingestion.hpp"
#include "senm/preprocessing.hpp"
#include "senm/signing.hpp"

namespace senm::test {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("senm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline constexpr Timestamp kJan2021 = 1609459200;  // 2021-01-01T00:00:00Z

inline InteractionRecord record(const std::string& ego, std::vector<std::string> alters, Timestamp ts,
                                std::optional<Sentiment> sentiment = std::nullopt,
                                std::optional<std::string> text = std::nullopt) {
  InteractionRecord r;
  r.ego_id = ego;
  r.alter_ids = std::move(alters);
  r.timestamp = ts;
  r.sentiment = sentiment;
  r.text = std::move(text);
  return r;
}

/// Timeline with `first_activity`/`last_activity` derived from its contents.
inline EgoTimeline timeline(const std::string& ego, std::vector<InteractionRecord> records,
                            std::vector<Timestamp> posts = {}) {
  EgoTimeline t;
  t.ego_id = ego;
  t.records = std::move(records);
  t.noncommunicative_posts = std::move(posts);
  Timestamp lo = INT64_MAX, hi = INT64_MIN;
  for (const auto& r : t.records) lo = std::min(lo, r.timestamp), hi = std::max(hi, r.timestamp);
  for (auto ts : t.noncommunicative_posts) lo = std::min(lo, ts), hi = std::max(hi, ts);
  t.first_activity = lo;
  t.last_activity = hi;
  return t;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -100.0, double hi = 100.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// In-memory version of the stages after ingestion: aggregate, split,
/// cluster (degenerate egos keep no circles) and sign.
inline std::vector<SignedEgoNetwork> sign_dataset(const std::vector<EgoTimeline>& timelines,
                                                  const SentimentProvider& provider,
                                                  const MeanShiftOptions& options = {}) {
  std::vector<SignedEgoNetwork> out;
  out.reserve(timelines.size());
  for (const auto& t : timelines) {
    UnsignedEgoNetwork net;
    net.ego_id = t.ego_id;
    auto split = split_full_active(aggregate_relationships(t));
    net.full = std::move(split.full);
    net.active = std::move(split.active);
    try {
      net.circles = compute_circles(t.ego_id, net.active, options);
    } catch (const DataError&) {
    }
    out.push_back(sign_ego_network(t, net, provider));
  }
  return out;
}

}  // namespace senm::test

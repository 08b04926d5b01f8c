#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace senm {

/// UTC seconds since the Unix epoch.
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;
/// Julian year; annualized frequencies are expressed per this many seconds.
inline constexpr double kSecondsPerYear = 365.25 * 86400.0;

/// Months since January 1970 for the calendar month (UTC) containing `ts`.
std::int64_t month_index(Timestamp ts);

/// Stateless 64-bit mixer (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_string(std::string_view s);

// Minimal RFC 4180 CSV support: quoted fields, doubled quotes, CRLF tolerant.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);
/// Reads a CSV file; lines starting with '#' and blank lines are skipped.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string trim(std::string_view s);
std::string format_fixed(double value, int decimals);

/// Runs `fn(i)` for every i in [0, n) on up to `jobs` threads. The first
/// exception thrown by any task is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    const std::size_t count = std::min<std::size_t>(jobs, n);
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace senm

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "senm/error.hpp"
#include "senm/util.hpp"

namespace senm {

enum class InteractionKind { reply, mention, quote };
enum class Sentiment { positive, neutral, negative };

std::string_view to_string(InteractionKind kind);
std::string_view to_string(Sentiment sentiment);
std::optional<InteractionKind> parse_interaction_kind(std::string_view s);
std::optional<Sentiment> parse_sentiment(std::string_view s);

/// One directed, timestamped communication from an ego to one or more alters.
struct InteractionRecord {
  std::string ego_id;
  std::vector<std::string> alter_ids;  // non-empty, unique, never the ego
  Timestamp timestamp = 0;
  InteractionKind kind = InteractionKind::reply;
  std::optional<std::string> text;
  std::optional<std::string> lang;
  std::optional<Sentiment> sentiment;  // precomputed label, if any
  std::vector<std::string> hashtags;

  bool has_text() const { return text && !text->empty(); }

  bool operator==(const InteractionRecord&) const = default;
};

/// Everything authored by one ego. Non-communicative posts keep only their
/// timestamps, which the activity filters need for month bucketing.
struct EgoTimeline {
  std::string ego_id;
  std::vector<InteractionRecord> records;      // ascending by timestamp
  std::vector<Timestamp> noncommunicative_posts;  // ascending
  std::optional<std::string> declared_location;
  Timestamp first_activity = 0;
  Timestamp last_activity = 0;

  std::size_t noncommunicative_post_count() const { return noncommunicative_posts.size(); }
  std::size_t total_posts() const { return records.size() + noncommunicative_posts.size(); }

  bool operator==(const EgoTimeline&) const = default;
};

class MalformedRecord : public DataError {
 public:
  MalformedRecord(std::size_t line_no, const std::string& detail)
      : DataError("malformed record at line " + std::to_string(line_no) + ": " + detail),
        line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class EmptyTimeline : public DataError {
 public:
  explicit EmptyTimeline(const std::string& ego_id)
      : DataError("timeline for ego '" + ego_id + "' has no records") {}
};

struct ParseDiagnostics {
  std::size_t unknown_kinds = 0;
  std::size_t duplicates_removed = 0;
  std::size_t self_addressed_dropped = 0;  // ego listed among its own alters

  ParseDiagnostics& operator+=(const ParseDiagnostics& o) {
    unknown_kinds += o.unknown_kinds;
    duplicates_removed += o.duplicates_removed;
    self_addressed_dropped += o.self_addressed_dropped;
    return *this;
  }
};

/// Parses one line-delimited timeline. Blank lines are ignored; line numbers
/// in errors are 1-based physical lines.
EgoTimeline parse_timeline(std::istream& in, std::string_view ego_id,
                           ParseDiagnostics* diagnostics = nullptr);
EgoTimeline parse_timeline(std::string_view content, std::string_view ego_id,
                           ParseDiagnostics* diagnostics = nullptr);

/// Writes the timeline back in the line-delimited file format; parsing the
/// result reproduces an identical EgoTimeline.
void write_timeline(std::ostream& out, const EgoTimeline& timeline);
std::string serialize_timeline(const EgoTimeline& timeline);

/// Tokens following '#' up to the next non-word character, casing kept.
std::vector<std::string> extract_hashtags(std::string_view text);

struct DatasetEntry {
  std::string name;
  std::filesystem::path directory;
};

/// Reads a `dataset,directory` CSV; relative directories resolve against the
/// manifest's own directory.
std::vector<DatasetEntry> read_dataset_manifest(const std::filesystem::path& path);
void write_dataset_manifest(const std::filesystem::path& path,
                            const std::vector<DatasetEntry>& entries);

struct LoadedDataset {
  std::string name;
  std::vector<EgoTimeline> timelines;  // ordered by ego_id
  ParseDiagnostics diagnostics;
};

/// Loads every `<ego_id>.jsonl` file in `directory`.
LoadedDataset load_dataset(const DatasetEntry& entry, unsigned jobs = 1);

}  // namespace senm

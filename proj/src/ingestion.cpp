#include "senm/ingestion.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <istream>
#include <limits>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace senm {

using nlohmann::json;

std::string_view to_string(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::reply: return "reply";
    case InteractionKind::mention: return "mention";
    case InteractionKind::quote: return "quote";
  }
  return "reply";
}

std::string_view to_string(Sentiment sentiment) {
  switch (sentiment) {
    case Sentiment::positive: return "positive";
    case Sentiment::neutral: return "neutral";
    case Sentiment::negative: return "negative";
  }
  return "neutral";
}

std::optional<InteractionKind> parse_interaction_kind(std::string_view s) {
  if (s == "reply") return InteractionKind::reply;
  if (s == "mention") return InteractionKind::mention;
  if (s == "quote") return InteractionKind::quote;
  return std::nullopt;
}

std::optional<Sentiment> parse_sentiment(std::string_view s) {
  if (s == "positive") return Sentiment::positive;
  if (s == "neutral") return Sentiment::neutral;
  if (s == "negative") return Sentiment::negative;
  return std::nullopt;
}

namespace {

bool is_word_char(UChar32 c) {
  const int8_t type = u_charType(c);
  switch (type) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
    case U_NON_SPACING_MARK:
    case U_COMBINING_SPACING_MARK:
    case U_ENCLOSING_MARK:
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
    case U_CONNECTOR_PUNCTUATION:
      return true;
    default:
      return false;
  }
}

auto sort_key(const InteractionRecord& r) {
  return std::tie(r.timestamp, r.kind, r.alter_ids, r.text, r.lang, r.sentiment, r.hashtags);
}

bool same_interaction(const InteractionRecord& a, const InteractionRecord& b) {
  return a.ego_id == b.ego_id && a.timestamp == b.timestamp && a.kind == b.kind &&
         a.alter_ids == b.alter_ids && a.text == b.text;
}

std::optional<std::string> optional_string(const json& obj, const char* key, std::size_t line_no) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw MalformedRecord(line_no, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& value, const char* key, std::size_t line_no) {
  if (!value.is_array()) throw MalformedRecord(line_no, std::string("field '") + key + "' must be an array");
  std::vector<std::string> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_string()) throw MalformedRecord(line_no, std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

struct LocationCandidate {
  Timestamp ts;
  std::string value;
};

}  // namespace

std::vector<std::string> extract_hashtags(std::string_view text) {
  std::vector<std::string> tags;
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c != '#' && c != 0xFF03) continue;  // '#' or fullwidth number sign
    const int32_t start = i;
    int32_t end = i;
    while (end < length) {
      int32_t probe = end;
      UChar32 next;
      U8_NEXT(bytes, probe, length, next);
      if (next < 0 || !is_word_char(next)) break;
      end = probe;
    }
    if (end > start) tags.emplace_back(text.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(end - start)));
    i = end;
  }
  return tags;
}

EgoTimeline parse_timeline(std::istream& in, std::string_view ego_id, ParseDiagnostics* diagnostics) {
  EgoTimeline timeline;
  timeline.ego_id = std::string(ego_id);
  ParseDiagnostics diag;
  std::optional<LocationCandidate> location;
  bool any_line = false;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    any_line = true;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedRecord(line_no, "not valid JSON");
    }
    if (!obj.is_object()) throw MalformedRecord(line_no, "record is not an object");

    const auto ego_it = obj.find("ego_id");
    if (ego_it == obj.end() || !ego_it->is_string()) throw MalformedRecord(line_no, "missing ego_id");
    if (ego_it->get_ref<const std::string&>() != ego_id)
      throw MalformedRecord(line_no, "ego_id '" + ego_it->get<std::string>() + "' does not match timeline");

    const auto ts_it = obj.find("ts");
    if (ts_it == obj.end() || !ts_it->is_number_integer()) throw MalformedRecord(line_no, "missing or non-integer ts");
    const Timestamp ts = ts_it->get<Timestamp>();
    if (ts <= 0) throw MalformedRecord(line_no, "ts must be positive");

    if (auto loc = optional_string(obj, "declared_location", line_no); loc && !loc->empty()) {
      if (!location || std::tie(ts, *loc) > std::tie(location->ts, location->value))
        location = LocationCandidate{ts, std::move(*loc)};
    }

    bool noncommunicative = false;
    if (const auto it = obj.find("noncommunicative"); it != obj.end() && !it->is_null()) {
      if (!it->is_boolean()) throw MalformedRecord(line_no, "noncommunicative must be boolean");
      noncommunicative = it->get<bool>();
    }
    if (noncommunicative) {
      timeline.noncommunicative_posts.push_back(ts);
      continue;
    }

    const auto kind_it = obj.find("kind");
    if (kind_it == obj.end() || !kind_it->is_string()) throw MalformedRecord(line_no, "missing kind");
    const auto kind = parse_interaction_kind(kind_it->get_ref<const std::string&>());
    if (!kind) {
      ++diag.unknown_kinds;
      continue;
    }

    const auto alters_it = obj.find("alter_ids");
    if (alters_it == obj.end()) throw MalformedRecord(line_no, "missing alter_ids");
    std::vector<std::string> raw_alters = string_list(*alters_it, "alter_ids", line_no);

    InteractionRecord record;
    record.ego_id = timeline.ego_id;
    record.timestamp = ts;
    record.kind = *kind;
    for (auto& alter : raw_alters) {
      if (alter.empty()) throw MalformedRecord(line_no, "empty alter id");
      if (alter == record.ego_id) {
        ++diag.self_addressed_dropped;
        continue;
      }
      if (std::find(record.alter_ids.begin(), record.alter_ids.end(), alter) == record.alter_ids.end())
        record.alter_ids.push_back(std::move(alter));
    }
    if (record.alter_ids.empty()) {
      if (raw_alters.empty()) throw MalformedRecord(line_no, "alter_ids is empty");
      // Only addressed to the ego itself: an ordinary post.
      timeline.noncommunicative_posts.push_back(ts);
      continue;
    }

    record.text = optional_string(obj, "text", line_no);
    record.lang = optional_string(obj, "lang", line_no);
    if (auto s = optional_string(obj, "sentiment", line_no)) {
      record.sentiment = parse_sentiment(*s);
      if (!record.sentiment) throw MalformedRecord(line_no, "unknown sentiment '" + *s + "'");
    }
    if (const auto it = obj.find("hashtags"); it != obj.end() && !it->is_null()) {
      record.hashtags = string_list(*it, "hashtags", line_no);
    } else if (record.text) {
      record.hashtags = extract_hashtags(*record.text);
    }
    timeline.records.push_back(std::move(record));
  }

  if (!any_line || (timeline.records.empty() && timeline.noncommunicative_posts.empty()))
    throw EmptyTimeline(timeline.ego_id);

  std::sort(timeline.records.begin(), timeline.records.end(),
            [](const auto& a, const auto& b) { return sort_key(a) < sort_key(b); });
  const auto unique_end = std::unique(timeline.records.begin(), timeline.records.end(), same_interaction);
  diag.duplicates_removed += static_cast<std::size_t>(timeline.records.end() - unique_end);
  timeline.records.erase(unique_end, timeline.records.end());
  std::sort(timeline.noncommunicative_posts.begin(), timeline.noncommunicative_posts.end());

  Timestamp first = std::numeric_limits<Timestamp>::max();
  Timestamp last = std::numeric_limits<Timestamp>::min();
  if (!timeline.records.empty()) {
    first = std::min(first, timeline.records.front().timestamp);
    last = std::max(last, timeline.records.back().timestamp);
  }
  if (!timeline.noncommunicative_posts.empty()) {
    first = std::min(first, timeline.noncommunicative_posts.front());
    last = std::max(last, timeline.noncommunicative_posts.back());
  }
  timeline.first_activity = first;
  timeline.last_activity = last;
  if (location) timeline.declared_location = std::move(location->value);

  if (diagnostics) *diagnostics += diag;
  return timeline;
}

EgoTimeline parse_timeline(std::string_view content, std::string_view ego_id, ParseDiagnostics* diagnostics) {
  std::istringstream in{std::string(content)};
  return parse_timeline(in, ego_id, diagnostics);
}

void write_timeline(std::ostream& out, const EgoTimeline& timeline) {
  // The declared location rides on the chronologically last line.
  const bool last_is_record =
      !timeline.records.empty() &&
      (timeline.noncommunicative_posts.empty() ||
       timeline.records.back().timestamp > timeline.noncommunicative_posts.back());

  for (std::size_t i = 0; i < timeline.records.size(); ++i) {
    const auto& r = timeline.records[i];
    json obj;
    obj["ego_id"] = r.ego_id;
    obj["ts"] = r.timestamp;
    obj["kind"] = to_string(r.kind);
    obj["alter_ids"] = r.alter_ids;
    if (r.text) obj["text"] = *r.text;
    if (r.lang) obj["lang"] = *r.lang;
    if (r.sentiment) obj["sentiment"] = to_string(*r.sentiment);
    obj["hashtags"] = r.hashtags;
    if (last_is_record && i + 1 == timeline.records.size() && timeline.declared_location)
      obj["declared_location"] = *timeline.declared_location;
    out << obj.dump() << '\n';
  }
  for (std::size_t i = 0; i < timeline.noncommunicative_posts.size(); ++i) {
    json obj;
    obj["ego_id"] = timeline.ego_id;
    obj["ts"] = timeline.noncommunicative_posts[i];
    obj["noncommunicative"] = true;
    if (!last_is_record && i + 1 == timeline.noncommunicative_posts.size() && timeline.declared_location)
      obj["declared_location"] = *timeline.declared_location;
    out << obj.dump() << '\n';
  }
}

std::string serialize_timeline(const EgoTimeline& timeline) {
  std::ostringstream out;
  write_timeline(out, timeline);
  return out.str();
}

std::vector<DatasetEntry> read_dataset_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("dataset manifest not found: " + path.string());
  const auto rows = read_csv(path);
  std::vector<DatasetEntry> entries;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (i == 0 && !row.empty() && trim(row[0]) == "dataset") continue;
    if (row.size() < 2) throw ValidationError("dataset manifest row " + std::to_string(i + 1) + " needs dataset,directory");
    std::filesystem::path dir = trim(row[1]);
    if (dir.is_relative()) dir = path.parent_path() / dir;
    entries.push_back({trim(row[0]), dir.lexically_normal()});
  }
  if (entries.empty()) throw ValidationError("dataset manifest lists no datasets: " + path.string());
  return entries;
}

void write_dataset_manifest(const std::filesystem::path& path, const std::vector<DatasetEntry>& entries) {
  std::string out = "dataset,directory\n";
  for (const auto& e : entries) {
    auto dir = e.directory;
    if (dir.is_absolute() && path.has_parent_path()) dir = std::filesystem::relative(dir, path.parent_path());
    out += csv_escape(e.name) + "," + csv_escape(dir.generic_string()) + "\n";
  }
  write_file(path, out);
}

LoadedDataset load_dataset(const DatasetEntry& entry, unsigned jobs) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(entry.directory))
    throw ValidationError("dataset '" + entry.name + "' directory not found: " + entry.directory.string());

  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(entry.directory))
    if (f.is_regular_file() && f.path().extension() == ".jsonl") files.push_back(f.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });

  LoadedDataset dataset;
  dataset.name = entry.name;
  dataset.timelines.resize(files.size());
  std::vector<ParseDiagnostics> diags(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    try {
      dataset.timelines[i] = parse_timeline(read_file(files[i]), files[i].stem().string(), &diags[i]);
    } catch (const DataError& e) {
      throw DataError(files[i].string() + ": " + e.what());
    }
  });
  for (const auto& d : diags) dataset.diagnostics += d;
  return dataset;
}

}  // namespace senm

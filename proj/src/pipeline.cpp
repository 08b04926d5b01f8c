#include "senm/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "senm/simgen.hpp"
#include "senm/topics.hpp"

namespace senm {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef SENM_DATA_DIR
#define SENM_DATA_DIR "data"
#endif

fs::path default_data_dir() {
  if (const char* env = std::getenv("SENM_DATA_DIR"); env && *env) return env;
  return SENM_DATA_DIR;
}

// ---------------------------------------------------------------------------
// configuration

namespace {

template <class T>
void take(const json& obj, const char* key, T& target) {
  if (const auto it = obj.find(key); it != obj.end() && !it->is_null()) target = it->get<T>();
}

void take_path(const json& obj, const char* key, const fs::path& base, std::optional<fs::path>& target) {
  if (const auto it = obj.find(key); it != obj.end() && !it->is_null()) {
    fs::path p = it->get<std::string>();
    target = p.is_relative() ? base / p : p;
  }
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = std::min(s.find(',', start), s.size());
    std::string item = trim(s.substr(start, comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = comma + 1;
  }
  return out;
}

bool valid_dataset_name(std::string_view name) {
  if (name.empty() || name == "." || name == "..") return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

void apply_config_file(const fs::path& path, PipelineConfig& c) {
  if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
  const fs::path base = path.parent_path();
  try {
    const json root = json::parse(read_file(path));
    if (!root.is_object()) throw ValidationError("config must be a JSON object");
    if (root.contains("data")) c.data = base / root["data"].get<std::string>();
    if (root.contains("out")) c.out = base / root["out"].get<std::string>();
    take(root, "datasets", c.datasets);
    take(root, "provider", c.provider);
    if (root.contains("compare_provider") && !root["compare_provider"].is_null())
      c.compare_provider = root["compare_provider"].get<std::string>();
    take_path(root, "sidecar", base, c.sidecar_dir);
    take_path(root, "lexicon", base, c.lexicon);
    take(root, "lexicon_threshold", c.lexicon_threshold);
    take(root, "shift_probability", c.shift_probability);
    take(root, "sign_threshold", c.sign_threshold);
    take(root, "min_posts", c.activity.min_posts);
    take(root, "min_span_days", c.activity.min_span_days);
    take(root, "min_posts_per_month", c.activity.min_posts_per_month);
    take(root, "max_sparse_month_fraction", c.activity.max_sparse_month_fraction);
    take(root, "active_min_frequency", c.activity.active_min_frequency);
    take(root, "max_posts_per_day", c.classifier.max_posts_per_day);
    take(root, "min_interaction_ratio", c.classifier.min_interaction_ratio);
    take_path(root, "ego_labels", base, c.ego_labels);
    take(root, "bandwidth_quantile", c.mean_shift.bandwidth_quantile);
    take(root, "max_iterations", c.mean_shift.max_iterations);
    take(root, "convergence_factor", c.mean_shift.convergence_factor);
    take(root, "log_scale", c.mean_shift.log_scale);
    take(root, "circles_filter", c.circles_filter);
    if (root.contains("per_ego_averaging") && root["per_ego_averaging"].get<bool>())
      c.averaging = CircleAveraging::per_ego;
    if (root.contains("tables")) {
      c.tables.clear();
      for (const auto& t : root["tables"]) c.tables.insert(t.is_string() ? t.get<std::string>() : t.dump());
    }
    take_path(root, "labelmap", base, c.labelmap);
    take_path(root, "locations", base, c.locations);
    take_path(root, "stopwords", base, c.stopwords_dir);
    take(root, "country_min_egos", c.country_min_egos);
    take(root, "top_k", c.top_k);
    take(root, "seed", c.seed);
    take(root, "jobs", c.jobs);
  } catch (const json::exception& e) {
    throw ValidationError("invalid config " + path.string() + ": " + e.what());
  }
}

void validate(const PipelineConfig& c) {
  auto known_provider = [](const std::string& p) { return p == "precomputed" || p == "lexicon"; };
  if (!known_provider(c.provider)) throw ValidationError("unknown provider '" + c.provider + "'");
  if (c.compare_provider && !known_provider(*c.compare_provider) && *c.compare_provider != "shifted")
    throw ValidationError("unknown comparison provider '" + *c.compare_provider + "'");
  if (c.compare_provider && *c.compare_provider == c.provider)
    throw ValidationError("comparison provider must differ from the primary provider");
  if (!(c.sign_threshold > 0.0 && c.sign_threshold < 1.0)) throw ValidationError("sign threshold must be in (0, 1)");
  if (!(c.lexicon_threshold >= 0.0)) throw ValidationError("lexicon threshold must be non-negative");
  if (!(c.shift_probability >= 0.0 && c.shift_probability <= 1.0))
    throw ValidationError("shift probability must be in [0, 1]");
  if (!(c.mean_shift.bandwidth_quantile > 0.0 && c.mean_shift.bandwidth_quantile <= 1.0))
    throw ValidationError("bandwidth quantile must be in (0, 1]");
  if (c.mean_shift.max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (!(c.mean_shift.convergence_factor > 0.0)) throw ValidationError("convergence_factor must be positive");
  if (c.circles_filter < 1) throw ValidationError("circles filter must be at least 1");
  if (!(c.activity.min_span_days >= 0.0)) throw ValidationError("min_span_days must be non-negative");
  if (!(c.activity.max_sparse_month_fraction >= 0.0 && c.activity.max_sparse_month_fraction <= 1.0))
    throw ValidationError("max_sparse_month_fraction must be in [0, 1]");
  if (!(c.activity.active_min_frequency > 0.0)) throw ValidationError("active_min_frequency must be positive");
  if (!(c.classifier.max_posts_per_day > 0.0)) throw ValidationError("max_posts_per_day must be positive");
  if (!(c.classifier.min_interaction_ratio >= 0.0 && c.classifier.min_interaction_ratio <= 1.0))
    throw ValidationError("min_interaction_ratio must be in [0, 1]");
  if (c.top_k == 0) throw ValidationError("top_k must be positive");
  if (c.jobs == 0) throw ValidationError("jobs must be at least 1");
  static const std::set<std::string> known_tables = {"2", "3", "4", "5", "6", "7", "locations"};
  for (const auto& t : c.tables)
    if (!known_tables.contains(t)) throw ValidationError("unknown table '" + t + "'");
  for (const auto& d : c.datasets)
    if (!valid_dataset_name(d)) throw ValidationError("invalid dataset name '" + d + "'");
  if (c.out.empty()) throw ValidationError("an output directory is required (--out)");
}

// ---------------------------------------------------------------------------
// stage files: one JSON header line, then one JSON object per line

namespace {

constexpr int kStageVersion = 1;

struct StageFile {
  json header;
  std::vector<json> rows;
};

json stage_header(const std::string& format, const std::string& dataset) {
  return {{"format", "senm." + format}, {"version", kStageVersion}, {"dataset", dataset}};
}

void write_stage(const fs::path& path, const json& header, const std::vector<std::string>& rows) {
  std::string content = header.dump() + "\n";
  for (const auto& r : rows) content += r + "\n";
  write_file(path, content);
}

StageFile read_stage(const fs::path& path, const std::string& format, const char* producer) {
  if (!fs::exists(path))
    throw ValidationError("missing " + path.string() + "; run the '" + producer + "' stage first");
  std::ifstream in(path);
  StageFile file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json value;
    try {
      value = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (file.header.is_null()) {
      if (value.value("format", "") != "senm." + format || value.value("version", 0) != kStageVersion)
        throw DataError(path.string() + ": expected a senm." + format + " v" + std::to_string(kStageVersion) +
                        " file");
      file.header = std::move(value);
    } else {
      file.rows.push_back(std::move(value));
    }
  }
  if (file.header.is_null()) throw DataError(path.string() + ": empty stage file");
  return file;
}

template <class Fn>
void in_stage(const std::string& stage, Fn&& fn) {
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const json::exception& e) {
    throw StageError(stage, DataError(e.what()));
  } catch (const fs::filesystem_error& e) {
    throw StageError(stage, ValidationError(e.what()));
  }
}

fs::path stage_dir(const PipelineConfig& c, const char* stage) { return c.out / stage; }

fs::path manifest_path(const PipelineConfig& c) {
  if (c.data.empty()) throw ValidationError("a data location is required (--data)");
  return fs::is_directory(c.data) ? c.data / "datasets.csv" : c.data;
}

fs::path data_root(const PipelineConfig& c) {
  if (c.data.empty()) return {};
  return fs::is_directory(c.data) ? c.data : c.data.parent_path();
}

/// Datasets recorded by the ingest stage, narrowed by --datasets.
std::vector<std::string> ingested_datasets(const PipelineConfig& c) {
  const auto index = read_stage(stage_dir(c, "ingest") / "datasets.jsonl", "datasets", "ingest");
  std::vector<std::string> names;
  for (const auto& row : index.rows) names.push_back(row.at("dataset").get<std::string>());
  if (c.datasets.empty()) return names;
  for (const auto& wanted : c.datasets)
    if (std::find(names.begin(), names.end(), wanted) == names.end())
      throw ValidationError("dataset '" + wanted + "' was not ingested");
  std::vector<std::string> selected;
  for (const auto& n : names)
    if (std::find(c.datasets.begin(), c.datasets.end(), n) != c.datasets.end()) selected.push_back(n);
  return selected;
}

// -- ingest rows ------------------------------------------------------------

// Records are stored as [ts, kind, alters, text, lang, sentiment, hashtags]
// arrays; absent optionals are null.
std::string ingest_row(const EgoTimeline& t) {
  json records = json::array();
  for (const auto& r : t.records) {
    json rec = json::array({r.timestamp, to_string(r.kind), r.alter_ids, nullptr, nullptr, nullptr, r.hashtags});
    if (r.text) rec[3] = *r.text;
    if (r.lang) rec[4] = *r.lang;
    if (r.sentiment) rec[5] = to_string(*r.sentiment);
    records.push_back(std::move(rec));
  }
  json row{{"ego_id", t.ego_id},
           {"first_activity", t.first_activity},
           {"last_activity", t.last_activity},
           {"posts", t.noncommunicative_posts},
           {"records", std::move(records)}};
  if (t.declared_location) row["declared_location"] = *t.declared_location;
  return row.dump();
}

EgoTimeline timeline_from(const json& row) {
  EgoTimeline t;
  t.ego_id = row.at("ego_id").get<std::string>();
  t.first_activity = row.at("first_activity").get<Timestamp>();
  t.last_activity = row.at("last_activity").get<Timestamp>();
  t.noncommunicative_posts = row.at("posts").get<std::vector<Timestamp>>();
  if (const auto it = row.find("declared_location"); it != row.end()) t.declared_location = it->get<std::string>();
  for (const auto& rec : row.at("records")) {
    if (!rec.is_array() || rec.size() != 7) throw DataError("ego '" + t.ego_id + "': malformed stored record");
    InteractionRecord r;
    r.ego_id = t.ego_id;
    r.timestamp = rec[0].get<Timestamp>();
    const auto kind = parse_interaction_kind(rec[1].get<std::string>());
    if (!kind) throw DataError("ego '" + t.ego_id + "': unknown stored kind");
    r.kind = *kind;
    r.alter_ids = rec[2].get<std::vector<std::string>>();
    if (!rec[3].is_null()) r.text = rec[3].get<std::string>();
    if (!rec[4].is_null()) r.lang = rec[4].get<std::string>();
    if (!rec[5].is_null()) {
      const auto label = parse_sentiment(rec[5].get<std::string>());
      if (!label) throw DataError("ego '" + t.ego_id + "': unknown stored sentiment");
      r.sentiment = *label;
    }
    r.hashtags = rec[6].get<std::vector<std::string>>();
    t.records.push_back(std::move(r));
  }
  return t;
}

std::vector<EgoTimeline> read_ingest(const PipelineConfig& c, const std::string& dataset) {
  const auto file = read_stage(stage_dir(c, "ingest") / (dataset + ".jsonl"), "ingest", "ingest");
  std::vector<EgoTimeline> timelines(file.rows.size());
  parallel_for(file.rows.size(), c.jobs, [&](std::size_t i) { timelines[i] = timeline_from(file.rows[i]); });
  return timelines;
}

// -- preprocess rows --------------------------------------------------------

json aggregate_json(const RelationshipAggregate& a) {
  return {{"alter_id", a.alter_id},       {"interactions", a.interaction_count}, {"first_ts", a.first_ts},
          {"last_ts", a.last_ts},         {"frequency", a.annualized_frequency}, {"text_interactions", a.text_interactions}};
}

RelationshipAggregate aggregate_from(const json& j, const std::string& ego_id) {
  RelationshipAggregate a;
  a.ego_id = ego_id;
  a.alter_id = j.at("alter_id").get<std::string>();
  a.interaction_count = j.at("interactions").get<std::size_t>();
  a.first_ts = j.at("first_ts").get<Timestamp>();
  a.last_ts = j.at("last_ts").get<Timestamp>();
  a.annualized_frequency = j.at("frequency").get<double>();
  a.text_interactions = j.at("text_interactions").get<std::size_t>();
  return a;
}

struct PreprocessedEgo {
  std::string ego_id;
  bool kept = false;
  std::vector<std::string> reasons;
  std::optional<std::string> declared_location;
  NetworkSplit split;
};

std::vector<PreprocessedEgo> read_preprocess(const PipelineConfig& c, const std::string& dataset) {
  const auto file = read_stage(stage_dir(c, "preprocess") / (dataset + ".jsonl"), "preprocess", "preprocess");
  std::vector<PreprocessedEgo> egos;
  for (const auto& row : file.rows) {
    PreprocessedEgo e;
    e.ego_id = row.at("ego_id").get<std::string>();
    e.kept = row.at("kept").get<bool>();
    e.reasons = row.at("reasons").get<std::vector<std::string>>();
    if (row.contains("declared_location")) e.declared_location = row["declared_location"].get<std::string>();
    std::set<std::string> active;
    for (const auto& a : row.at("active")) active.insert(a.get<std::string>());
    for (const auto& a : row.at("full")) {
      auto agg = aggregate_from(a, e.ego_id);
      if (active.contains(agg.alter_id)) e.split.active.push_back(agg);
      e.split.full.push_back(std::move(agg));
    }
    egos.push_back(std::move(e));
  }
  return egos;
}

// -- circle rows ------------------------------------------------------------

json circles_json(const std::optional<CircleStructure>& circles) {
  if (!circles) return nullptr;
  return {{"optimum_circles", circles->optimum_circles},
          {"cluster_means", circles->cluster_means},
          {"membership", circles->membership},
          {"nested_sizes", circles->nested_sizes}};
}

std::optional<CircleStructure> circles_from(const json& j, const std::string& ego_id) {
  if (j.is_null()) return std::nullopt;
  CircleStructure s;
  s.ego_id = ego_id;
  s.optimum_circles = j.at("optimum_circles").get<int>();
  s.cluster_means = j.at("cluster_means").get<std::vector<double>>();
  s.membership = j.at("membership").get<std::map<std::string, std::size_t>>();
  s.nested_sizes = j.at("nested_sizes").get<std::vector<std::size_t>>();
  return s;
}

// -- sign rows --------------------------------------------------------------

std::string signed_row(const SignedEgoNetwork& n) {
  std::set<std::string_view> active;
  for (const auto& r : n.relationships) active.insert(r.alter_id);
  json rels = json::array();
  for (const auto& r : n.full_relationships) {
    json j{{"alter_id", r.alter_id},
           {"labeled", r.labeled_count},
           {"negative", r.negative_count},
           {"sign", to_string(r.sign)},
           {"active", active.contains(r.alter_id)}};
    rels.push_back(std::move(j));
  }
  return json{{"ego_id", n.ego_id}, {"circles", circles_json(n.circles)}, {"relationships", std::move(rels)}}.dump();
}

RelationshipSign parse_sign(const std::string& s) {
  if (s == "positive") return RelationshipSign::positive;
  if (s == "negative") return RelationshipSign::negative;
  if (s == "unsigned") return RelationshipSign::unsigned_;
  throw DataError("unknown relationship sign '" + s + "'");
}

std::vector<SignedEgoNetwork> read_signed(const PipelineConfig& c, const std::string& dataset,
                                          const std::string& provider_key) {
  const auto file =
      read_stage(stage_dir(c, "sign") / (dataset + "." + provider_key + ".jsonl"), "sign", "sign");
  std::vector<SignedEgoNetwork> networks;
  for (const auto& row : file.rows) {
    SignedEgoNetwork n;
    n.ego_id = row.at("ego_id").get<std::string>();
    n.circles = circles_from(row.at("circles"), n.ego_id);
    for (const auto& r : row.at("relationships")) {
      SignedRelationship rel{n.ego_id,
                             r.at("alter_id").get<std::string>(),
                             r.at("labeled").get<std::size_t>(),
                             r.at("negative").get<std::size_t>(),
                             parse_sign(r.at("sign").get<std::string>()),
                             std::nullopt};
      if (n.circles) {
        const auto it = n.circles->membership.find(rel.alter_id);
        if (it != n.circles->membership.end()) rel.circle_index = it->second;
      }
      if (r.at("active").get<bool>()) n.relationships.push_back(rel);
      n.full_relationships.push_back(std::move(rel));
    }
    networks.push_back(std::move(n));
  }
  return networks;
}

// -- providers --------------------------------------------------------------

fs::path lexicon_path(const PipelineConfig& c) { return c.lexicon ? *c.lexicon : default_data_dir() / "lexicon"; }

/// Fails early when a provider's input files are missing.
void check_providers(const PipelineConfig& c) {
  std::vector<std::string> used{c.provider};
  if (c.compare_provider) used.push_back(*c.compare_provider);
  for (const auto& p : used) {
    if (p == "lexicon" && !fs::exists(lexicon_path(c)))
      throw ValidationError("lexicon not found: " + lexicon_path(c).string());
    if (p == "precomputed" && c.sidecar_dir && !fs::is_directory(*c.sidecar_dir))
      throw ValidationError("sentiment sidecar directory not found: " + c.sidecar_dir->string());
  }
}

std::shared_ptr<const SentimentProvider> make_provider(const PipelineConfig& c, const std::string& name,
                                                       const std::string& dataset,
                                                       std::shared_ptr<const SentimentProvider> primary) {
  if (name == "lexicon") return std::make_shared<LexiconProvider>(LexiconProvider::from_path(lexicon_path(c), c.lexicon_threshold));
  if (name == "shifted") return std::make_shared<ShiftedProvider>(std::move(primary), c.shift_probability, c.seed);
  if (c.sidecar_dir) {
    const fs::path sidecar = *c.sidecar_dir / (dataset + ".csv");
    if (fs::exists(sidecar)) return std::make_shared<PrecomputedProvider>(PrecomputedProvider::from_sidecar(sidecar));
  }
  return std::make_shared<PrecomputedProvider>();
}

std::string fixed(double v, int decimals = 2) { return format_fixed(v, decimals); }

bool wants_table(const PipelineConfig& c, const std::string& table) { return c.tables.empty() || c.tables.contains(table); }

}  // namespace

// ---------------------------------------------------------------------------
// stages

void run_ingest(const PipelineConfig& c) {
  in_stage("ingest", [&] {
    validate(c);
    auto entries = read_dataset_manifest(manifest_path(c));
    for (const auto& e : entries)
      if (!valid_dataset_name(e.name)) throw ValidationError("invalid dataset name '" + e.name + "' in manifest");
    if (!c.datasets.empty()) {
      for (const auto& wanted : c.datasets)
        if (std::none_of(entries.begin(), entries.end(), [&](const auto& e) { return e.name == wanted; }))
          throw ValidationError("dataset '" + wanted + "' is not in the manifest");
      std::erase_if(entries, [&](const auto& e) {
        return std::find(c.datasets.begin(), c.datasets.end(), e.name) == c.datasets.end();
      });
    }

    std::vector<std::string> index_rows;
    for (const auto& entry : entries) {
      const auto loaded = load_dataset(entry, c.jobs);
      if (loaded.timelines.empty()) throw DataError("dataset '" + entry.name + "' has no timeline files");
      std::vector<std::string> rows(loaded.timelines.size());
      parallel_for(rows.size(), c.jobs, [&](std::size_t i) { rows[i] = ingest_row(loaded.timelines[i]); });
      json header = stage_header("ingest", entry.name);
      header["egos"] = loaded.timelines.size();
      header["diagnostics"] = {{"unknown_kinds", loaded.diagnostics.unknown_kinds},
                               {"duplicates_removed", loaded.diagnostics.duplicates_removed},
                               {"self_addressed_dropped", loaded.diagnostics.self_addressed_dropped}};
      write_stage(stage_dir(c, "ingest") / (entry.name + ".jsonl"), header, rows);
      index_rows.push_back(json{{"dataset", entry.name}, {"egos", loaded.timelines.size()}}.dump());
    }
    write_stage(stage_dir(c, "ingest") / "datasets.jsonl",
                json{{"format", "senm.datasets"}, {"version", kStageVersion}}, index_rows);
  });
}

void run_preprocess(const PipelineConfig& c) {
  in_stage("preprocess", [&] {
    validate(c);
    ClassifierPolicy classifier = c.classifier;
    if (c.ego_labels) classifier.external_labels = load_ego_labels(*c.ego_labels);
    for (const auto& dataset : ingested_datasets(c)) {
      const auto timelines = read_ingest(c, dataset);
      std::vector<std::string> rows(timelines.size());
      parallel_for(timelines.size(), c.jobs, [&](std::size_t i) {
        const auto& t = timelines[i];
        const auto verdict = evaluate_ego(t, c.activity, classifier);
        json row{{"ego_id", t.ego_id}, {"kept", verdict.kept}};
        json reasons = json::array();
        for (auto r : verdict.reasons) reasons.push_back(to_string(r));
        row["reasons"] = std::move(reasons);
        if (t.declared_location) row["declared_location"] = *t.declared_location;
        json full = json::array(), active = json::array();
        if (verdict.kept) {
          const auto aggregates = aggregate_relationships(t);
          const auto split = split_full_active(aggregates, c.activity.active_min_frequency);
          for (const auto& a : split.full) full.push_back(aggregate_json(a));
          for (const auto& a : split.active) active.push_back(a.alter_id);
        }
        row["full"] = std::move(full);
        row["active"] = std::move(active);
        rows[i] = row.dump();
      });
      json header = stage_header("preprocess", dataset);
      header["policy"] = {{"min_posts", c.activity.min_posts},
                          {"min_span_days", c.activity.min_span_days},
                          {"min_posts_per_month", c.activity.min_posts_per_month},
                          {"max_sparse_month_fraction", c.activity.max_sparse_month_fraction},
                          {"active_min_frequency", c.activity.active_min_frequency}};
      write_stage(stage_dir(c, "preprocess") / (dataset + ".jsonl"), header, rows);
    }
  });
}

void run_circles(const PipelineConfig& c) {
  in_stage("circles", [&] {
    validate(c);
    for (const auto& dataset : ingested_datasets(c)) {
      auto egos = read_preprocess(c, dataset);
      std::erase_if(egos, [](const auto& e) { return !e.kept; });
      std::vector<std::string> rows(egos.size());
      parallel_for(egos.size(), c.jobs, [&](std::size_t i) {
        const auto& e = egos[i];
        std::optional<CircleStructure> circles;
        std::string note;
        try {
          circles = compute_circles(e.ego_id, e.split.active, c.mean_shift);
        } catch (const EmptyNetwork&) {
          note = "no active alters";
        } catch (const DegenerateInput& err) {
          note = err.what();
        }
        json row{{"ego_id", e.ego_id}, {"circles", circles_json(circles)}};
        if (!note.empty()) row["note"] = note;
        rows[i] = row.dump();
      });
      json header = stage_header("circles", dataset);
      header["bandwidth_quantile"] = c.mean_shift.bandwidth_quantile;
      header["log_scale"] = c.mean_shift.log_scale;
      write_stage(stage_dir(c, "circles") / (dataset + ".jsonl"), header, rows);
    }
  });
}

void run_sign(const PipelineConfig& c) {
  in_stage("sign", [&] {
    validate(c);
    check_providers(c);
    for (const auto& dataset : ingested_datasets(c)) {
      const auto timelines = read_ingest(c, dataset);
      auto egos = read_preprocess(c, dataset);
      const auto circle_file = read_stage(stage_dir(c, "circles") / (dataset + ".jsonl"), "circles", "circles");
      std::unordered_map<std::string, std::optional<CircleStructure>> circles;
      for (const auto& row : circle_file.rows) {
        const auto ego = row.at("ego_id").get<std::string>();
        circles[ego] = circles_from(row.at("circles"), ego);
      }
      std::unordered_map<std::string, const EgoTimeline*> by_ego;
      for (const auto& t : timelines) by_ego[t.ego_id] = &t;
      std::erase_if(egos, [](const auto& e) { return !e.kept; });

      std::vector<UnsignedEgoNetwork> unsigned_networks;
      for (auto& e : egos) {
        const auto it = circles.find(e.ego_id);
        if (it == circles.end()) throw DataError("ego '" + e.ego_id + "' has no circles entry; rerun 'circles'");
        if (!by_ego.contains(e.ego_id)) throw DataError("ego '" + e.ego_id + "' is missing from the ingest output");
        unsigned_networks.push_back({e.ego_id, std::move(e.split.full), std::move(e.split.active), it->second});
      }

      const auto primary = make_provider(c, c.provider, dataset, nullptr);
      std::vector<std::pair<std::string, std::shared_ptr<const SentimentProvider>>> providers{{c.provider, primary}};
      if (c.compare_provider)
        providers.emplace_back(*c.compare_provider, make_provider(c, *c.compare_provider, dataset, primary));

      for (const auto& [key, provider] : providers) {
        std::vector<std::string> rows(unsigned_networks.size());
        std::vector<SigningDiagnostics> diags(unsigned_networks.size());
        parallel_for(unsigned_networks.size(), c.jobs, [&](std::size_t i) {
          const auto& n = unsigned_networks[i];
          rows[i] = signed_row(sign_ego_network(*by_ego.at(n.ego_id), n, *provider, c.sign_threshold, &diags[i]));
        });
        SigningDiagnostics total;
        for (const auto& d : diags) {
          total.labeled += d.labeled;
          total.missing_text += d.missing_text;
        }
        json header = stage_header("sign", dataset);
        header["provider"] = provider->name();
        header["threshold"] = c.sign_threshold;
        header["labeled"] = total.labeled;
        header["missing_text"] = total.missing_text;
        write_stage(stage_dir(c, "sign") / (dataset + "." + key + ".jsonl"), header, rows);
      }
    }
  });
}

void run_analyze(const PipelineConfig& c) {
  in_stage("analyze", [&] {
    validate(c);
    LocationMap places;
    std::optional<fs::path> locations = c.locations;
    if (!locations && !c.data.empty() && fs::exists(data_root(c) / "locations.csv")) locations = data_root(c) / "locations.csv";
    if (locations) {
      if (!fs::exists(*locations)) throw ValidationError("location map not found: " + locations->string());
      places = load_location_map(*locations);
    }
    const int k = c.circles_filter;

    std::string t2 = "dataset,provider,full,active,difference\n";
    std::string t3 = "dataset,full,active,difference\n";
    std::string t4 = "dataset,network,egos,relationships,interactions\n";
    std::string t5 = "dataset,mean_circles,ci_low,ci_high,egos,egos_with_" + std::to_string(k) + "\n";
    std::string t6 = "dataset,egos";
    std::string t7 = "dataset,egos";
    for (int level = 1; level <= k; ++level) {
      t6 += ",c" + std::to_string(level);
      t7 += ",c" + std::to_string(level) + "_negative,c" + std::to_string(level) + "_percent";
    }
    t6 += "\n";
    t7 += ",active_percent\n";
    std::string loc = "dataset,level,name,egos,relationships\n";
    json report_datasets = json::array();

    for (const auto& dataset : ingested_datasets(c)) {
      const auto egos = read_preprocess(c, dataset);
      const auto networks = read_signed(c, dataset, c.provider);
      DatasetReport report;
      try {
        report = build_dataset_report(dataset, networks, k, c.averaging);
      } catch (const NoSignedRelationships& e) {
        throw DataError("dataset '" + dataset + "': " + e.what());
      }
      const auto& neg = report.negativity;
      json jd{{"dataset", dataset},
              {"provider", c.provider},
              {"egos_total", egos.size()},
              {"egos_kept", report.egos},
              {"egos_without_circles", report.degenerate_egos},
              {"full_negativity", neg.full},
              {"active_negativity", neg.active},
              {"difference", neg.delta}};

      std::map<std::string, std::size_t> exclusions;
      for (const auto& e : egos)
        for (const auto& r : e.reasons) ++exclusions[r];
      jd["exclusions"] = exclusions;

      t2 += csv_escape(dataset) + "," + c.provider + "," + fixed(neg.full) + "," + fixed(neg.active) + "," +
            fixed(neg.delta) + "\n";
      if (c.compare_provider) {
        // A comparison provider that cannot label this dataset leaves its row empty.
        try {
          const auto other = full_vs_active_row(dataset, read_signed(c, dataset, *c.compare_provider));
          t2 += csv_escape(dataset) + "," + *c.compare_provider + "," + fixed(other.full) + "," +
                fixed(other.active) + "," + fixed(other.delta) + "\n";
          jd["comparison"] = {{"provider", *c.compare_provider},
                              {"full_negativity", other.full},
                              {"active_negativity", other.active},
                              {"difference", other.delta}};
        } catch (const NoSignedRelationships&) {
          t2 += csv_escape(dataset) + "," + *c.compare_provider + ",NA,NA,NA\n";
          jd["comparison"] = {{"provider", *c.compare_provider}, {"note", "no signed relationships"}};
        }
      }
      t3 += csv_escape(dataset) + "," + fixed(neg.full) + "," + fixed(neg.active) + "," + fixed(neg.delta) + "\n";

      std::size_t full_rel = 0, full_int = 0, active_egos = 0, active_rel = 0, active_int = 0, kept = 0;
      for (const auto& e : egos) {
        if (!e.kept) continue;
        ++kept;
        full_rel += e.split.full.size();
        for (const auto& a : e.split.full) full_int += a.interaction_count;
        if (!e.split.active.empty()) ++active_egos;
        active_rel += e.split.active.size();
        for (const auto& a : e.split.active) active_int += a.interaction_count;
      }
      t4 += csv_escape(dataset) + ",full," + std::to_string(kept) + "," + std::to_string(full_rel) + "," +
            std::to_string(full_int) + "\n";
      t4 += csv_escape(dataset) + ",active," + std::to_string(active_egos) + "," + std::to_string(active_rel) + "," +
            std::to_string(active_int) + "\n";

      if (report.circles) {
        const auto& s = *report.circles;
        t5 += csv_escape(dataset) + "," + fixed(s.mean) + "," + fixed(s.ci_low) + "," + fixed(s.ci_high) + "," +
              std::to_string(s.egos) + "," + std::to_string(s.egos_with_k) + "\n";
        jd["circles"] = {{"mean", s.mean}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high}, {"egos", s.egos},
                         {"egos_with_k", s.egos_with_k}};
      } else {
        t5 += csv_escape(dataset) + ",NA,NA,NA,0,0\n";
        jd["circles"] = nullptr;
      }
      if (report.mean_circle_sizes && report.per_circle) {
        const auto n_k = report.circles ? report.circles->egos_with_k : 0;
        t6 += csv_escape(dataset) + "," + std::to_string(n_k);
        t7 += csv_escape(dataset) + "," + std::to_string(n_k);
        for (double size : *report.mean_circle_sizes) t6 += "," + fixed(size);
        for (const auto& row : *report.per_circle) t7 += "," + fixed(row.mean_negative_count) + "," + fixed(row.percentage);
        t6 += "\n";
        t7 += "," + fixed(neg.active) + "\n";
        jd["mean_circle_sizes"] = *report.mean_circle_sizes;
        json per_circle = json::array();
        for (const auto& row : *report.per_circle)
          per_circle.push_back({{"mean_negative", row.mean_negative_count}, {"percent", row.percentage}});
        jd["per_circle_negativity"] = std::move(per_circle);
      } else {
        jd["mean_circle_sizes"] = nullptr;
        jd["per_circle_negativity"] = nullptr;
      }

      std::vector<EgoLocation> ego_locations;
      std::unordered_map<std::string, std::size_t> active_counts;
      for (const auto& n : networks) active_counts[n.ego_id] = n.relationships.size();
      for (const auto& e : egos)
        if (e.kept) ego_locations.push_back({e.declared_location, active_counts[e.ego_id]});
      const auto tables = aggregate_by_location(ego_locations, places, c.country_min_egos);
      for (const auto& row : tables.countries)
        loc += csv_escape(dataset) + ",country," + csv_escape(row.name) + "," + std::to_string(row.egos) + "," +
               std::to_string(row.relationships) + "\n";
      for (const auto& row : tables.continents)
        loc += csv_escape(dataset) + ",continent," + csv_escape(row.name) + "," + std::to_string(row.egos) + "," +
               std::to_string(row.relationships) + "\n";

      report_datasets.push_back(std::move(jd));
    }

    const std::pair<const char*, const std::string*> outputs[] = {
        {"2", &t2}, {"3", &t3}, {"4", &t4}, {"5", &t5}, {"6", &t6}, {"7", &t7}};
    for (const auto& [table, content] : outputs)
      if (wants_table(c, table)) write_file(c.out / ("table" + std::string(table) + ".csv"), *content);
    if (wants_table(c, "locations")) write_file(c.out / "locations.csv", loc);

    json report{{"format", "senm.report"},
                {"version", kStageVersion},
                {"settings",
                 {{"provider", c.provider},
                  {"sign_threshold", c.sign_threshold},
                  {"bandwidth_quantile", c.mean_shift.bandwidth_quantile},
                  {"log_scale", c.mean_shift.log_scale},
                  {"circles_filter", k},
                  {"averaging", c.averaging == CircleAveraging::pooled ? "pooled" : "per_ego"},
                  {"seed", c.seed}}},
                {"datasets", std::move(report_datasets)}};
    write_file(c.out / "report.json", report.dump(2) + "\n");
  });
}

void run_topics(const PipelineConfig& c) {
  in_stage("topics", [&] {
    validate(c);
    const fs::path stop_dir = c.stopwords_dir ? *c.stopwords_dir : default_data_dir() / "stopwords";
    const Stopwords stopwords = Stopwords::load_directory(stop_dir);
    TopicMap labelmap;
    std::optional<fs::path> labelmap_path = c.labelmap;
    if (!labelmap_path && !c.data.empty() && fs::exists(data_root(c) / "labelmap.csv"))
      labelmap_path = data_root(c) / "labelmap.csv";
    if (labelmap_path) {
      if (!fs::exists(*labelmap_path)) throw ValidationError("label map not found: " + labelmap_path->string());
      labelmap = load_labelmap(*labelmap_path);
    }

    const std::string header = "dataset,rank,term,mentions,topic\n";
    std::string tags_full = header, tags_active = header, words_full = header, words_active = header;
    std::vector<TopicFeatures> features;
    std::vector<double> negativity;

    for (const auto& dataset : ingested_datasets(c)) {
      const auto timelines = read_ingest(c, dataset);
      const auto egos = read_preprocess(c, dataset);
      std::unordered_map<std::string, const PreprocessedEgo*> by_ego;
      for (const auto& e : egos) by_ego[e.ego_id] = &e;

      // Per-ego partial counts, merged in ego order.
      std::vector<std::array<TermCounts, 4>> partial(timelines.size());
      parallel_for(timelines.size(), c.jobs, [&](std::size_t i) {
        const auto& t = timelines[i];
        const auto it = by_ego.find(t.ego_id);
        if (it == by_ego.end() || !it->second->kept) return;
        std::set<std::string> full, active;
        for (const auto& a : it->second->split.full) full.insert(a.alter_id);
        for (const auto& a : it->second->split.active) active.insert(a.alter_id);
        count_terms(t, &full, TermKind::hashtag, stopwords, partial[i][0]);
        count_terms(t, &active, TermKind::hashtag, stopwords, partial[i][1]);
        count_terms(t, &full, TermKind::word, stopwords, partial[i][2]);
        count_terms(t, &active, TermKind::word, stopwords, partial[i][3]);
      });
      std::array<TermCounts, 4> counts;
      for (const auto& p : partial)
        for (std::size_t s = 0; s < 4; ++s)
          for (const auto& [term, n] : p[s]) counts[s][term] += n;

      std::array<std::string*, 4> sinks{&tags_full, &tags_active, &words_full, &words_active};
      std::vector<TermStats> labeled_active_tags;
      for (std::size_t s = 0; s < 4; ++s) {
        const auto kind = s < 2 ? TermKind::hashtag : TermKind::word;
        const auto top = top_k_terms(counts[s], kind, c.top_k);
        const auto labeled = assign_topic_labels(top.terms, labelmap);
        for (const auto& t : labeled)
          *sinks[s] += csv_escape(dataset) + "," + std::to_string(t.rank) + "," + csv_escape(t.term) + "," +
                       std::to_string(t.mentions) + "," + std::string(to_string(t.topic.value_or(Topic::general))) +
                       "\n";
        if (s == 1) labeled_active_tags = labeled;
      }
      features.push_back(topic_features(dataset, labeled_active_tags));
      negativity.push_back(full_vs_active_row(dataset, read_signed(c, dataset, c.provider)).active);
    }

    write_file(c.out / "top20_hashtags_full.csv", tags_full);
    write_file(c.out / "top20_hashtags_active.csv", tags_active);
    write_file(c.out / "top20_words_full.csv", words_full);
    write_file(c.out / "top20_words_active.csv", words_active);
    std::string corr = "feature,n,r,df,p_two_tailed,note\n";
    for (const auto& fc : correlate_topic_features(features, negativity)) {
      corr += fc.feature + "," + std::to_string(features.size()) + ",";
      if (fc.result)
        corr += fixed(fc.result->r, 6) + "," + std::to_string(fc.result->df) + "," + fixed(fc.result->p_two_tailed, 6) +
                ",\n";
      else
        corr += ",,," + csv_escape(fc.note) + "\n";
    }
    write_file(c.out / "correlations.csv", corr);
  });
}

void run_pipeline(const PipelineConfig& c) {
  in_stage("sign", [&] { check_providers(c); });
  run_ingest(c);
  run_preprocess(c);
  run_circles(c);
  run_sign(c);
  run_analyze(c);
  run_topics(c);
}

// ---------------------------------------------------------------------------
// command line

namespace {

struct CliOptions {
  std::optional<std::string> data, out, config, provider, compare_provider, sidecar, lexicon, labelmap, locations,
      stopwords, ego_labels, datasets, tables;
  std::optional<double> sign_threshold, bandwidth_quantile, lexicon_threshold, shift_probability;
  std::optional<int> circles_filter;
  std::optional<std::size_t> country_min_egos, top_k;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  bool per_ego_averaging = false;
  bool raw_scale = false;
};

void add_pipeline_options(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--data", o.data, "datasets.csv or the directory holding it");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--config", o.config, "JSON config file; flags override it");
  cmd->add_option("--provider", o.provider, "sentiment provider")->check(CLI::IsMember({"precomputed", "lexicon"}));
  cmd->add_option("--compare-provider", o.compare_provider, "second provider for table 2")
      ->check(CLI::IsMember({"precomputed", "lexicon", "shifted"}));
  cmd->add_option("--sidecar", o.sidecar, "directory of <dataset>.csv precomputed label files");
  cmd->add_option("--lexicon", o.lexicon, "lexicon CSV or directory of <lang>.csv files");
  cmd->add_option("--lexicon-threshold", o.lexicon_threshold, "lexicon score threshold");
  cmd->add_option("--shift-probability", o.shift_probability, "neutral to negative rate of the shifted provider");
  cmd->add_option("--sign-threshold", o.sign_threshold, "negative share above which a relationship is negative");
  cmd->add_option("--bandwidth-quantile", o.bandwidth_quantile, "mean shift bandwidth quantile");
  cmd->add_flag("--raw-scale", o.raw_scale, "cluster raw frequencies instead of their logarithm");
  cmd->add_option("--circles-filter", o.circles_filter, "circle count used by tables 6 and 7");
  cmd->add_flag("--per-ego-averaging", o.per_ego_averaging, "average per-ego percentages in table 7");
  cmd->add_option("--datasets", o.datasets, "comma-separated dataset names");
  cmd->add_option("--tables", o.tables, "comma-separated tables: 2..7, locations");
  cmd->add_option("--labelmap", o.labelmap, "term,topic CSV");
  cmd->add_option("--locations", o.locations, "location,country,continent CSV");
  cmd->add_option("--stopwords", o.stopwords, "directory of <lang>.txt stopword lists");
  cmd->add_option("--ego-labels", o.ego_labels, "ego_id,label CSV overriding the person classifier");
  cmd->add_option("--country-min-egos", o.country_min_egos, "smallest country listed in locations.csv");
  cmd->add_option("--top-k", o.top_k, "terms per ranking");
  cmd->add_option("--seed", o.seed, "seed for randomized providers");
  cmd->add_option("--jobs", o.jobs, "worker threads");
}

PipelineConfig build_config(const CliOptions& o) {
  PipelineConfig c;
  if (o.config) apply_config_file(*o.config, c);
  if (o.data) c.data = *o.data;
  if (o.out) c.out = *o.out;
  if (o.provider) c.provider = *o.provider;
  if (o.compare_provider) c.compare_provider = *o.compare_provider;
  if (o.sidecar) c.sidecar_dir = fs::path(*o.sidecar);
  if (o.lexicon) c.lexicon = fs::path(*o.lexicon);
  if (o.lexicon_threshold) c.lexicon_threshold = *o.lexicon_threshold;
  if (o.shift_probability) c.shift_probability = *o.shift_probability;
  if (o.sign_threshold) c.sign_threshold = *o.sign_threshold;
  if (o.bandwidth_quantile) c.mean_shift.bandwidth_quantile = *o.bandwidth_quantile;
  if (o.raw_scale) c.mean_shift.log_scale = false;
  if (o.circles_filter) c.circles_filter = *o.circles_filter;
  if (o.per_ego_averaging) c.averaging = CircleAveraging::per_ego;
  if (o.datasets) c.datasets = split_list(*o.datasets);
  if (o.tables) {
    const auto items = split_list(*o.tables);
    c.tables = {items.begin(), items.end()};
  }
  if (o.labelmap) c.labelmap = fs::path(*o.labelmap);
  if (o.locations) c.locations = fs::path(*o.locations);
  if (o.stopwords) c.stopwords_dir = fs::path(*o.stopwords);
  if (o.ego_labels) c.ego_labels = fs::path(*o.ego_labels);
  if (o.country_min_egos) c.country_min_egos = *o.country_min_egos;
  if (o.top_k) c.top_k = *o.top_k;
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  return c;
}

void run_simulate(const std::string& scenario_path, const fs::path& out, std::optional<std::uint64_t> seed,
                  unsigned jobs) {
  in_stage("simulate", [&] {
    if (out.empty()) throw ValidationError("an output directory is required (--out)");
    if (jobs == 0) throw ValidationError("jobs must be at least 1");
    const auto scenario = load_scenario(scenario_path, seed);
    for (const auto& d : scenario.datasets)
      if (!valid_dataset_name(d.name)) throw ValidationError("invalid dataset name '" + d.name + "'");
    std::vector<GeneratedDataset> generated;
    for (const auto& d : scenario.datasets) generated.push_back(generate_dataset(d, jobs));
    write_generated(out, generated, scenario.datasets);
  });
}

}  // namespace

int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Signed ego network analysis", args.empty() ? "senm" : args[0]};
  app.require_subcommand(1);

  CliOptions options;
  using Stage = void (*)(const PipelineConfig&);
  const std::pair<const char*, std::pair<const char*, Stage>> stages[] = {
      {"ingest", {"parse timelines listed in the dataset manifest", run_ingest}},
      {"preprocess", {"activity filters and relationship aggregation", run_preprocess}},
      {"circles", {"mean shift circle detection", run_circles}},
      {"sign", {"label interactions and sign relationships", run_sign}},
      {"analyze", {"tables 2 to 7 and locations", run_analyze}},
      {"topics", {"top terms and topic correlations", run_topics}},
      {"pipeline", {"run every stage in order", run_pipeline}},
  };
  std::vector<std::pair<CLI::App*, Stage>> commands;
  for (const auto& [name, info] : stages) {
    auto* cmd = app.add_subcommand(name, info.first);
    add_pipeline_options(cmd, options);
    commands.emplace_back(cmd, info.second);
  }

  std::string scenario, sim_out;
  std::optional<std::uint64_t> sim_seed;
  unsigned sim_jobs = 1;
  auto* simulate = app.add_subcommand("simulate", "generate synthetic datasets with a truth manifest");
  simulate->add_option("--scenario", scenario, "JSON scenario file")->required();
  simulate->add_option("--out", sim_out, "output directory")->required();
  simulate->add_option("--seed", sim_seed, "overrides the scenario seed");
  simulate->add_option("--jobs", sim_jobs, "worker threads");

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (simulate->parsed()) {
      run_simulate(scenario, sim_out, sim_seed, sim_jobs);
      return kExitOk;
    }
    for (const auto& [cmd, stage] : commands) {
      if (!cmd->parsed()) continue;
      PipelineConfig config;
      in_stage(cmd->get_name(), [&] { config = build_config(options); });
      stage(config);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "senm: " << e.what() << "\n";
    return e.kind() == ErrorKind::validation ? kExitValidation : kExitData;
  } catch (const std::exception& e) {
    err << "senm: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace senm

#include "senm/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

namespace senm {

using nlohmann::json;

std::vector<CircleLevel> default_circle_levels() {
  return {{1.5, 243.0}, {5.0, 81.0}, {15.0, 27.0}, {45.0, 9.0}, {135.0, 3.0}};
}

std::vector<TermSpec> zipf_terms(const std::string& prefix, std::size_t count, Topic topic, double exponent,
                                 double scale) {
  std::vector<TermSpec> terms;
  for (std::size_t i = 1; i <= count; ++i) {
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "%02zu", i);
    terms.push_back({prefix + suffix, topic, scale / std::pow(static_cast<double>(i), exponent)});
  }
  return terms;
}

void validate(const ScenarioConfig& c) {
  if (c.ego_count == 0) throw InfeasibleConfig("ego_count must be positive");
  if (c.circle_levels.empty()) throw InfeasibleConfig("at least one circle level is required");
  if (c.negativity_by_level.size() != c.circle_levels.size())
    throw InfeasibleConfig("negativity_by_level needs one entry per circle level");
  for (std::size_t i = 0; i < c.circle_levels.size(); ++i) {
    const auto& level = c.circle_levels[i];
    if (!(level.cumulative_size > 0.0) || !(level.frequency > 0.0))
      throw InfeasibleConfig("circle level sizes and frequencies must be positive");
    if (i > 0 && !(level.cumulative_size > c.circle_levels[i - 1].cumulative_size))
      throw InfeasibleConfig("cumulative circle sizes must be strictly increasing");
    if (i > 0 && !(level.frequency < c.circle_levels[i - 1].frequency))
      throw InfeasibleConfig("level frequencies must be strictly decreasing");
  }
  for (double p : c.negativity_by_level)
    if (!(p >= 0.0 && p <= 1.0)) throw InfeasibleConfig("negativity fractions must lie in [0, 1]");
  if (!(c.frequency_noise >= 0.0)) throw InfeasibleConfig("frequency_noise must be non-negative");
  if (!(c.window_days > 0.0)) throw InfeasibleConfig("window_days must be positive");
  if (!(c.min_age_fraction > 0.0 && c.min_age_fraction <= c.max_age_fraction && c.max_age_fraction <= 1.0))
    throw InfeasibleConfig("relationship age fractions must satisfy 0 < min <= max <= 1");
  if (!(c.inactive_fraction >= 0.0 && c.inactive_fraction < 1.0))
    throw InfeasibleConfig("inactive_fraction must lie in [0, 1)");
  if (!(c.inactive_negativity >= 0.0 && c.inactive_negativity <= 1.0))
    throw InfeasibleConfig("inactive_negativity must lie in [0, 1]");
  if (c.inactive_fraction > 0.0 && !(c.window_days * c.min_age_fraction > 365.25 * 1.2))
    throw InfeasibleConfig("sub-annual alters need relationships older than 1.2 years");
  if (!(c.neutral_share >= 0.0 && c.neutral_share <= 1.0)) throw InfeasibleConfig("neutral_share must lie in [0, 1]");
  if (!(c.hashtag_rate >= 0.0)) throw InfeasibleConfig("hashtag_rate must be non-negative");
  if (c.hashtag_rate > 0.0 && c.term_universe.empty()) throw InfeasibleConfig("hashtags need a term universe");
  for (const auto& t : c.term_universe)
    if (t.term.empty() || !(t.weight > 0.0)) throw InfeasibleConfig("terms need a name and a positive weight");
  for (const auto& l : c.locations)
    if (!(l.weight > 0.0)) throw InfeasibleConfig("location weights must be positive");

  // A draw crosses the log-midpoint to its neighbour level with probability
  // 1 - Phi(gap / (2 sigma)); reject anything above 1%.
  if (c.frequency_noise > 0.0) {
    for (std::size_t i = 1; i < c.circle_levels.size(); ++i) {
      const double gap = std::log(c.circle_levels[i - 1].frequency / c.circle_levels[i].frequency);
      const double z = gap / (2.0 * c.frequency_noise);
      const double crossing = 0.5 * std::erfc(z / std::sqrt(2.0));
      if (crossing > 0.01)
        throw InfeasibleConfig("levels " + std::to_string(i - 1) + " and " + std::to_string(i) +
                               " overlap with probability " + std::to_string(crossing));
    }
  }
}

namespace {

const std::array<const char*, 5> kPositiveWords = {"great", "wonderful", "lovely", "brilliant", "thanks"};
const std::array<const char*, 5> kNegativeWords = {"awful", "terrible", "horrible", "hate", "disgusting"};
const std::array<const char*, 5> kNeutralWords = {"meeting", "tomorrow", "station", "schedule", "weather"};

std::size_t stochastic_round(double x, std::mt19937_64& rng) {
  const double floor = std::floor(x);
  std::bernoulli_distribution up(x - floor);
  return static_cast<std::size_t>(floor) + (up(rng) ? 1 : 0);
}

std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

struct PlannedRelationship {
  AlterTruth truth;
  Timestamp first_ts = 0;
};

std::string template_text(Sentiment label, const std::vector<std::string>& hashtags, std::mt19937_64& rng) {
  const auto& words = label == Sentiment::positive   ? kPositiveWords
                      : label == Sentiment::negative ? kNegativeWords
                                                     : kNeutralWords;
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<std::size_t> filler(0, kNeutralWords.size() - 1);
  std::string text = words[pick(rng)];
  if (label != Sentiment::neutral) text += std::string(" ") + words[pick(rng)];
  text += std::string(" ") + kNeutralWords[filler(rng)];
  for (const auto& tag : hashtags) text += " #" + tag;
  return text;
}

EgoTimeline generate_ego(const ScenarioConfig& c, std::size_t ego_index, int id_width, EgoTruth& truth) {
  std::mt19937_64 rng(hash_combine(c.seed, ego_index));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::string ego_id = padded("ego", ego_index, id_width);
  const auto window_seconds = static_cast<Timestamp>(std::llround(c.window_days * kSecondsPerDay));
  const Timestamp end = c.start + window_seconds;
  const double window_years = static_cast<double>(window_seconds) / kSecondsPerYear;

  truth.ego_id = ego_id;
  std::vector<PlannedRelationship> planned;

  auto realized_frequency = [&](std::size_t n, Timestamp first_ts) {
    const double years = static_cast<double>(end - first_ts) / kSecondsPerYear;
    return static_cast<double>(n) / std::max(years, kMinRelationshipYears);
  };
  auto age_years = [&] {
    return window_years * (c.min_age_fraction + (c.max_age_fraction - c.min_age_fraction) * unit(rng));
  };

  // Circle levels.
  double previous = 0.0;
  std::size_t active_count = 0;
  for (std::size_t level = 0; level < c.circle_levels.size(); ++level) {
    const auto& spec = c.circle_levels[level];
    const std::size_t ring = stochastic_round(spec.cumulative_size - previous, rng);
    previous = spec.cumulative_size;
    if (ring > 0) ++truth.optimum_circles;

    const std::size_t negatives = std::min(ring, stochastic_round(c.negativity_by_level[level] * ring, rng));
    std::vector<bool> negative(ring, false);
    std::fill(negative.begin(), negative.begin() + static_cast<std::ptrdiff_t>(negatives), true);
    std::shuffle(negative.begin(), negative.end(), rng);

    for (std::size_t j = 0; j < ring; ++j) {
      const double target = spec.frequency * std::exp(c.frequency_noise * gauss(rng));
      const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(target * age_years())));
      const double duration = std::min(window_years, static_cast<double>(n) / target);
      PlannedRelationship rel;
      rel.first_ts = end - static_cast<Timestamp>(std::llround(duration * kSecondsPerYear));
      rel.truth.level = static_cast<int>(level);
      rel.truth.interactions = n;
      rel.truth.frequency = realized_frequency(n, rel.first_ts);
      rel.truth.sign = negative[j] ? RelationshipSign::negative : RelationshipSign::positive;
      planned.push_back(std::move(rel));
      ++active_count;
    }
  }

  // Sub-annual alters: a single interaction more than a year before the end.
  const double inactive_expected = static_cast<double>(active_count) * c.inactive_fraction / (1.0 - c.inactive_fraction);
  const std::size_t inactive = stochastic_round(inactive_expected, rng);
  const std::size_t inactive_negatives =
      std::min(inactive, stochastic_round(c.inactive_negativity * static_cast<double>(inactive), rng));
  std::vector<bool> inactive_negative(inactive, false);
  std::fill(inactive_negative.begin(), inactive_negative.begin() + static_cast<std::ptrdiff_t>(inactive_negatives), true);
  std::shuffle(inactive_negative.begin(), inactive_negative.end(), rng);
  for (std::size_t j = 0; j < inactive; ++j) {
    PlannedRelationship rel;
    rel.first_ts = end - static_cast<Timestamp>(std::llround(age_years() * kSecondsPerYear));
    rel.truth.level = -1;
    rel.truth.interactions = 1;
    rel.truth.frequency = realized_frequency(1, rel.first_ts);
    rel.truth.sign = inactive_negative[j] ? RelationshipSign::negative : RelationshipSign::positive;
    planned.push_back(std::move(rel));
  }

  const int alter_width = planned.size() < 1000 ? 3 : 6;
  for (std::size_t i = 0; i < planned.size(); ++i)
    planned[i].truth.alter_id = ego_id + "_" + padded("a", i, alter_width);

  std::vector<double> term_weights;
  for (const auto& t : c.term_universe) term_weights.push_back(t.weight);
  std::discrete_distribution<std::size_t> term_dist(term_weights.begin(), term_weights.end());
  std::poisson_distribution<int> hashtag_count(c.hashtag_rate > 0.0 ? c.hashtag_rate : 1.0);
  std::discrete_distribution<int> kind_dist({0.6, 0.25, 0.15});

  EgoTimeline timeline;
  timeline.ego_id = ego_id;
  for (auto& rel : planned) {
    const std::size_t n = rel.truth.interactions;
    // Negative relationships sit at >= 20% negative labels, positive ones at
    // <= 14%, three points clear of the 17% rule on both sides.
    std::size_t neg = 0;
    if (rel.truth.sign == RelationshipSign::negative) {
      const double share = 0.2 + 0.4 * unit(rng);
      neg = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(share * static_cast<double>(n) - 1e-9)), 1, n);
      if (static_cast<double>(neg) < 0.2 * static_cast<double>(n)) ++neg;
    } else {
      neg = static_cast<std::size_t>(std::floor(0.14 * unit(rng) * static_cast<double>(n)));
    }
    rel.truth.negative_labels = neg;
    std::vector<Sentiment> labels(n, Sentiment::positive);
    for (std::size_t i = 0; i < neg; ++i) labels[i] = Sentiment::negative;
    for (std::size_t i = neg; i < n; ++i) labels[i] = unit(rng) < c.neutral_share ? Sentiment::neutral : Sentiment::positive;
    std::shuffle(labels.begin(), labels.end(), rng);

    std::set<Timestamp> stamps{rel.first_ts};
    std::uniform_int_distribution<Timestamp> when(rel.first_ts, end);
    while (stamps.size() < n) stamps.insert(when(rng));

    std::size_t i = 0;
    for (Timestamp ts : stamps) {
      InteractionRecord record;
      record.ego_id = ego_id;
      record.alter_ids = {rel.truth.alter_id};
      record.timestamp = ts;
      record.kind = static_cast<InteractionKind>(kind_dist(rng));
      record.sentiment = labels[i++];
      if (c.hashtag_rate > 0.0) {
        const int tags = hashtag_count(rng);
        for (int t = 0; t < tags; ++t) {
          std::string tag = c.term_universe[term_dist(rng)].term;
          if (!tag.empty() && unit(rng) < 0.25) tag[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(tag[0])));
          record.hashtags.push_back(std::move(tag));
        }
      }
      if (c.emit_text) {
        record.text = template_text(*record.sentiment, record.hashtags, rng);
        record.lang = "en";
      }
      timeline.records.push_back(std::move(record));
    }
  }

  const std::size_t posts = std::max<std::size_t>(2, c.noncommunicative_posts);
  std::uniform_int_distribution<Timestamp> post_time(c.start, end);
  timeline.noncommunicative_posts.push_back(c.start);
  timeline.noncommunicative_posts.push_back(end);
  for (std::size_t i = 2; i < posts; ++i) timeline.noncommunicative_posts.push_back(post_time(rng));
  std::sort(timeline.noncommunicative_posts.begin(), timeline.noncommunicative_posts.end());

  if (!c.locations.empty()) {
    std::vector<double> weights;
    for (const auto& l : c.locations) weights.push_back(l.weight);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    timeline.declared_location = c.locations[pick(rng)].text;
  }

  // Same canonical order the parser produces.
  std::sort(timeline.records.begin(), timeline.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp, a.kind, a.alter_ids, a.text, a.lang, a.sentiment, a.hashtags) <
           std::tie(b.timestamp, b.kind, b.alter_ids, b.text, b.lang, b.sentiment, b.hashtags);
  });
  timeline.first_activity = c.start;
  timeline.last_activity = end;

  for (auto& rel : planned) truth.alters.push_back(std::move(rel.truth));
  return timeline;
}

std::vector<TermCount> planted_top(const std::map<std::string, std::size_t>& counts, std::size_t k) {
  std::vector<TermCount> entries(counts.begin(), counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (entries.size() > k) entries.resize(k);
  return entries;
}

std::string lowercase_ascii(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace

GeneratedDataset generate_dataset(const ScenarioConfig& config, unsigned jobs) {
  validate(config);
  GeneratedDataset out;
  out.name = config.name;
  out.truth.name = config.name;
  out.timelines.resize(config.ego_count);
  out.truth.egos.resize(config.ego_count);
  const int width = config.ego_count <= 10000 ? 4 : 8;
  parallel_for(config.ego_count, jobs,
               [&](std::size_t i) { out.timelines[i] = generate_ego(config, i, width, out.truth.egos[i]); });

  std::size_t full_neg = 0, full_total = 0, active_neg = 0, active_total = 0;
  std::map<std::string, std::size_t> tags_full, tags_active;
  for (std::size_t e = 0; e < config.ego_count; ++e) {
    std::set<std::string> active;
    for (const auto& a : out.truth.egos[e].alters) {
      const bool is_negative = a.sign == RelationshipSign::negative;
      ++full_total;
      full_neg += is_negative;
      if (a.frequency >= 1.0) {
        ++active_total;
        active_neg += is_negative;
        active.insert(a.alter_id);
      }
    }
    for (const auto& r : out.timelines[e].records) {
      const bool in_active = active.contains(r.alter_ids.front());
      for (const auto& tag : r.hashtags) {
        ++tags_full[lowercase_ascii(tag)];
        if (in_active) ++tags_active[lowercase_ascii(tag)];
      }
    }
  }
  out.truth.full_negativity = full_total ? 100.0 * static_cast<double>(full_neg) / static_cast<double>(full_total) : 0.0;
  out.truth.active_negativity =
      active_total ? 100.0 * static_cast<double>(active_neg) / static_cast<double>(active_total) : 0.0;
  out.truth.active_fraction = full_total ? static_cast<double>(active_total) / static_cast<double>(full_total) : 0.0;
  out.truth.top_hashtags_full = planted_top(tags_full, config.top_k);
  out.truth.top_hashtags_active = planted_top(tags_active, config.top_k);
  return out;
}

namespace {

template <class T>
void read_optional(const json& obj, const char* key, T& target) {
  if (const auto it = obj.find(key); it != obj.end() && !it->is_null()) target = it->get<T>();
}

ScenarioConfig parse_dataset(const json& obj, std::uint64_t default_seed) {
  if (!obj.is_object()) throw ValidationError("scenario datasets must be objects");
  ScenarioConfig c;
  c.seed = default_seed;
  read_optional(obj, "name", c.name);
  read_optional(obj, "ego_count", c.ego_count);
  read_optional(obj, "frequency_noise", c.frequency_noise);
  read_optional(obj, "negativity_by_level", c.negativity_by_level);
  read_optional(obj, "inactive_fraction", c.inactive_fraction);
  read_optional(obj, "inactive_negativity", c.inactive_negativity);
  read_optional(obj, "min_age_fraction", c.min_age_fraction);
  read_optional(obj, "max_age_fraction", c.max_age_fraction);
  read_optional(obj, "neutral_share", c.neutral_share);
  read_optional(obj, "hashtag_rate", c.hashtag_rate);
  read_optional(obj, "noncommunicative_posts", c.noncommunicative_posts);
  read_optional(obj, "emit_text", c.emit_text);
  read_optional(obj, "seed", c.seed);
  read_optional(obj, "start", c.start);
  read_optional(obj, "window_days", c.window_days);
  read_optional(obj, "top_k", c.top_k);
  if (const auto it = obj.find("circle_levels"); it != obj.end()) {
    c.circle_levels.clear();
    for (const auto& level : *it) {
      if (!level.is_array() || level.size() != 2) throw ValidationError("circle_levels entries are [cumulative_size, frequency]");
      c.circle_levels.push_back({level[0].get<double>(), level[1].get<double>()});
    }
  }
  if (const auto it = obj.find("term_universe"); it != obj.end()) {
    c.term_universe.clear();
    for (const auto& t : *it) {
      if (t.contains("zipf")) {
        const auto& z = t["zipf"];
        const auto topic = parse_topic(z.value("topic", "general"));
        if (!topic) throw ValidationError("unknown topic in term_universe");
        auto terms = zipf_terms(z.at("prefix").get<std::string>(), z.at("count").get<std::size_t>(), *topic,
                                z.value("exponent", 1.0), z.value("scale", 1.0));
        c.term_universe.insert(c.term_universe.end(), terms.begin(), terms.end());
        continue;
      }
      TermSpec spec;
      spec.term = t.at("term").get<std::string>();
      const auto topic = parse_topic(t.value("topic", "general"));
      if (!topic) throw ValidationError("unknown topic for term '" + spec.term + "'");
      spec.topic = *topic;
      spec.weight = t.value("weight", 1.0);
      c.term_universe.push_back(std::move(spec));
    }
  }
  if (const auto it = obj.find("locations"); it != obj.end()) {
    for (const auto& l : *it)
      c.locations.push_back({l.at("text").get<std::string>(), l.value("country", ""), l.value("continent", ""),
                             l.value("weight", 1.0)});
  }
  return c;
}

}  // namespace

Scenario parse_scenario(std::string_view json_text, std::optional<std::uint64_t> seed_override) {
  Scenario scenario;
  try {
    const json root = json::parse(json_text);
    read_optional(root, "seed", scenario.seed);
    if (seed_override) scenario.seed = *seed_override;
    const auto it = root.find("datasets");
    if (it == root.end() || !it->is_array() || it->empty()) throw ValidationError("scenario needs a non-empty datasets list");
    for (std::size_t i = 0; i < it->size(); ++i) {
      ScenarioConfig c = parse_dataset((*it)[i], hash_combine(scenario.seed, i));
      if (seed_override) c.seed = hash_combine(scenario.seed, i);
      scenario.datasets.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid scenario: ") + e.what());
  }
  std::set<std::string> names;
  for (const auto& d : scenario.datasets) {
    validate(d);
    if (!names.insert(d.name).second) throw ValidationError("duplicate dataset name '" + d.name + "'");
  }
  return scenario;
}

Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  if (!std::filesystem::exists(path)) throw ValidationError("scenario file not found: " + path.string());
  return parse_scenario(read_file(path), seed_override);
}

std::string truth_to_json(const std::vector<DatasetTruth>& truths) {
  json root;
  root["format"] = "senm.truth";
  root["version"] = 1;
  json datasets = json::array();
  for (const auto& t : truths) {
    json d;
    d["name"] = t.name;
    d["full_negativity"] = t.full_negativity;
    d["active_negativity"] = t.active_negativity;
    d["active_fraction"] = t.active_fraction;
    d["top_hashtags_full"] = t.top_hashtags_full;
    d["top_hashtags_active"] = t.top_hashtags_active;
    json egos = json::array();
    for (const auto& e : t.egos) {
      json alters = json::array();
      for (const auto& a : e.alters)
        alters.push_back({{"id", a.alter_id},
                          {"level", a.level},
                          {"frequency", a.frequency},
                          {"sign", to_string(a.sign)},
                          {"interactions", a.interactions},
                          {"negative_labels", a.negative_labels}});
      egos.push_back({{"ego_id", e.ego_id}, {"optimum_circles", e.optimum_circles}, {"alters", std::move(alters)}});
    }
    d["egos"] = std::move(egos);
    datasets.push_back(std::move(d));
  }
  root["datasets"] = std::move(datasets);
  return root.dump(1) + "\n";
}

void write_generated(const std::filesystem::path& out_dir, const std::vector<GeneratedDataset>& datasets,
                     const std::vector<ScenarioConfig>& configs) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<DatasetEntry> entries;
  std::vector<DatasetTruth> truths;
  for (const auto& d : datasets) {
    const fs::path dir = out_dir / d.name;
    fs::create_directories(dir);
    for (const auto& timeline : d.timelines) write_file(dir / (timeline.ego_id + ".jsonl"), serialize_timeline(timeline));
    entries.push_back({d.name, fs::path(d.name)});
    truths.push_back(d.truth);
  }
  write_dataset_manifest(out_dir / "datasets.csv", entries);
  write_file(out_dir / "truth.json", truth_to_json(truths));

  std::map<std::string, Topic> labels;
  std::map<std::string, std::pair<std::string, std::string>> places;
  for (const auto& c : configs) {
    for (const auto& t : c.term_universe) labels.emplace(t.term, t.topic);
    for (const auto& l : c.locations)
      if (!l.country.empty()) places.emplace(l.text, std::pair{l.country, l.continent});
  }
  std::string labelmap = "term,topic\n";
  for (const auto& [term, topic] : labels) labelmap += csv_escape(term) + "," + std::string(to_string(topic)) + "\n";
  write_file(out_dir / "labelmap.csv", labelmap);
  if (!places.empty()) {
    std::string locations = "location,country,continent\n";
    for (const auto& [text, place] : places)
      locations += csv_escape(text) + "," + csv_escape(place.first) + "," + csv_escape(place.second) + "\n";
    write_file(out_dir / "locations.csv", locations);
  }
}

}  // namespace senm

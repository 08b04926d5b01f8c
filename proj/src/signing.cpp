#include "senm/signing.hpp"

#include <algorithm>
#include <unordered_map>

#include "senm/topics.hpp"

namespace senm {

std::string_view to_string(RelationshipSign sign) {
  switch (sign) {
    case RelationshipSign::positive: return "positive";
    case RelationshipSign::negative: return "negative";
    case RelationshipSign::unsigned_: return "unsigned";
  }
  return "unsigned";
}

PrecomputedProvider PrecomputedProvider::from_sidecar(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("sentiment sidecar not found: " + path.string());
  std::map<std::pair<std::string, std::size_t>, Sentiment> sidecar;
  const auto rows = read_csv(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 3) throw ValidationError(path.string() + ": row " + std::to_string(i + 1) + " needs 3 fields");
    if (i == 0 && trim(row[0]) == "ego_id") continue;
    const auto label = parse_sentiment(trim(row[2]));
    if (!label) throw ValidationError(path.string() + ": unknown label '" + row[2] + "'");
    std::size_t index = 0;
    try {
      index = std::stoul(trim(row[1]));
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ": bad interaction_index '" + row[1] + "'");
    }
    sidecar[{trim(row[0]), index}] = *label;
  }
  return PrecomputedProvider(std::move(sidecar));
}

Sentiment PrecomputedProvider::label(const InteractionRecord& record, std::size_t index) const {
  if (!sidecar_.empty()) {
    const auto it = sidecar_.find({record.ego_id, index});
    if (it != sidecar_.end()) return it->second;
  }
  if (record.sentiment) return *record.sentiment;
  throw MissingText();
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  Lexicon lexicon;
  const auto rows = read_csv(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 2) throw ValidationError(path.string() + ": row " + std::to_string(i + 1) + " needs token,valence");
    if (i == 0 && trim(row[0]) == "token") continue;
    double valence = 0.0;
    try {
      valence = std::stod(trim(row[1]));
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ": bad valence '" + row[1] + "'");
    }
    const std::string token = strip_token(row[0]);
    if (!token.empty()) lexicon[token] = valence;
  }
  return lexicon;
}

LexiconProvider::LexiconProvider(Lexicon default_lexicon, double threshold, std::map<std::string, Lexicon> by_language)
    : default_(std::move(default_lexicon)), by_language_(std::move(by_language)), threshold_(threshold) {}

LexiconProvider LexiconProvider::from_path(const std::filesystem::path& path, double threshold) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw ValidationError("lexicon not found: " + path.string());
  if (!fs::is_directory(path)) return LexiconProvider(load_lexicon(path), threshold);

  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(path))
    if (f.is_regular_file() && f.path().extension() == ".csv") files.push_back(f.path());
  std::sort(files.begin(), files.end());
  std::map<std::string, Lexicon> by_language;
  Lexicon fallback;
  bool has_default = false;
  for (const auto& f : files) {
    Lexicon lex = load_lexicon(f);
    const std::string stem = f.stem().string();
    if (stem == "default") {
      fallback = std::move(lex);
      has_default = true;
    } else {
      by_language[primary_language(stem)] = std::move(lex);
    }
  }
  if (!has_default)
    for (const auto& [lang, lex] : by_language)
      for (const auto& [token, valence] : lex) fallback.emplace(token, valence);
  return LexiconProvider(std::move(fallback), threshold, std::move(by_language));
}

double LexiconProvider::score(std::string_view text, const std::optional<std::string>& lang) const {
  const Lexicon* lexicon = &default_;
  if (lang) {
    const auto it = by_language_.find(primary_language(*lang));
    if (it != by_language_.end()) lexicon = &it->second;
  }
  double sum = 0.0;
  for (const auto& word : split_words(text)) {
    const std::string token = strip_token(word);
    if (const auto it = lexicon->find(token); it != lexicon->end()) sum += it->second;
  }
  return sum;
}

Sentiment LexiconProvider::label(const InteractionRecord& record, std::size_t) const {
  if (!record.has_text()) throw MissingText();
  const double sum = score(*record.text, record.lang);
  if (sum < -threshold_) return Sentiment::negative;
  if (sum > threshold_) return Sentiment::positive;
  return Sentiment::neutral;
}

ShiftedProvider::ShiftedProvider(std::shared_ptr<const SentimentProvider> base, double probability,
                                 std::uint64_t seed)
    : base_(std::move(base)), probability_(probability), seed_(seed) {
  if (!base_) throw ValidationError("shifted provider needs a base provider");
  if (!(probability >= 0.0 && probability <= 1.0)) throw ValidationError("shift probability must be in [0, 1]");
}

std::string ShiftedProvider::name() const { return "shifted(" + base_->name() + ")"; }

Sentiment ShiftedProvider::label(const InteractionRecord& record, std::size_t index) const {
  const Sentiment base = base_->label(record, index);
  if (base != Sentiment::neutral) return base;
  std::uint64_t h = hash_combine(seed_, hash_string(record.ego_id));
  h = hash_combine(h, index);
  h = hash_combine(h, static_cast<std::uint64_t>(record.timestamp));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < probability_ ? Sentiment::negative : Sentiment::neutral;
}

Sentiment label_interaction(const SentimentProvider& provider, const InteractionRecord& record, std::size_t index) {
  return provider.label(record, index);
}

RelationshipSign sign_from_counts(std::size_t negative, std::size_t labeled, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("sign threshold must be in (0, 1)");
  if (negative > labeled) throw ValidationError("negative count exceeds labeled count");
  if (labeled == 0) return RelationshipSign::unsigned_;
  const double fraction = static_cast<double>(negative) / static_cast<double>(labeled);
  return fraction > threshold ? RelationshipSign::negative : RelationshipSign::positive;
}

RelationshipSign sign_relationship(std::span<const Sentiment> labels, double threshold) {
  const auto negative = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Sentiment::negative));
  return sign_from_counts(negative, labels.size(), threshold);
}

std::vector<SignedRelationship> sign_relationships(const EgoTimeline& timeline,
                                                   std::span<const RelationshipAggregate> aggregates,
                                                   const SentimentProvider& provider, double threshold,
                                                   SigningDiagnostics* diagnostics) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<SignedRelationship> out;
  out.reserve(aggregates.size());
  for (const auto& a : aggregates) {
    slot.emplace(a.alter_id, out.size());
    out.push_back({timeline.ego_id, a.alter_id, 0, 0, RelationshipSign::unsigned_, std::nullopt});
  }

  SigningDiagnostics diag;
  for (std::size_t i = 0; i < timeline.records.size(); ++i) {
    const auto& record = timeline.records[i];
    bool relevant = false;
    for (const auto& alter : record.alter_ids) relevant = relevant || slot.contains(alter);
    if (!relevant) continue;
    Sentiment label;
    try {
      label = provider.label(record, i);
    } catch (const MissingText&) {
      ++diag.missing_text;
      continue;
    }
    ++diag.labeled;
    for (const auto& alter : record.alter_ids) {
      const auto it = slot.find(alter);
      if (it == slot.end()) continue;
      auto& rel = out[it->second];
      ++rel.labeled_count;
      if (label == Sentiment::negative) ++rel.negative_count;
    }
  }
  for (auto& rel : out) rel.sign = sign_from_counts(rel.negative_count, rel.labeled_count, threshold);
  if (diagnostics) {
    diagnostics->labeled += diag.labeled;
    diagnostics->missing_text += diag.missing_text;
  }
  return out;
}

SignedEgoNetwork build_senm(const CircleStructure& circles, std::vector<SignedRelationship> active,
                            std::vector<SignedRelationship> full) {
  for (auto& rel : active) {
    const auto it = circles.membership.find(rel.alter_id);
    if (it == circles.membership.end()) throw AlterMismatch(circles.ego_id, rel.alter_id);
    rel.circle_index = it->second;
  }
  if (active.size() != circles.membership.size()) {
    for (const auto& [alter, index] : circles.membership) {
      const bool signed_ = std::any_of(active.begin(), active.end(), [&](const auto& r) { return r.alter_id == alter; });
      if (!signed_) throw ValidationError("ego '" + circles.ego_id + "': alter '" + alter + "' has no signed relationship");
    }
  }
  // Full-network entries share the circle annotation of their active twin.
  for (auto& rel : full) {
    const auto it = circles.membership.find(rel.alter_id);
    rel.circle_index = it == circles.membership.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  }
  SignedEgoNetwork network;
  network.ego_id = circles.ego_id;
  network.circles = circles;
  network.relationships = std::move(active);
  network.full_relationships = std::move(full);
  return network;
}

}  // namespace senm

namespace senm {

SignedEgoNetwork sign_ego_network(const EgoTimeline& timeline, const UnsignedEgoNetwork& network,
                                  const SentimentProvider& provider, double threshold,
                                  SigningDiagnostics* diagnostics) {
  auto full = sign_relationships(timeline, network.full, provider, threshold, diagnostics);
  std::unordered_map<std::string_view, const SignedRelationship*> by_alter;
  for (const auto& rel : full) by_alter.emplace(rel.alter_id, &rel);
  std::vector<SignedRelationship> active;
  active.reserve(network.active.size());
  for (const auto& a : network.active) {
    const auto it = by_alter.find(a.alter_id);
    if (it == by_alter.end()) throw ValidationError("ego '" + network.ego_id + "': active alter missing from full network");
    active.push_back(*it->second);
  }
  if (network.circles) return build_senm(*network.circles, std::move(active), std::move(full));

  SignedEgoNetwork out;
  out.ego_id = network.ego_id;
  out.relationships = std::move(active);
  out.full_relationships = std::move(full);
  return out;
}

}  // namespace senm

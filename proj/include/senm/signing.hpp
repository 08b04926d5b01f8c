#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "senm/circles.hpp"
#include "senm/ingestion.hpp"

namespace senm {

class MissingText : public DataError {
 public:
  MissingText() : DataError("interaction has neither text nor a precomputed label") {}
};

class AlterMismatch : public DataError {
 public:
  AlterMismatch(const std::string& ego_id, const std::string& alter_id)
      : DataError("ego '" + ego_id + "': alter '" + alter_id + "' is signed but not in the circle structure") {}
};

/// Labels single interactions. Implementations must be deterministic and safe
/// for concurrent use. `index` is the record's position in its timeline.
class SentimentProvider {
 public:
  virtual ~SentimentProvider() = default;
  virtual std::string name() const = 0;
  /// Throws MissingText when the record cannot be labeled.
  virtual Sentiment label(const InteractionRecord& record, std::size_t index) const = 0;
};

/// Returns stored labels: the record's own `sentiment` field, or the sidecar
/// entry for (ego_id, index) when a sidecar is loaded (the sidecar wins).
class PrecomputedProvider final : public SentimentProvider {
 public:
  PrecomputedProvider() = default;
  explicit PrecomputedProvider(std::map<std::pair<std::string, std::size_t>, Sentiment> sidecar)
      : sidecar_(std::move(sidecar)) {}

  /// CSV rows: ego_id,interaction_index,label
  static PrecomputedProvider from_sidecar(const std::filesystem::path& path);

  std::string name() const override { return "precomputed"; }
  Sentiment label(const InteractionRecord& record, std::size_t index) const override;

 private:
  std::map<std::pair<std::string, std::size_t>, Sentiment> sidecar_;
};

using Lexicon = std::unordered_map<std::string, double>;

/// Reads `token,valence` rows; tokens are normalized on load.
Lexicon load_lexicon(const std::filesystem::path& path);

/// Sums token valences; negative below -threshold, positive above +threshold.
/// Per-language lexicons are chosen by the primary subtag of the record's
/// lang; the default lexicon covers everything else.
class LexiconProvider final : public SentimentProvider {
 public:
  explicit LexiconProvider(Lexicon default_lexicon, double threshold = 0.5,
                           std::map<std::string, Lexicon> by_language = {});

  /// `path` is either a single CSV or a directory of `<lang>.csv` files
  /// (`default.csv` or all files merged serve as the fallback).
  static LexiconProvider from_path(const std::filesystem::path& path, double threshold = 0.5);

  std::string name() const override { return "lexicon"; }
  Sentiment label(const InteractionRecord& record, std::size_t index) const override;
  double score(std::string_view text, const std::optional<std::string>& lang) const;

 private:
  Lexicon default_;
  std::map<std::string, Lexicon> by_language_;
  double threshold_;
};

/// Wraps another provider and relabels each neutral interaction as negative
/// with probability `probability`. The draw is a hash of (seed, ego, index,
/// timestamp), so results do not depend on evaluation order.
class ShiftedProvider final : public SentimentProvider {
 public:
  ShiftedProvider(std::shared_ptr<const SentimentProvider> base, double probability, std::uint64_t seed);

  std::string name() const override;
  Sentiment label(const InteractionRecord& record, std::size_t index) const override;

 private:
  std::shared_ptr<const SentimentProvider> base_;
  double probability_;
  std::uint64_t seed_;
};

Sentiment label_interaction(const SentimentProvider& provider, const InteractionRecord& record,
                            std::size_t index = 0);

enum class RelationshipSign { positive, negative, unsigned_ };
std::string_view to_string(RelationshipSign sign);

inline constexpr double kDefaultSignThreshold = 0.17;

/// Negative iff negative/labeled > threshold; the boundary itself is positive.
RelationshipSign sign_from_counts(std::size_t negative, std::size_t labeled, double threshold = kDefaultSignThreshold);
RelationshipSign sign_relationship(std::span<const Sentiment> labels, double threshold = kDefaultSignThreshold);

struct SignedRelationship {
  std::string ego_id;
  std::string alter_id;
  std::size_t labeled_count = 0;
  std::size_t negative_count = 0;
  RelationshipSign sign = RelationshipSign::unsigned_;
  std::optional<std::size_t> circle_index;

  bool operator==(const SignedRelationship&) const = default;
};

struct SigningDiagnostics {
  std::size_t labeled = 0;
  std::size_t missing_text = 0;
};

/// Labels every interaction of the timeline once and signs one relationship
/// per aggregate (in aggregate order).
std::vector<SignedRelationship> sign_relationships(const EgoTimeline& timeline,
                                                   std::span<const RelationshipAggregate> aggregates,
                                                   const SentimentProvider& provider,
                                                   double threshold = kDefaultSignThreshold,
                                                   SigningDiagnostics* diagnostics = nullptr);

struct SignedEgoNetwork {
  std::string ego_id;
  std::optional<CircleStructure> circles;  // empty for degenerate egos
  std::vector<SignedRelationship> relationships;       // active network
  std::vector<SignedRelationship> full_relationships;  // full network

  bool operator==(const SignedEgoNetwork&) const = default;
};

/// Attaches each active relationship to the innermost circle holding its
/// alter. Every alter in the circles must be signed and vice versa.
SignedEgoNetwork build_senm(const CircleStructure& circles, std::vector<SignedRelationship> active,
                            std::vector<SignedRelationship> full = {});

}  // namespace senm

namespace senm {

/// One ego after preprocessing and clustering, before signing.
struct UnsignedEgoNetwork {
  std::string ego_id;
  std::vector<RelationshipAggregate> full;
  std::vector<RelationshipAggregate> active;
  std::optional<CircleStructure> circles;  // empty when clustering was degenerate

  bool operator==(const UnsignedEgoNetwork&) const = default;
};

/// Signs the full network once and derives the active relationships from it.
SignedEgoNetwork sign_ego_network(const EgoTimeline& timeline, const UnsignedEgoNetwork& network,
                                  const SentimentProvider& provider, double threshold = kDefaultSignThreshold,
                                  SigningDiagnostics* diagnostics = nullptr);

}  // namespace senm

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "senm/ingestion.hpp"

namespace senm {

enum class TermKind { hashtag, word };
std::string_view to_string(TermKind kind);

enum class Topic { political, covid, climate, religious, news, general };
inline constexpr std::array<Topic, 6> kAllTopics = {Topic::political, Topic::covid,  Topic::climate,
                                                    Topic::religious, Topic::news,   Topic::general};
std::string_view to_string(Topic topic);
std::optional<Topic> parse_topic(std::string_view s);

class DegenerateVariance : public DataError {
 public:
  DegenerateVariance() : DataError("correlation input has zero variance") {}
};

/// Per-language stopword lists plus their union, used when a record carries
/// no (or an unknown) language tag.
class Stopwords {
 public:
  /// Loads every `<lang>.txt` in `dir` (one word per line, '#' comments).
  static Stopwords load_directory(const std::filesystem::path& dir);

  void add(const std::string& lang, std::string_view word);
  bool contains(std::string_view normalized_word, std::string_view lang = {}) const;
  bool empty() const { return merged_.empty(); }

 private:
  std::map<std::string, std::set<std::string, std::less<>>, std::less<>> by_language_;
  std::set<std::string, std::less<>> merged_;
};

/// Lowercase and strip combining marks (NFD), keeping punctuation and spacing.
std::string fold_text(std::string_view text);

/// Lowercase, strip diacritics, drop everything that is not a letter or digit.
std::string strip_token(std::string_view token);

/// Full term normalization. Words additionally drop stopwords and anything of
/// four letters or fewer; hashtags are exempt from both rules.
std::optional<std::string> normalize_token(std::string_view token, TermKind kind, const Stopwords* stopwords = nullptr,
                                           std::string_view lang = {});

/// Word segments of `text` on Unicode word boundaries, after removing
/// hashtags, @mentions and URLs. Segments are folded but not filtered.
std::vector<std::string> split_words(std::string_view text);

/// Primary language subtag in lowercase ("pt-BR" -> "pt").
std::string primary_language(std::string_view lang);

using TermCounts = std::map<std::string, std::size_t>;

/// Adds one record's normalized terms of `kind` to `counts` (per occurrence).
void count_terms(const InteractionRecord& record, TermKind kind, const Stopwords& stopwords, TermCounts& counts);

/// Term counts over a timeline. With `alters` set only records addressed to at
/// least one of those alters contribute.
void count_terms(const EgoTimeline& timeline, const std::set<std::string>* alters, TermKind kind,
                 const Stopwords& stopwords, TermCounts& counts);

struct TermStats {
  std::string term;
  TermKind kind = TermKind::hashtag;
  std::size_t mentions = 0;
  std::size_t rank = 0;  // 1-based
  std::optional<Topic> topic;

  bool operator==(const TermStats&) const = default;
};

struct TopTerms {
  std::vector<TermStats> terms;
  bool fewer_than_k = false;
};

/// The k most frequent terms, ties broken lexicographically.
TopTerms top_k_terms(const TermCounts& counts, TermKind kind, std::size_t k = 20);

using TopicMap = std::unordered_map<std::string, Topic>;

/// Reads `term,topic` rows; terms are normalized as hashtags.
TopicMap load_labelmap(const std::filesystem::path& path);

/// Unmapped terms are labeled general.
std::vector<TermStats> assign_topic_labels(std::vector<TermStats> terms, const TopicMap& labelmap);

struct CorrelationResult {
  double r = 0.0;
  std::size_t df = 0;
  double p_two_tailed = 1.0;
  std::string feature;
};

/// Pearson product-moment correlation with a two-tailed Student-t p value.
CorrelationResult pearson_with_p(std::span<const double> x, std::span<const double> y, std::string feature = {});

/// Topic composition of one dataset's labeled top hashtags.
struct TopicFeatures {
  std::string dataset;
  std::array<double, 6> counts{};       // entries with the topic
  std::array<double, 6> mentions{};     // their total mentions
  std::array<double, 6> proportions{};  // mentions / all top-k mentions
};

TopicFeatures topic_features(std::string dataset, std::span<const TermStats> labeled_top);

struct FeatureCorrelation {
  std::string feature;  // e.g. "general_count"
  std::optional<CorrelationResult> result;
  std::string note;     // why result is missing
};

/// Correlates every topic feature with `negativity` (one value per dataset).
std::vector<FeatureCorrelation> correlate_topic_features(std::span<const TopicFeatures> features,
                                                         std::span<const double> negativity);

}  // namespace senm

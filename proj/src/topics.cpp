#include "senm/topics.hpp"

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace senm {

std::string_view to_string(TermKind kind) { return kind == TermKind::hashtag ? "hashtag" : "word"; }

std::string_view to_string(Topic topic) {
  switch (topic) {
    case Topic::political: return "political";
    case Topic::covid: return "covid";
    case Topic::climate: return "climate";
    case Topic::religious: return "religious";
    case Topic::news: return "news";
    case Topic::general: return "general";
  }
  return "general";
}

std::optional<Topic> parse_topic(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Topic t : kAllTopics)
    if (to_string(t) == lower) return t;
  return std::nullopt;
}

namespace {

const icu::Normalizer2& nfd() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* instance = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status) || instance == nullptr) throw std::runtime_error("ICU NFD normalizer unavailable");
  return *instance;
}

bool is_mark(UChar32 c) {
  const auto type = u_charType(c);
  return type == U_NON_SPACING_MARK || type == U_COMBINING_SPACING_MARK || type == U_ENCLOSING_MARK;
}

bool is_letter_or_digit(UChar32 c) {
  switch (u_charType(c)) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
      return true;
    default:
      return false;
  }
}

template <class Keep>
icu::UnicodeString fold(std::string_view text, Keep keep) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const icu::UnicodeString decomposed = nfd().normalize(u, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
  icu::UnicodeString out;
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 c = decomposed.char32At(i);
    i += U16_LENGTH(c);
    if (keep(c)) out.append(c);
  }
  return out;
}

std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

bool is_link_or_handle(std::string_view token) {
  return token.starts_with('#') || token.starts_with('@') || token.starts_with("http://") ||
         token.starts_with("https://") || token.starts_with("www.") || token.starts_with("\xEF\xBC\x83");
}

}  // namespace

std::string fold_text(std::string_view text) {
  return to_utf8(fold(text, [](UChar32 c) { return !is_mark(c); }));
}

std::string strip_token(std::string_view token) { return to_utf8(fold(token, is_letter_or_digit)); }

std::string primary_language(std::string_view lang) {
  std::string out;
  for (char c : lang) {
    if (c == '-' || c == '_') break;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

void Stopwords::add(const std::string& lang, std::string_view word) {
  std::string normalized = strip_token(word);
  if (normalized.empty()) return;
  by_language_[primary_language(lang)].insert(normalized);
  merged_.insert(std::move(normalized));
}

bool Stopwords::contains(std::string_view normalized_word, std::string_view lang) const {
  if (!lang.empty()) {
    const auto it = by_language_.find(primary_language(lang));
    if (it != by_language_.end()) return it->second.contains(normalized_word);
  }
  return merged_.contains(normalized_word);
}

Stopwords Stopwords::load_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError("stopword directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(dir))
    if (f.is_regular_file() && f.path().extension() == ".txt") files.push_back(f.path());
  std::sort(files.begin(), files.end());
  Stopwords stopwords;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    while (std::getline(in, line)) {
      const std::string word = trim(line);
      if (word.empty() || word.front() == '#') continue;
      stopwords.add(f.stem().string(), word);
    }
  }
  return stopwords;
}

std::optional<std::string> normalize_token(std::string_view token, TermKind kind, const Stopwords* stopwords,
                                           std::string_view lang) {
  std::string normalized = strip_token(token);
  if (normalized.empty()) return std::nullopt;
  if (kind == TermKind::word) {
    const icu::UnicodeString u = icu::UnicodeString::fromUTF8(normalized);
    if (u.countChar32() <= 4) return std::nullopt;
    if (stopwords && stopwords->contains(normalized, lang)) return std::nullopt;
  }
  return normalized;
}

std::vector<std::string> split_words(std::string_view text) {
  std::string kept;
  kept.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = text.find_first_not_of(" \t\r\n", pos);
    if (start == std::string_view::npos) break;
    std::size_t end = text.find_first_of(" \t\r\n", start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view token = text.substr(start, end - start);
    if (!is_link_or_handle(token)) {
      kept.append(token);
      kept.push_back(' ');
    }
    pos = end;
  }

  const icu::UnicodeString folded = fold(kept, [](UChar32 c) { return !is_mark(c); });

  thread_local std::unique_ptr<icu::BreakIterator> iterator = [] {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> it(icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), status));
    if (U_FAILURE(status)) throw std::runtime_error("ICU word break iterator unavailable");
    return it;
  }();
  iterator->setText(folded);

  std::vector<std::string> words;
  int32_t start = iterator->first();
  for (int32_t end = iterator->next(); end != icu::BreakIterator::DONE; start = end, end = iterator->next()) {
    if (iterator->getRuleStatus() < UBRK_WORD_NONE_LIMIT) continue;
    words.push_back(to_utf8(icu::UnicodeString(folded, start, end - start)));
  }
  return words;
}

void count_terms(const InteractionRecord& record, TermKind kind, const Stopwords& stopwords, TermCounts& counts) {
  const std::string_view lang = record.lang ? std::string_view(*record.lang) : std::string_view{};
  if (kind == TermKind::hashtag) {
    for (const auto& tag : record.hashtags)
      if (auto t = normalize_token(tag, TermKind::hashtag)) ++counts[*t];
    return;
  }
  if (!record.has_text()) return;
  for (const auto& word : split_words(*record.text))
    if (auto t = normalize_token(word, TermKind::word, &stopwords, lang)) ++counts[*t];
}

void count_terms(const EgoTimeline& timeline, const std::set<std::string>* alters, TermKind kind,
                 const Stopwords& stopwords, TermCounts& counts) {
  for (const auto& record : timeline.records) {
    if (alters) {
      const bool in_scope = std::any_of(record.alter_ids.begin(), record.alter_ids.end(),
                                        [&](const std::string& a) { return alters->contains(a); });
      if (!in_scope) continue;
    }
    count_terms(record, kind, stopwords, counts);
  }
}

TopTerms top_k_terms(const TermCounts& counts, TermKind kind, std::size_t k) {
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
  std::erase_if(entries, [](const auto& e) { return e.second == 0; });
  // counts is ordered by term, so a stable sort on mentions keeps ties lexicographic.
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  TopTerms top;
  top.fewer_than_k = entries.size() < k;
  const std::size_t n = std::min(k, entries.size());
  for (std::size_t i = 0; i < n; ++i)
    top.terms.push_back({entries[i].first, kind, entries[i].second, i + 1, std::nullopt});
  return top;
}

TopicMap load_labelmap(const std::filesystem::path& path) {
  TopicMap map;
  const auto rows = read_csv(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 2) throw ValidationError(path.string() + ": row " + std::to_string(i + 1) + " needs term,topic");
    if (i == 0 && trim(row[0]) == "term") continue;
    const auto topic = parse_topic(trim(row[1]));
    if (!topic) throw ValidationError(path.string() + ": unknown topic '" + row[1] + "'");
    if (auto term = normalize_token(row[0], TermKind::hashtag)) map.emplace(*term, *topic);
  }
  return map;
}

std::vector<TermStats> assign_topic_labels(std::vector<TermStats> terms, const TopicMap& labelmap) {
  for (auto& t : terms) {
    const auto it = labelmap.find(t.term);
    t.topic = it == labelmap.end() ? Topic::general : it->second;
  }
  return terms;
}

CorrelationResult pearson_with_p(std::span<const double> x, std::span<const double> y, std::string feature) {
  if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw ValidationError("correlation needs at least three observations");

  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateVariance();

  CorrelationResult result;
  result.feature = std::move(feature);
  result.df = n - 2;
  result.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double one_minus_r2 = 1.0 - result.r * result.r;
  if (one_minus_r2 <= 0.0) {
    result.p_two_tailed = 0.0;
  } else if (result.df == 0) {
    result.p_two_tailed = 1.0;
  } else {
    const double t = result.r * std::sqrt(static_cast<double>(result.df) / one_minus_r2);
    const boost::math::students_t dist(static_cast<double>(result.df));
    result.p_two_tailed = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  return result;
}

TopicFeatures topic_features(std::string dataset, std::span<const TermStats> labeled_top) {
  TopicFeatures f;
  f.dataset = std::move(dataset);
  double total = 0.0;
  for (const auto& t : labeled_top) {
    const auto slot = static_cast<std::size_t>(t.topic.value_or(Topic::general));
    f.counts[slot] += 1.0;
    f.mentions[slot] += static_cast<double>(t.mentions);
    total += static_cast<double>(t.mentions);
  }
  if (total > 0.0)
    for (std::size_t i = 0; i < f.proportions.size(); ++i) f.proportions[i] = f.mentions[i] / total;
  return f;
}

std::vector<FeatureCorrelation> correlate_topic_features(std::span<const TopicFeatures> features,
                                                         std::span<const double> negativity) {
  if (features.size() != negativity.size()) throw ValidationError("one negativity value per dataset is required");
  std::vector<FeatureCorrelation> out;
  const std::array<std::pair<const char*, std::array<double, 6> TopicFeatures::*>, 3> columns = {{
      {"count", &TopicFeatures::counts},
      {"mentions", &TopicFeatures::mentions},
      {"proportion", &TopicFeatures::proportions},
  }};
  for (Topic topic : kAllTopics) {
    const auto slot = static_cast<std::size_t>(topic);
    for (const auto& [suffix, member] : columns) {
      FeatureCorrelation fc;
      fc.feature = std::string(to_string(topic)) + "_" + suffix;
      std::vector<double> x;
      for (const auto& f : features) x.push_back((f.*member)[slot]);
      if (x.size() < 3) {
        fc.note = "fewer than 3 datasets";
      } else {
        try {
          fc.result = pearson_with_p(x, negativity, fc.feature);
        } catch (const DegenerateVariance&) {
          fc.note = "zero variance";
        }
      }
      out.push_back(std::move(fc));
    }
  }
  return out;
}

}  // namespace senm

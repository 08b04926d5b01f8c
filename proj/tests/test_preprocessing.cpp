#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "senm/preprocessing.hpp"
#include "senm/simgen.hpp"
#include "support.hpp"

using namespace senm;

namespace {

// 2021 month starts, in days after 2021-01-01.
constexpr std::array<int, 12> kMonthStartDay = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};

EgoTimeline posts_only(const std::string& ego, std::vector<Timestamp> posts) {
  std::sort(posts.begin(), posts.end());
  return test::timeline(ego, {}, std::move(posts));
}

std::vector<Timestamp> evenly(std::size_t n, Timestamp from, Timestamp to) {
  std::vector<Timestamp> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(from + static_cast<Timestamp>(static_cast<double>(to - from) * static_cast<double>(i) /
                                                static_cast<double>(n - 1)));
  return out;
}

// Posts per 2021 month as given, placed inside the first 27 days of each month.
EgoTimeline by_month(const std::array<std::size_t, 12>& counts) {
  std::vector<Timestamp> posts;
  for (std::size_t m = 0; m < 12; ++m) {
    const Timestamp base = test::kJan2021 + kMonthStartDay[m] * kSecondsPerDay;
    for (std::size_t i = 0; i < counts[m]; ++i)
      posts.push_back(base + static_cast<Timestamp>(i % (27 * 24)) * 3600);
  }
  return posts_only("m", posts);
}

EgoTimeline random_timeline(std::mt19937_64& rng, const std::string& ego) {
  std::uniform_int_distribution<int> posts(1500, 3000), span_days(60, 500), alters(1, 30);
  std::uniform_real_distribution<double> ratio(0.0, 0.6);
  const Timestamp start = test::kJan2021;
  const Timestamp end = start + span_days(rng) * kSecondsPerDay;
  const int total = posts(rng);
  const int interactions = static_cast<int>(ratio(rng) * total);
  const int alter_count = alters(rng);
  std::vector<InteractionRecord> records;
  std::vector<Timestamp> plain;
  // Skewed timestamps so that some months end up sparse.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double skew = 1.0 + 4.0 * u(rng);
  auto draw = [&] { return start + static_cast<Timestamp>(std::pow(u(rng), skew) * static_cast<double>(end - start)); };
  std::uniform_int_distribution<int> pick(0, alter_count - 1);
  for (int i = 0; i < interactions; ++i) records.push_back(test::record(ego, {"a" + std::to_string(pick(rng))}, draw()));
  for (int i = interactions; i < total; ++i) plain.push_back(draw());
  plain.push_back(start);
  plain.push_back(end);
  return test::timeline(ego, std::move(records), std::move(plain));
}

}  // namespace

TEST_CASE("fewer than 2000 posts is excluded") {
  const auto t = posts_only("e", evenly(1999, test::kJan2021, test::kJan2021 + 365 * kSecondsPerDay));
  const auto v = check_activity(t);
  CHECK_FALSE(v.kept);
  CHECK(v.has(ExclusionReason::too_few_tweets));
  CHECK_FALSE(v.has(ExclusionReason::too_short_span));
  CHECK_FALSE(v.has(ExclusionReason::too_sparse_months));
  CHECK(check_activity(posts_only("e", evenly(2000, test::kJan2021, test::kJan2021 + 365 * kSecondsPerDay))).kept);
}

TEST_CASE("a 100 day span is too short") {
  const auto v = check_activity(posts_only("e", evenly(2500, test::kJan2021, test::kJan2021 + 100 * kSecondsPerDay)));
  CHECK(v.has(ExclusionReason::too_short_span));
  CHECK_FALSE(v.has(ExclusionReason::too_few_tweets));
  CHECK_FALSE(v.has(ExclusionReason::too_sparse_months));
}

TEST_CASE("sparse calendar months") {
  std::array<std::size_t, 12> counts{};
  const std::set<std::size_t> sparse = {1, 3, 5, 7, 9, 10, 11};
  std::size_t placed = 0;
  for (std::size_t m = 0; m < 12; ++m)
    if (sparse.contains(m)) counts[m] = 3, placed += 3;
  for (std::size_t m = 0, left = 2500 - placed, dense = 5; m < 12; ++m)
    if (!sparse.contains(m)) {
      counts[m] = left / dense;
      left -= counts[m];
      --dense;
    }
  const auto t = by_month(counts);
  REQUIRE(t.total_posts() == 2500);
  CHECK(monthly_post_counts(t) == std::vector<std::size_t>(counts.begin(), counts.end()));
  const auto v = check_activity(t);
  CHECK(v.has(ExclusionReason::too_sparse_months));
  CHECK_FALSE(v.has(ExclusionReason::too_few_tweets));
  CHECK_FALSE(v.has(ExclusionReason::too_short_span));

  // Exactly half the months sparse is still allowed.
  std::array<std::size_t, 12> half{};
  for (std::size_t m = 0; m < 12; ++m) half[m] = m % 2 ? 3 : 420;
  CHECK_FALSE(check_activity(by_month(half)).has(ExclusionReason::too_sparse_months));
}

TEST_CASE("monthly counts include empty months in the span") {
  const auto t = posts_only("e", {test::kJan2021, test::kJan2021 + 70 * kSecondsPerDay});  // Jan and Mar
  CHECK(monthly_post_counts(t) == std::vector<std::size_t>{1, 0, 1});
}

TEST_CASE("classifier") {
  ClassifierPolicy external;
  external.external_labels = std::unordered_map<std::string, EgoLabel>{{"42", EgoLabel::other}, {"7", EgoLabel::person}};
  CHECK(classify_ego(test::timeline("42", {}, {1, 2}), external) == EgoLabel::other);
  CHECK(classify_ego(test::timeline("7", {}, {1, 2}), external) == EgoLabel::person);
  CHECK_THROWS_AS(classify_ego(test::timeline("8", {}, {1, 2}), external), ClassifierUnavailable);

  const ClassifierPolicy heuristic;
  CHECK(classify_ego(posts_only("bot", evenly(100000, test::kJan2021, test::kJan2021 + 30 * kSecondsPerDay)),
                     heuristic) == EgoLabel::other);

  std::vector<InteractionRecord> records;
  const auto stamps = evenly(3000, test::kJan2021, test::kJan2021 + 730 * kSecondsPerDay);
  std::vector<Timestamp> plain;
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    if (i % 5 < 2)
      records.push_back(test::record("p", {"a"}, stamps[i]));
    else
      plain.push_back(stamps[i]);
  }
  CHECK(classify_ego(test::timeline("p", records, plain), heuristic) == EgoLabel::person);

  // Almost nothing but broadcasts.
  CHECK(classify_ego(posts_only("news", evenly(3000, test::kJan2021, test::kJan2021 + 730 * kSecondsPerDay)),
                     heuristic) == EgoLabel::other);
}

TEST_CASE("ego labels file") {
  test::TempDir dir;
  write_file(dir / "labels.csv", "ego_id,label\n42,other\n7,person\n");
  const auto labels = load_ego_labels(dir / "labels.csv");
  CHECK(labels.at("42") == EgoLabel::other);
  CHECK(labels.at("7") == EgoLabel::person);
  write_file(dir / "bad.csv", "1,robot\n");
  CHECK_THROWS_AS(load_ego_labels(dir / "bad.csv"), ValidationError);
}

TEST_CASE("annualized frequency") {
  const Timestamp t0 = test::kJan2021;
  const auto year = static_cast<Timestamp>(kSecondsPerYear);
  std::vector<InteractionRecord> records;
  for (int i = 0; i < 12; ++i) records.push_back(test::record("e", {"a"}, t0 + i * (year / 12)));
  auto aggs = aggregate_relationships(test::timeline("e", records, {t0 + year}));
  REQUIRE(aggs.size() == 1);
  CHECK(aggs[0].interaction_count == 12);
  CHECK(aggs[0].annualized_frequency == doctest::Approx(12.0).epsilon(1e-12));

  // A brand-new relationship hits the one-month floor.
  aggs = aggregate_relationships(test::timeline("e", {test::record("e", {"b"}, t0)}, {t0 + 2 * kSecondsPerDay}));
  REQUIRE(aggs.size() == 1);
  CHECK(aggs[0].annualized_frequency == doctest::Approx(12.0).epsilon(1e-12));

  CHECK(aggregate_relationships(test::timeline("e", {}, {t0})).empty());
}

TEST_CASE("aggregates cover multi-alter records and count text") {
  const auto t = test::timeline("e",
                                {test::record("e", {"b", "a"}, 100, std::nullopt, "hello"),
                                 test::record("e", {"a"}, 200)},
                                {300});
  const auto aggs = aggregate_relationships(t);
  REQUIRE(aggs.size() == 2);
  CHECK(aggs[0].alter_id == "a");
  CHECK(aggs[0].interaction_count == 2);
  CHECK(aggs[0].first_ts == 100);
  CHECK(aggs[0].last_ts == 200);
  CHECK(aggs[0].text_interactions == 1);
  CHECK(aggs[1].alter_id == "b");
  CHECK(aggs[1].interaction_count == 1);
}

TEST_CASE("split keeps exactly once a year") {
  std::vector<RelationshipAggregate> aggs(3);
  aggs[0].alter_id = "x", aggs[0].annualized_frequency = 2.0;
  aggs[1].alter_id = "y", aggs[1].annualized_frequency = 1.0;
  aggs[2].alter_id = "z", aggs[2].annualized_frequency = 0.9;
  const auto split = split_full_active(aggs);
  CHECK(split.full.size() == 3);
  REQUIRE(split.active.size() == 2);
  CHECK(split.active[0].alter_id == "x");
  CHECK(split.active[1].alter_id == "y");

  const auto empty = split_full_active({});
  CHECK(empty.full.empty());
  CHECK(empty.active.empty());
}

TEST_CASE("generated frequencies match the truth manifest") {
  ScenarioConfig c;
  c.ego_count = 20;
  c.circle_levels = {{1.0, 52.0}, {2.0, 12.0}};
  c.negativity_by_level = {0.5, 0.5};
  c.frequency_noise = 0.0;
  c.inactive_fraction = 1.0 / 3.0;
  c.min_age_fraction = 1.0;
  c.max_age_fraction = 1.0;
  c.noncommunicative_posts = 10;
  const auto data = generate_dataset(c);
  const double planted[] = {52.0, 12.0, 0.5};
  for (std::size_t e = 0; e < data.timelines.size(); ++e) {
    const auto aggs = aggregate_relationships(data.timelines[e]);
    const auto& truth = data.truth.egos[e].alters;
    REQUIRE(aggs.size() == 3);
    REQUIRE(truth.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(aggs[i].alter_id == truth[i].alter_id);
      CHECK(aggs[i].annualized_frequency == doctest::Approx(truth[i].frequency).epsilon(0.01));
      CHECK(aggs[i].annualized_frequency == doctest::Approx(planted[i]).epsilon(0.01));
      CHECK(aggs[i].interaction_count == truth[i].interactions);
    }
  }
}

TEST_CASE("planted sub-annual share gives a 70 percent active network") {
  ScenarioConfig c;
  c.ego_count = 100;
  c.seed = 17;
  const auto data = generate_dataset(c);
  std::size_t full = 0, active = 0, planted_active = 0;
  for (const auto& t : data.timelines) {
    const auto split = split_full_active(aggregate_relationships(t));
    full += split.full.size();
    active += split.active.size();
  }
  for (const auto& ego : data.truth.egos)
    for (const auto& a : ego.alters) planted_active += a.level >= 0;
  const double fraction = static_cast<double>(active) / static_cast<double>(full);
  CHECK(fraction == doctest::Approx(0.70).epsilon(0.02 / 0.70));
  CHECK(data.truth.active_fraction == doctest::Approx(fraction).epsilon(1e-12));
  CHECK(active == planted_active);
}

TEST_CASE("active network shrinks as the threshold rises") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto aggs = aggregate_relationships(random_timeline(rng, "e"));
    std::size_t previous = aggs.size() + 1;
    for (double threshold : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 1e6}) {
      const auto split = split_full_active(aggs, threshold);
      CHECK(split.full.size() == aggs.size());
      for (const auto& a : split.active)
        CHECK(std::any_of(split.full.begin(), split.full.end(), [&](const auto& f) { return f == a; }));
      CHECK(split.active.size() <= previous);
      previous = split.active.size();
    }
  }
}

TEST_CASE("check_activity ignores record order") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    auto t = random_timeline(rng, "e");
    const auto reference = check_activity(t);
    std::shuffle(t.records.begin(), t.records.end(), rng);
    std::shuffle(t.noncommunicative_posts.begin(), t.noncommunicative_posts.end(), rng);
    const auto again = check_activity(t);
    CHECK(again.kept == reference.kept);
    CHECK(again.reasons == reference.reasons);
  }
}

TEST_CASE("filter order does not change the surviving egos") {
  std::mt19937_64 rng(23);
  std::vector<EgoTimeline> egos;
  for (int i = 0; i < 60; ++i) egos.push_back(random_timeline(rng, "e" + std::to_string(i)));
  const ClassifierPolicy classifier;
  const ActivityPolicy activity;

  using Filter = std::function<bool(const EgoTimeline&)>;
  std::vector<Filter> filters = {
      [&](const EgoTimeline& t) { return classify_ego(t, classifier) == EgoLabel::person; },
      [&](const EgoTimeline& t) { return check_activity(t, activity).kept; },
      [&](const EgoTimeline& t) { return !split_full_active(aggregate_relationships(t)).active.empty(); },
  };
  std::vector<std::size_t> order = {0, 1, 2};
  std::optional<std::set<std::string>> reference;
  do {
    std::vector<const EgoTimeline*> pool;
    for (const auto& e : egos) pool.push_back(&e);
    for (std::size_t f : order)
      std::erase_if(pool, [&](const EgoTimeline* t) { return !filters[f](*t); });
    std::set<std::string> ids;
    for (const auto* t : pool) ids.insert(t->ego_id);
    if (!reference) reference = ids;
    CHECK(ids == *reference);
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(reference->size() < egos.size());
}

TEST_CASE("evaluate_ego combines both verdicts") {
  const auto t = posts_only("e", evenly(1999, test::kJan2021, test::kJan2021 + 365 * kSecondsPerDay));
  const auto v = evaluate_ego(t, ActivityPolicy{}, ClassifierPolicy{});
  CHECK(v.has(ExclusionReason::too_few_tweets));
  CHECK(v.has(ExclusionReason::not_person));  // no interactions at all
  CHECK_FALSE(v.kept);
}

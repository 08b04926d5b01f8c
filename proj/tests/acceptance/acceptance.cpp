// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "senm/pipeline.hpp"
#include "senm/simgen.hpp"
#include "support.hpp"

using namespace senm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "senm");
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& f : fs::recursive_directory_iterator(root))
    if (f.is_regular_file()) files[fs::relative(f.path(), root).string()] = read_file(f.path());
  return files;
}

// Expected negativity of nested circle k given ring sizes and per-ring rates.
std::vector<double> nested_plant(const ScenarioConfig& c) {
  std::vector<double> out;
  double previous = 0.0, negatives = 0.0;
  for (std::size_t k = 0; k < c.circle_levels.size(); ++k) {
    const double ring = c.circle_levels[k].cumulative_size - previous;
    previous = c.circle_levels[k].cumulative_size;
    negatives += ring * c.negativity_by_level[k];
    out.push_back(100.0 * negatives / previous);
  }
  return out;
}

Outcome sign_threshold_exactness() {
  const auto start = Clock::now();
  std::size_t checked = 0, wrong = 0;
  for (std::size_t total = 0; total <= 50; ++total) {
    for (std::size_t neg = 0; neg <= total; ++neg) {
      // neg / total > 17 / 100, in integers.
      const auto expected = total == 0                ? RelationshipSign::unsigned_
                            : neg * 100 > 17 * total ? RelationshipSign::negative
                                                     : RelationshipSign::positive;
      std::vector<Sentiment> labels(neg, Sentiment::negative);
      labels.resize(total, Sentiment::positive);
      wrong += sign_relationship(labels) != expected;
      wrong += sign_from_counts(neg, total) != expected;
      ++checked;
    }
  }
  const double elapsed = seconds_since(start);
  return {wrong == 0 && elapsed < 1.0, fmt("%zu pairs, %zu mismatches, %.3f s", checked, wrong, elapsed)};
}

struct RecoveryRun {
  GeneratedDataset data;
  std::vector<SignedEgoNetwork> egos;
  double seconds = 0.0;
};

RecoveryRun recovery_run(const ScenarioConfig& config) {
  const auto start = Clock::now();
  RecoveryRun run;
  run.data = generate_dataset(config, 1);
  run.egos = test::sign_dataset(run.data.timelines, PrecomputedProvider{});
  run.seconds = seconds_since(start);
  return run;
}

ScenarioConfig recovery_config() {
  ScenarioConfig c;  // ratio-3 levels at 1.5/5/15/45/135, sigma 0.15
  c.name = "recovery";
  c.ego_count = 200;
  c.seed = 2024;
  c.negativity_by_level = {0.8, 0.7, 0.6, 0.5, 0.4};
  return c;
}

Outcome meanshift_recovery(const RecoveryRun& run) {
  std::size_t five = 0, alters = 0, matched = 0;
  for (std::size_t e = 0; e < run.egos.size(); ++e) {
    const auto& circles = run.egos[e].circles;
    five += circles && circles->optimum_circles == 5;
    for (const auto& a : run.data.truth.egos[e].alters) {
      if (a.level < 0) continue;
      ++alters;
      matched += circles && circles->membership.at(a.alter_id) == static_cast<std::size_t>(a.level);
    }
  }
  const double ego_share = static_cast<double>(five) / static_cast<double>(run.egos.size());
  const double alter_share = static_cast<double>(matched) / static_cast<double>(alters);
  return {ego_share >= 0.95 && alter_share >= 0.95 && run.seconds < 10.0,
          fmt("%.1f%% egos with 5 circles, %.2f%% of %zu alters at planted level, %.2f s", 100 * ego_share,
              100 * alter_share, alters, run.seconds)};
}

Outcome circle_size_shape(const RecoveryRun& run) {
  const std::vector<double> target = {1.5, 5, 15, 45, 135};
  const auto sizes = mean_circle_sizes(run.egos, 5);
  bool ok = true;
  std::string detail;
  for (std::size_t k = 0; k < 5; ++k) {
    ok = ok && std::abs(sizes[k] - target[k]) <= 0.10 * target[k];
    detail += fmt("%s%.2f", k ? " / " : "", sizes[k]);
  }
  return {ok, "mean nested sizes " + detail};
}

std::vector<ScenarioConfig> gradient_family() {
  std::vector<ScenarioConfig> out;
  const std::vector<std::vector<double>> gradients = {
      {0.8, 0.7, 0.6, 0.5, 0.4}, {0.6, 0.5, 0.45, 0.4, 0.35}, {0.4, 0.35, 0.3, 0.25, 0.2}, {0.9, 0.6, 0.4, 0.3, 0.2}};
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    ScenarioConfig c;
    c.name = "gradient" + std::to_string(i);
    c.ego_count = 50;
    c.seed = 100 + i;
    c.negativity_by_level = gradients[i];
    c.inactive_negativity = gradients[i].back() * 0.5;
    out.push_back(c);
  }
  return out;
}

Outcome full_to_active_increase(const std::vector<std::vector<SignedEgoNetwork>>& datasets) {
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto row = full_vs_active_row("d", datasets[i]);
    ok = ok && row.delta > 0.0;
    detail += fmt("%s%+.2f", i ? ", " : "", row.delta);
  }
  return {ok, "active - full per dataset: " + detail};
}

Outcome per_circle_gradient(const RecoveryRun& run) {
  const auto expected = nested_plant(recovery_config());
  const auto rows = per_circle_negativity(run.egos, 5);
  bool ok = true;
  std::string detail;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ok = ok && std::abs(rows[k].percentage - expected[k]) <= 5.0;
    if (k > 0) ok = ok && rows[k].percentage < rows[k - 1].percentage;
    detail += fmt("%s%.2f (%.2f)", k ? ", " : "", rows[k].percentage, expected[k]);
  }
  return {ok, "recovered (planted) %: " + detail};
}

Outcome pearson_oracle() {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  const std::vector<double> y = {6, 6, 6, 3, 9, 1, 7, 2, 0, 2, 1};
  const auto r = pearson_with_p(x, y);
  bool ok = r.df == 9 && std::abs(r.p_two_tailed - 0.035) <= 0.001 && std::round(r.r * 100) == -64;

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> coef(0.1, 10.0), shift(-100.0, 100.0);
  std::size_t failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = test::random_vector(rng, 11);
    const auto b = test::random_vector(rng, 11);
    const auto base = pearson_with_p(a, b);
    const auto swapped = pearson_with_p(b, a);
    std::vector<double> scaled(a);
    const double s = coef(rng) * (trial % 2 ? 1.0 : -1.0), t = shift(rng);
    for (auto& v : scaled) v = s * v + t;
    const auto affine = pearson_with_p(scaled, b);
    const double sign = s > 0 ? 1.0 : -1.0;
    const bool good = std::abs(swapped.r - base.r) < 1e-12 && std::abs(swapped.p_two_tailed - base.p_two_tailed) < 1e-12 &&
                      std::abs(affine.r - sign * base.r) < 1e-9 &&
                      std::abs(affine.p_two_tailed - base.p_two_tailed) < 1e-9;
    failures += !good;
  }
  ok = ok && failures == 0;
  return {ok, fmt("r = %.4f, df = %zu, p = %.5f; %zu of 1000 property failures", r.r, r.df, r.p_two_tailed, failures)};
}

Outcome ci_oracle() {
  const std::vector<int> v = {4, 5, 6};
  const auto s = mean_optimum_circles(v);
  bool ok = std::abs(s.mean - 5.0) < 1e-12 && std::abs(s.ci_high - 5.0 - 2.484) <= 1e-3 &&
            std::abs(5.0 - s.ci_low - 2.484) <= 1e-3;

  std::mt19937_64 rng(7);
  std::discrete_distribution<int> counts({0, 0, 1, 3, 6, 10, 5, 2});
  auto mean_width = [&](std::size_t n) {
    double total = 0.0;
    for (int rep = 0; rep < 500; ++rep) {
      std::vector<int> sample(n);
      for (auto& x : sample) x = counts(rng);
      const auto summary = mean_optimum_circles(sample);
      total += summary.ci_high - summary.ci_low;
    }
    return total / 500.0;
  };
  const double w25 = mean_width(25), w100 = mean_width(100), w400 = mean_width(400);
  const double r1 = w25 / w100, r2 = w100 / w400;
  ok = ok && std::abs(r1 - 2.0) <= 0.3 && std::abs(r2 - 2.0) <= 0.3;
  return {ok, fmt("{4,5,6}: %.4f +- %.4f; width ratios 25/100 = %.3f, 100/400 = %.3f", s.mean, s.ci_high - s.mean, r1, r2)};
}

// Six general-heavy calm datasets and six topic-heavy hostile ones.
std::string topic_scenario() {
  std::string datasets;
  for (int i = 0; i < 12; ++i) {
    const bool specific = i >= 6;
    const int step = i % 6;
    const double general_scale = specific ? 0.25 + 0.05 * step : 1.0 + 0.2 * step;
    const double topic_scale = specific ? 1.5 + 0.2 * step : 0.15 + 0.03 * step;
    const double neg = specific ? 0.55 + 0.03 * step : 0.2 + 0.03 * step;
    datasets += fmt(R"(%s{"name": "%s%d", "ego_count": 10, "inactive_negativity": %.2f,
        "negativity_by_level": [%.2f, %.2f, %.2f, %.2f, %.2f], "hashtag_rate": 1.0,
        "term_universe": [{"zipf": {"prefix": "chat", "count": 25, "topic": "general", "scale": %.2f}},
                          {"zipf": {"prefix": "vote", "count": 12, "topic": "political", "scale": %.2f}},
                          {"zipf": {"prefix": "virus", "count": 8, "topic": "covid", "scale": %.2f}}]})",
                    i ? ",\n" : "", specific ? "themed" : "generic", step, neg, neg + 0.1, neg + 0.05, neg, neg - 0.05,
                    neg - 0.1, general_scale, topic_scale, topic_scale * 0.5);
  }
  return "{\"seed\": 88, \"datasets\": [\n" + datasets + "]}\n";
}

Outcome topic_correlation(const fs::path& work) {
  write_file(work / "topics.json", topic_scenario());
  if (run_cli({"simulate", "--scenario", (work / "topics.json").string(), "--out", (work / "topics-data").string()}) != 0)
    return {false, "simulate failed"};
  if (run_cli({"pipeline", "--data", (work / "topics-data").string(), "--out", (work / "topics-out").string()}) != 0)
    return {false, "pipeline failed"};
  for (const auto& row : read_csv(work / "topics-out" / "correlations.csv")) {
    if (row.empty() || row[0] != "general_count") continue;
    if (row.size() < 5 || row[2].empty() || row[2] == "NA") return {false, "general_count not computed"};
    const double r = std::stod(row[2]), p = std::stod(row[4]);
    return {r < 0.0 && p < 0.05, fmt("general_count: n = %s, r = %.4f, p = %.6f", row[1].c_str(), r, p)};
  }
  return {false, "general_count missing from correlations.csv"};
}

Outcome determinism(const fs::path& work) {
  const std::string scenario = R"({"seed": 9, "datasets": [
      {"name": "one", "ego_count": 12, "emit_text": true,
       "locations": [{"text": "Lima", "country": "PE", "continent": "South America"}]},
      {"name": "two", "ego_count": 12, "negativity_by_level": [0.7, 0.6, 0.5, 0.4, 0.3]},
      {"name": "three", "ego_count": 12}]})";
  write_file(work / "det.json", scenario);
  if (run_cli({"simulate", "--scenario", (work / "det.json").string(), "--out", (work / "det-data").string()}) != 0)
    return {false, "simulate failed"};
  const std::string data = (work / "det-data").string();
  const std::vector<std::string> extra = {"--compare-provider", "shifted", "--seed", "5"};
  auto pipeline = [&](const std::string& out, const std::string& jobs) {
    std::vector<std::string> args = {"pipeline", "--data", data, "--out", (work / out).string(), "--jobs", jobs};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  };
  if (pipeline("det-a", "1") || pipeline("det-b", "1") || pipeline("det-c", "8")) return {false, "pipeline failed"};
  const auto a = snapshot(work / "det-a");
  const bool repeat = a == snapshot(work / "det-b");
  const bool threads = a == snapshot(work / "det-c");
  return {repeat && threads && !a.empty(), fmt("%zu files; repeat %s, --jobs 1 vs 8 %s", a.size(),
                                               repeat ? "identical" : "DIFFERENT", threads ? "identical" : "DIFFERENT")};
}

Outcome provider_drift(const std::vector<GeneratedDataset>& datasets) {
  auto base = std::make_shared<PrecomputedProvider>();
  const ShiftedProvider shifted(base, 0.25, 12345);
  bool ok = true;
  std::string detail;
  for (const auto& d : datasets) {
    const DatasetSigner signer = [&](const SentimentProvider& p) { return test::sign_dataset(d.timelines, p); };
    const auto rows = compare_providers(signer, *base, shifted);
    ok = ok && rows[1].full > rows[0].full && rows[1].active > rows[0].active;
    detail += fmt("%s%.2f->%.2f/%.2f->%.2f", detail.empty() ? "" : ", ", rows[0].full, rows[1].full, rows[0].active,
                  rows[1].active);
  }
  return {ok, "full/active base->shifted: " + detail};
}

}  // namespace

int main() {
  test::TempDir work;
  int failures = 0;
  auto report = [&](int id, const char* title, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  C" << id << "  " << title << ": " << o.detail << std::endl;
  };

  report(1, "sign threshold exactness", sign_threshold_exactness);

  std::optional<RecoveryRun> recovery;
  auto recovered = [&]() -> const RecoveryRun& {
    if (!recovery) recovery = recovery_run(recovery_config());
    return *recovery;
  };
  report(2, "mean shift recovery", [&] { return meanshift_recovery(recovered()); });
  report(3, "circle size shape", [&] { return circle_size_shape(recovered()); });

  std::vector<GeneratedDataset> gradient_data;
  std::vector<std::vector<SignedEgoNetwork>> gradient_signed;
  for (const auto& c : gradient_family()) {
    gradient_data.push_back(generate_dataset(c));
    gradient_signed.push_back(test::sign_dataset(gradient_data.back().timelines, PrecomputedProvider{}));
  }
  report(4, "full to active negativity increase", [&] { return full_to_active_increase(gradient_signed); });
  report(5, "per-circle negativity gradient", [&] { return per_circle_gradient(recovered()); });
  report(6, "pearson oracle and properties", pearson_oracle);
  report(7, "confidence interval oracle", ci_oracle);
  report(8, "topic correlation direction", [&] { return topic_correlation(work.path()); });
  report(9, "pipeline determinism", [&] { return determinism(work.path()); });
  report(10, "provider drift harness", [&] { return provider_drift(gradient_data); });

  std::cout << (failures ? "FAILED " : "ALL PASSED ") << (10 - failures) << "/10" << std::endl;
  return failures ? 1 : 0;
}

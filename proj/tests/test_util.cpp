#include <doctest.h>

#include <atomic>
#include <numeric>
#include <random>
#include <stdexcept>

#include "senm/util.hpp"
#include "support.hpp"

using namespace senm;

namespace {

// Civil-calendar conversion done by hand (days since epoch -> y/m).
std::int64_t month_oracle(Timestamp ts) {
  std::int64_t z = ts >= 0 ? ts / 86400 : (ts - 86399) / 86400;
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const std::int64_t doe = z - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = yoe + era * 400;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const std::int64_t m = mp < 10 ? mp + 3 : mp - 9;
  if (m <= 2) ++y;
  return (y - 1970) * 12 + (m - 1);
}

}  // namespace

TEST_CASE("month_index at boundaries") {
  CHECK(month_index(0) == 0);
  CHECK(month_index(test::kJan2021) == 51 * 12);
  CHECK(month_index(test::kJan2021 - 1) == 51 * 12 - 1);
  CHECK(month_index(951782400) == 30 * 12 + 1);  // 2000-02-29
  CHECK(month_index(951868800) == 30 * 12 + 2);  // 2000-03-01
}

TEST_CASE("month_index agrees with a hand-rolled civil calendar") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<Timestamp> when(0, 4102444800);  // through 2100
  for (int i = 0; i < 20000; ++i) {
    const Timestamp ts = when(rng);
    CHECK(month_index(ts) == month_oracle(ts));
  }
}

TEST_CASE("csv splitting and escaping") {
  CHECK(split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_csv_line("\"x,y\",\"he said \"\"hi\"\"\"\r") == std::vector<std::string>{"x,y", "he said \"hi\""});
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("q\"") == "\"q\"\"\"");
}

TEST_CASE("csv escape round-trips through the splitter") {
  std::mt19937_64 rng(2);
  const std::string alphabet = "ab,\" \txyz";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 8);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> fields(3);
    for (auto& f : fields)
      for (std::size_t i = len(rng); i > 0; --i) f += alphabet[pick(rng)];
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + csv_escape(fields[i]);
    CHECK(split_csv_line(line) == fields);
  }
}

TEST_CASE("read_csv skips comments and blank lines") {
  test::TempDir dir;
  write_file(dir / "f.csv", "# comment\n\na,b\n  \nc,d\n");
  const auto rows = read_csv(dir / "f.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1] == std::vector<std::string>{"c", "d"});
  CHECK_THROWS_AS(read_csv(dir / "missing.csv"), ValidationError);
  CHECK_THROWS_AS(read_file(dir / "missing.csv"), ValidationError);
}

TEST_CASE("format_fixed and trim") {
  CHECK(format_fixed(17.645, 2) == "17.64");  // binary value sits just below .645
  CHECK(format_fixed(-0.001, 2) == "0.00");
  CHECK(format_fixed(-1.5, 1) == "-1.5");
  CHECK(trim("  a b \r\n") == "a b");
  CHECK(trim(" \t ").empty());
}

TEST_CASE("hashing is stable and spreads nearby inputs") {
  CHECK(hash_combine(1, 2) == hash_combine(1, 2));
  CHECK(hash_combine(1, 2) != hash_combine(2, 1));
  CHECK(hash_string("abc") != hash_string("abd"));
  CHECK(mix64(0) != mix64(1));
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  for (unsigned jobs : {1u, 2u, 8u}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { ++hits[i]; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h.load() == 1; }));
  }
  CHECK_THROWS_AS(parallel_for(50, 4,
                               [](std::size_t i) {
                                 if (i == 17) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "mfgpipe/error.hpp"
#include "mfgpipe/preprocess.hpp"
#include "mfgpipe/random.hpp"
#include "mfgpipe/stats.hpp"

using namespace mfg;

namespace {

Column with_missing(std::string name, std::size_t n, std::size_t missing) {
  std::vector<double> v(n);
  std::vector<std::uint8_t> m(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = double(i);
    m[i] = i < missing;
  }
  return Column::numeric(std::move(name), v, m);
}

Table categorical_table(const std::vector<std::string>& levels) {
  return Table("t", {Column::categorical("tool", levels), Column::numeric("idx", std::vector<double>(levels.size(), 1.0))});
}

std::vector<std::string> repeat(std::initializer_list<std::pair<const char*, int>> counts) {
  std::vector<std::string> out;
  for (const auto& [level, n] : counts)
    for (int i = 0; i < n; ++i) out.emplace_back(level);
  return out;
}

}  // namespace

TEST_CASE("drop_sparse_columns uses a strict threshold") {
  const Table t("t", {with_missing("sixty", 10, 6), with_missing("fifty", 10, 5), with_missing("none", 10, 0)});
  const auto r = drop_sparse_columns(t, 0.5);
  CHECK(r.table.column_names() == std::vector<std::string>{"fifty", "none"});
  REQUIRE(r.report.dropped.size() == 1);
  CHECK(r.report.dropped[0].first == "sixty");
  CHECK(r.report.dropped[0].second == doctest::Approx(0.6));

  const Table full("t", {with_missing("a", 5, 0)});
  const auto same = drop_sparse_columns(full, 0.5);
  CHECK(same.table == full);
  CHECK(same.report.dropped.empty());

  CHECK_THROWS_AS(drop_sparse_columns(t, 0.0), ValidationError);
  CHECK_THROWS_AS(drop_sparse_columns(t, 1.5), ValidationError);
}

TEST_CASE("proxy_report") {
  // X70 equals X14 where observed, and is 60% missing.
  const std::size_t n = 20;
  std::vector<double> x14(n), x70(n), other(n), noisy(n);
  std::vector<std::uint8_t> m70(n);
  Rng rng(5);
  for (std::size_t i = 0; i < n; ++i) {
    x14[i] = rng.normal();
    x70[i] = x14[i];
    m70[i] = i % 5 < 3;
    other[i] = rng.normal();
  }
  const Table t("t", {Column::numeric("X14", x14), Column::numeric("X70", x70, m70), Column::numeric("Z", other)});
  auto dropped = drop_sparse_columns(t, 0.5);
  const auto report = proxy_report(t, dropped.report, 0.8);
  REQUIRE(report.proxies.size() == 1);
  CHECK(report.proxies[0].dropped == "X70");
  CHECK(report.proxies[0].retained == "X14");
  CHECK(report.proxies[0].abs_correlation == doctest::Approx(1.0));

  // Noisy proxy on a 20-row overlap: the expected |r| comes straight from the formula.
  std::vector<double> a(n), b(n);
  std::vector<std::uint8_t> am(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = double(i);
    b[i] = 2.0 * double(i) + (i % 2 ? 3.0 : -3.0);
  }
  std::vector<double> a2(2 * n), b2(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    a2[i] = i < n ? a[i] : 0.5 * double(i);
    b2[i] = i < n ? b[i] : 0.0;
    am[i] = i >= n;  // second half of the proxy candidate missing
  }
  am[2 * n - 1] = 1;
  am[0] = 1;  // 19 rows observed out of 40 -> more than half missing
  const Table u("u", {Column::numeric("X14", a2), Column::numeric("X70", b2, am)});
  const auto ur = proxy_report(u, drop_sparse_columns(u, 0.5).report, 0.8);
  Eigen::VectorXd xa(n - 1), xb(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    xa(Eigen::Index(i - 1)) = a[i];
    xb(Eigen::Index(i - 1)) = b[i];
  }
  const double expected = std::abs(pearson_r(xa, xb));
  REQUIRE(ur.proxies.size() == 1);
  CHECK(expected > 0.9);
  CHECK(ur.proxies[0].abs_correlation == doctest::Approx(expected).epsilon(1e-12));

  // No correlated partner, no proxy.
  std::vector<double> flip(n);
  for (std::size_t i = 0; i < n; ++i) flip[i] = double(i % 2);
  const Table indep("t", {Column::numeric("F", flip), Column::numeric("X70", x70, m70)});
  const auto none = proxy_report(indep, drop_sparse_columns(indep, 0.5).report, 0.99);
  CHECK(none.proxies.empty());
}

TEST_CASE("apply_concept_hierarchy") {
  const Table t = categorical_table({"T01", "T02", "T03", "T01"});
  HierarchyMapping h{"tool", {{"T01", "G1"}, {"T02", "G1"}, {"T03", "G2"}}, std::nullopt};
  const Table g = apply_concept_hierarchy(t, h);
  CHECK(column_stats(g, "tool").distinct_count == 2);
  CHECK(g.column("tool").level(1) == "G1");
  CHECK(g.column_names() == t.column_names());

  HierarchyMapping identity{"tool", {{"T01", "T01"}, {"T02", "T02"}, {"T03", "T03"}}, std::nullopt};
  const Table same = apply_concept_hierarchy(t, identity);
  for (std::size_t i = 0; i < t.row_count(); ++i) CHECK(same.column("tool").level(i) == t.column("tool").level(i));

  const Table t4 = categorical_table({"T01", "T04"});
  CHECK_THROWS_AS(apply_concept_hierarchy(t4, h), ValidationError);
  h.default_group = "OTHER";
  CHECK(apply_concept_hierarchy(t4, h).column("tool").level(1) == "OTHER");
}

TEST_CASE("read_hierarchy_csv") {
  const auto path = std::filesystem::temp_directory_path() / "mfgpipe_hierarchy_test.csv";
  {
    std::ofstream out(path);
    out << "level,group\nT01,G1\nT02,G1\n";
  }
  const auto h = read_hierarchy_csv(path, "tool", std::string("OTHER"));
  CHECK(h.mapping.size() == 2);
  CHECK(h.mapping.at("T02") == "G1");
  CHECK(h.default_group == "OTHER");
  std::filesystem::remove(path);
}

TEST_CASE("drop_singleton_levels") {
  const Table t = categorical_table(repeat({{"R1", 5}, {"R2", 1}, {"R3", 2}}));
  const auto r = drop_singleton_levels(t, "tool");
  CHECK(r.table.row_count() == 7);
  CHECK(r.removed_levels == std::vector<std::string>{"R2"});

  const Table fine = categorical_table(repeat({{"A", 2}, {"B", 3}}));
  CHECK(drop_singleton_levels(fine, "tool").table == fine);

  const auto all = drop_singleton_levels(categorical_table({"A", "B", "C"}), "tool");
  CHECK(all.table.row_count() == 0);
  CHECK(all.removed_levels == std::vector<std::string>{"A", "B", "C"});
}

TEST_CASE("dummy_encode") {
  const Table two = categorical_table(repeat({{"A", 2}, {"B", 1}}));
  CHECK(dummy_encode(two, "tool").column_count() == 2);

  const Table three = categorical_table(repeat({{"B", 3}, {"A", 5}, {"C", 2}}));
  const Table d = dummy_encode(three, "tool");
  CHECK_FALSE(d.has_column("tool"));
  CHECK_FALSE(d.has_column("tool=A"));
  REQUIRE(d.has_column("tool=B"));
  REQUIRE(d.has_column("tool=C"));
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < d.row_count(); ++i) {
    b += d.column("tool=B").boolean_at(i);
    c += d.column("tool=C").boolean_at(i);
    if (three.column("tool").level(i) == "A") {
      CHECK_FALSE(d.column("tool=B").boolean_at(i));
      CHECK_FALSE(d.column("tool=C").boolean_at(i));
    }
  }
  CHECK(b == 3);
  CHECK(c == 2);

  const Table explicit_ref = dummy_encode(three, "tool", std::string("C"));
  CHECK(explicit_ref.has_column("tool=A"));
  CHECK_FALSE(explicit_ref.has_column("tool=C"));

  CHECK_THROWS_AS(dummy_encode(categorical_table({"A", "A"}), "tool"), ValidationError);
  CHECK_THROWS_AS(dummy_encode(three, "tool", std::string("Z")), ValidationError);
}

TEST_CASE("dummy ties pick the lexicographically smallest reference") {
  const Table t = categorical_table(repeat({{"Y", 2}, {"X", 2}, {"Z", 1}}));
  const Table d = dummy_encode(t, "tool");
  CHECK(d.has_column("tool=Y"));
  CHECK_FALSE(d.has_column("tool=X"));
}

TEST_CASE("missing source cells give missing dummies") {
  std::vector<std::optional<std::string>> v{"A", std::nullopt, "B", "A"};
  const Table t("t", {Column::categorical("tool", v)});
  const Table d = dummy_encode(t, "tool");
  CHECK(d.column("tool=B").is_missing(1));
}

// ------------------------------------------------------------ properties

TEST_CASE("property: dummy sums equal level counts, at most one true per row") {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng.index(60);
    const std::size_t L = 2 + rng.index(5);
    std::vector<std::optional<std::string>> v(n);
    for (std::size_t i = 0; i < n; ++i)
      if (rng.uniform() > 0.1) v[i] = "L" + std::to_string(rng.index(L));
    const Table t("t", {Column::categorical("c", v)});
    if (column_stats(t, "c").distinct_count < 2) continue;
    const Table d = dummy_encode(t, "c");
    CHECK(d.column_count() == column_stats(t, "c").distinct_count - 1);

    std::map<std::string, std::size_t> counts;
    for (const auto& x : v)
      if (x) ++counts[*x];
    for (const auto& col : d.columns()) {
      const std::string level = col.name().substr(2);
      std::size_t sum = 0;
      for (std::size_t i = 0; i < n; ++i) sum += !col.is_missing(i) && col.boolean_at(i);
      CHECK(sum == counts[level]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t on = 0;
      for (const auto& col : d.columns()) on += !col.is_missing(i) && col.boolean_at(i);
      CHECK(on <= 1);
    }
  }
}

TEST_CASE("property: sparse dropping and singleton removal are idempotent") {
  Rng rng(32);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<Column> cols;
    for (int j = 0; j < 4; ++j) {
      const double rate = rng.uniform();
      std::vector<double> v(n);
      std::vector<std::uint8_t> m(n);
      for (std::size_t i = 0; i < n; ++i) m[i] = rng.uniform() < rate;
      cols.push_back(Column::numeric("c" + std::to_string(j), v, m));
    }
    std::vector<std::string> levels(n);
    for (auto& l : levels) l = "L" + std::to_string(rng.index(n));
    cols.push_back(Column::categorical("cat", levels));
    const Table t("t", cols);
    const double threshold = 0.05 + 0.95 * rng.uniform();
    const Table once = drop_sparse_columns(t, threshold).table;
    const auto twice = drop_sparse_columns(once, threshold);
    CHECK(twice.table == once);
    CHECK(twice.report.dropped.empty());

    const auto s1 = drop_singleton_levels(t, "cat");
    const auto s2 = drop_singleton_levels(s1.table, "cat");
    CHECK(s2.removed_levels.empty());
    CHECK(s2.table.row_count() == s1.table.row_count());
  }
}

TEST_CASE("property: proxy correlation is symmetric") {
  Rng rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 10 + rng.index(20);
    Eigen::VectorXd a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a(Eigen::Index(i)) = rng.normal();
      b(Eigen::Index(i)) = a(Eigen::Index(i)) + 0.3 * rng.normal();
      if (rng.uniform() < 0.2) a(Eigen::Index(i)) = missing_value();
    }
    CHECK(std::abs(std::abs(pearson_r(a, b)) - std::abs(pearson_r(b, a))) <= 1e-12);
  }
}

#include <doctest.h>

#include "mfgpipe/error.hpp"
#include "mfgpipe/merge.hpp"
#include "support/oracles.hpp"

using namespace mfg;

namespace {

Table events(std::vector<Timestamp> t, std::vector<std::string> keys = {}) {
  if (keys.empty()) keys.assign(t.size(), "K");
  return Table("main", {Column::categorical("key", keys), Column::timestamp("t", std::move(t))});
}

Table monitor(std::vector<Timestamp> t, std::vector<std::string> v, std::vector<std::string> keys = {}) {
  if (keys.empty()) keys.assign(t.size(), "K");
  return Table("other", {Column::categorical("key", keys), Column::timestamp("time", std::move(t)),
                         Column::categorical("v", v)});
}

MergeSpec spec_for(MergeMethod m) {
  MergeSpec s;
  s.key_columns = {"key"};
  s.main_time = "t";
  s.other_time = "time";
  s.method = m;
  return s;
}

std::string brought(const MergeResult& r, std::size_t row = 0) {
  const Column& c = r.table.column("v");
  return c.is_missing(row) ? "<missing>" : c.level(row);
}

bool same_cells(const Table& a, const Table& b) {
  if (a.column_count() != b.column_count() || a.row_count() != b.row_count()) return false;
  for (std::size_t j = 0; j < a.column_count(); ++j) {
    const Column& x = a.column(j);
    const Column& y = b.column(j);
    if (x.name() != y.name() || x.kind() != y.kind()) return false;
    for (std::size_t i = 0; i < a.row_count(); ++i) {
      if (x.is_missing(i) != y.is_missing(i)) return false;
      if (!x.is_missing(i) && x.render(i) != y.render(i)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("the three rules on a two-candidate example") {
  const Table main = events({10});
  const Table other = monitor({9, 12}, {"A", "B"});
  CHECK(brought(asof_merge(main, other, spec_for(MergeMethod::Nearest))) == "A");
  CHECK(brought(asof_merge(main, other, spec_for(MergeMethod::RollForward))) == "A");
  CHECK(brought(asof_merge(main, other, spec_for(MergeMethod::RollBackward))) == "B");
}

TEST_CASE("roll-forward with only a future record is unmatched") {
  const auto r = asof_merge(events({10}), monitor({12}, {"B"}), spec_for(MergeMethod::RollForward));
  CHECK(brought(r) == "<missing>");
  CHECK(r.report.unmatched_rows == 1);
  CHECK(r.report.matched_rows == 0);
}

TEST_CASE("nearest breaks an exact tie toward the past") {
  const auto r = asof_merge(events({10}), monitor({8, 12}, {"past", "future"}), spec_for(MergeMethod::Nearest));
  CHECK(brought(r) == "past");
}

TEST_CASE("equal timestamps match under every method") {
  for (auto m : {MergeMethod::Nearest, MergeMethod::RollForward, MergeMethod::RollBackward})
    CHECK(brought(asof_merge(events({10}), monitor({5, 10, 15}, {"a", "hit", "c"}), spec_for(m))) == "hit");
}

TEST_CASE("tolerance excludes far candidates") {
  auto s = spec_for(MergeMethod::RollForward);
  s.tolerance = 2;
  CHECK(brought(asof_merge(events({10}), monitor({7}, {"A"}), s)) == "<missing>");
  s.tolerance = 3;
  CHECK(brought(asof_merge(events({10}), monitor({7}, {"A"}), s)) == "A");
}

TEST_CASE("keys separate candidates") {
  const auto r = asof_merge(events({10, 10}, {"K1", "K2"}), monitor({9, 8}, {"k1", "k2"}, {"K1", "K2"}),
                            spec_for(MergeMethod::Nearest));
  CHECK(brought(r, 0) == "k1");
  CHECK(brought(r, 1) == "k2");
}

TEST_CASE("merge errors") {
  CHECK_THROWS_AS(asof_merge(events({10}), monitor({9, 9}, {"A", "B"}), spec_for(MergeMethod::Nearest)),
                  ValidationError);
  const Table numeric_key("other", {Column::numeric("key", {1.0}), Column::timestamp("time", {1}),
                                    Column::categorical("v", std::vector<std::string>{"x"})});
  CHECK_THROWS_AS(asof_merge(events({10}), numeric_key, spec_for(MergeMethod::Nearest)), ValidationError);
  auto s = spec_for(MergeMethod::Nearest);
  s.tolerance = -1;
  CHECK_THROWS_AS(asof_merge(events({10}), monitor({9}, {"A"}), s), ValidationError);
  CHECK(parse_merge_method("roll-forward") == MergeMethod::RollForward);
  CHECK_THROWS_AS(parse_merge_method("sideways"), ValidationError);
}

TEST_CASE("main rows with missing key or time are unmatched") {
  std::vector<std::optional<std::string>> keys{"K", std::nullopt, "K"};
  const Table main("main", {Column::categorical("key", keys), Column::timestamp("t", {10, 10, 10}, {0, 0, 1})});
  const auto r = asof_merge(main, monitor({9}, {"A"}), spec_for(MergeMethod::Nearest));
  CHECK(r.report.matched_rows == 1);
  CHECK(r.report.unmatched_rows == 2);
  CHECK(brought(r, 1) == "<missing>");
  CHECK(brought(r, 2) == "<missing>");
}

TEST_CASE("remerge on selected variables") {
  // Columns A and B are 70% missing in the monitoring table; C is full.
  const std::size_t n = 20;
  std::vector<Timestamp> t(n), mt(n);
  std::vector<double> a(n), b(n), c(n);
  std::vector<std::uint8_t> am(n), bm(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<Timestamp>(10 * i);
    mt[i] = static_cast<Timestamp>(10 * i + 1);
    a[i] = b[i] = c[i] = double(i);
    am[i] = i % 10 < 7;
    bm[i] = (i + 3) % 10 < 7;
  }
  const Table main("main", {Column::categorical("key", std::vector<std::string>(n, "K")), Column::timestamp("t", mt)});
  const Table other("other", {Column::categorical("key", std::vector<std::string>(n, "K")), Column::timestamp("time", t),
                              Column::numeric("A", a, am), Column::numeric("B", b, bm), Column::numeric("C", c)});
  MergeSpec s = spec_for(MergeMethod::RollForward);

  const auto only_c = remerge_selected(main, {{other, s}}, {"C"});
  const auto all = asof_merge(main, other, s);
  CHECK(only_c.report.baseline_complete_case_rows == all.report.complete_case_rows);
  CHECK(only_c.report.complete_case_rows > all.report.complete_case_rows);
  CHECK(only_c.report.complete_case_rows == only_c.report.sources.at(0).matched_rows);

  const auto everything = remerge_selected(main, {{other, s}}, {"A", "B", "C"});
  CHECK(same_cells(everything.table, all.table));

  CHECK_THROWS_AS(remerge_selected(main, {{other, s}}, {"nowhere"}), ValidationError);
  CHECK_THROWS_AS(remerge_selected(main, {{other, s}, {other, s}}, {"C"}), ValidationError);
}

// ------------------------------------------------------------ properties

TEST_CASE("property: merge equals the exhaustive oracle") {
  Rng rng(2024);
  for (int rep = 0; rep < 300; ++rep) {
    for (auto m : {MergeMethod::Nearest, MergeMethod::RollForward, MergeMethod::RollBackward}) {
      const auto inst = oracle::random_merge_instance(rng, m, rep % 2 == 1);
      const auto got = asof_merge(inst.main, inst.other, inst.spec);
      const Table want = oracle::asof_expected(inst.main, inst.other, inst.spec, inst.brought);
      REQUIRE(same_cells(got.table, want));
      CHECK(got.report.matched_rows + got.report.unmatched_rows == inst.main.row_count());
    }
  }
}

TEST_CASE("property: no future leakage and no stale roll-backward") {
  Rng rng(77);
  for (int rep = 0; rep < 300; ++rep) {
    for (auto m : {MergeMethod::RollForward, MergeMethod::RollBackward}) {
      const auto inst = oracle::random_merge_instance(rng, m, false);
      // Bring the other table's own time along under a new name.
      Table other = inst.other.with_column(inst.other.column("time").renamed("matched_time"));
      const auto got = asof_merge(inst.main, other, inst.spec);
      const Column& mt = got.table.column("t");
      const Column& ot = got.table.column("matched_time");
      for (std::size_t i = 0; i < got.table.row_count(); ++i) {
        if (ot.is_missing(i)) continue;
        if (m == MergeMethod::RollForward)
          CHECK(ot.timestamp_at(i) <= mt.timestamp_at(i));
        else
          CHECK(ot.timestamp_at(i) >= mt.timestamp_at(i));
      }
    }
  }
}

TEST_CASE("property: main columns untouched and tighter tolerance never matches more") {
  Rng rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    const auto m = static_cast<MergeMethod>(rng.index(3));
    auto inst = oracle::random_merge_instance(rng, m, false);
    const auto loose = asof_merge(inst.main, inst.other, inst.spec);
    for (std::size_t j = 0; j < inst.main.column_count(); ++j) CHECK(loose.table.column(j) == inst.main.column(j));
    std::size_t previous = loose.report.matched_rows;
    for (Timestamp tol : {20, 10, 5, 2, 0}) {
      inst.spec.tolerance = tol;
      const auto r = asof_merge(inst.main, inst.other, inst.spec);
      CHECK(r.report.matched_rows <= previous);
      previous = r.report.matched_rows;
    }
  }
}

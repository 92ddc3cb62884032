#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mfgpipe/error.hpp"
#include "mfgpipe/screen.hpp"
#include "mfgpipe/stats.hpp"
#include "support/oracles.hpp"

using namespace mfg;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MannWhitneyDetail mw(std::vector<double> g0, std::vector<double> g1) {
  std::vector<double> values = g0;
  values.insert(values.end(), g1.begin(), g1.end());
  std::vector<std::uint8_t> group(g0.size(), 0);
  group.resize(values.size(), 1);
  return mann_whitney_detail(values, group);
}

ChiSquareDetail chi(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return chi_square_from_counts(m);
}

}  // namespace

TEST_CASE("pearson_r examples") {
  CHECK(pearson_r(vec({1, 2, 3}), vec({2, 4, 6})) == doctest::Approx(1.0));
  CHECK(pearson_r(vec({1, 2, 3}), vec({6, 4, 2})) == doctest::Approx(-1.0));
  CHECK(pearson_r(vec({1, 2, 3, 4}), vec({1, 3, 2, 4})) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK_THROWS_AS(pearson_r(vec({1, 1, 1}), vec({1, 2, 3})), ZeroVarianceError);
  CHECK_THROWS_AS(pearson_r(vec({1}), vec({1})), ValidationError);
  // Pairwise deletion.
  CHECK(pearson_r(vec({1, 2, missing_value(), 3}), vec({2, 4, 100, 6})) == doctest::Approx(1.0));
}

TEST_CASE("mann_whitney_u examples") {
  CHECK(mw({1, 2}, {3, 4}).statistic() == 0.0);
  CHECK(mw({1, 3}, {2, 4}).statistic() == 1.0);
  const auto same = mw({1, 2, 2, 5}, {1, 2, 2, 5});
  CHECK(same.statistic() == 8.0);
  CHECK(same.p_value == doctest::Approx(1.0));
  CHECK_THROWS_AS(mw({}, {1, 2}), ValidationError);
}

TEST_CASE("mann_whitney p-value against a hand computation") {
  // g0 = (1,2,3), g1 = (4,5,6): U = 0, mean 4.5, var = 9*7/12 = 5.25.
  const auto d = mw({1, 2, 3}, {4, 5, 6});
  const double z = (4.5 - 0.5) / std::sqrt(5.25);
  CHECK(d.p_value == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("chi-square examples") {
  CHECK(chi({{10, 10}, {10, 10}}).statistic == doctest::Approx(0.0));
  const auto strong = chi({{20, 0}, {0, 20}});
  CHECK(strong.statistic == doctest::Approx(40.0));
  CHECK(strong.df == 1.0);
  CHECK(strong.p_value >= 0.0);
  CHECK(strong.p_value <= 1.0);
  // P(chi2_1 > 3.841459) = 0.05
  CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  // P(chi2_4 > 9.487729) = 0.05
  CHECK(chi_square_sf(9.487729036781154, 4) == doctest::Approx(0.05).epsilon(1e-9));
  // Q(1, x) = exp(-x)
  CHECK(gamma_q(1.0, 2.5) == doctest::Approx(std::exp(-2.5)).epsilon(1e-12));
  CHECK(gamma_q(0.5, 40.0) == doctest::Approx(std::erfc(std::sqrt(40.0))).epsilon(1e-9));
}

TEST_CASE("chi_square_independence needs two levels") {
  std::vector<std::string> a{"x", "x", "x"}, b{"p", "q", "p"};
  CHECK_THROWS_AS(chi_square_independence(a, b), ValidationError);
}

TEST_CASE("least_squares_fit examples") {
  MatrixXd X(4, 1);
  X << 1, 2, 3, 4;
  const auto exact = least_squares_fit(X, VectorXd((3 * X.col(0).array() + 1).matrix()));
  CHECK(exact.coefficients(0) == doctest::Approx(3.0));
  CHECK(exact.intercept == doctest::Approx(1.0));
  CHECK(exact.rss == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(exact.r_squared == doctest::Approx(1.0));

  const auto flat = least_squares_fit(X, vec({2, 2, 2, 2}));
  CHECK(flat.coefficients(0) == doctest::Approx(0.0));
  CHECK(flat.r_squared == 0.0);

  // Closed form: Sxy = 4.5, Sxx = 5, Syy = 4.75, R^2 = Sxy^2 / (Sxx Syy).
  const auto simple = least_squares_fit(X, vec({1, 2, 2, 4}));
  CHECK(simple.coefficients(0) == doctest::Approx(0.9));
  CHECK(simple.intercept == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(simple.r_squared == doctest::Approx(4.5 * 4.5 / (5.0 * 4.75)).epsilon(1e-12));
}

TEST_CASE("rank deficiency is detected") {
  MatrixXd X(5, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  const auto fit = least_squares_fit(X, vec({1, 2, 3, 4, 6}));
  CHECK(fit.rank_deficient);
  CHECK(fit.rank == 1);
  CHECK_THROWS_AS(least_squares_fit(X, vec({1, 2, 3, 4, 6}), RankPolicy::RequireUnique), ValidationError);
  CHECK_THROWS_AS(least_squares_fit(MatrixXd(2, 2), vec({1, 2})), ValidationError);
}

TEST_CASE("VIF examples") {
  // Orthogonal, centred columns.
  MatrixXd X(8, 3);
  X << 1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, 1, 1, 1, -1, -1, 1, 1, 1, -1, 1, -1, -1, -1;
  const VectorXd v = variance_inflation(X);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(v(j) == doctest::Approx(1.0).epsilon(1e-8));

  Rng rng(3);
  MatrixXd D = oracle::random_matrix(rng, 30, 3);
  D.col(2) = D.col(0) + D.col(1);
  CHECK(std::isinf(variance_inflation(D)(2)));

  CHECK_THROWS_AS(variance_inflation(MatrixXd(10, 1)), ValidationError);
}

TEST_CASE("VIF for two predictors with r = 0.9") {
  // Build x2 with sample correlation exactly 0.9 to x1.
  Rng rng(4);
  VectorXd a = oracle::random_vector(rng, 50), b = oracle::random_vector(rng, 50);
  a.array() -= a.mean();
  b.array() -= b.mean();
  b -= (a.dot(b) / a.squaredNorm()) * a;
  a.normalize();
  b.normalize();
  MatrixXd X(50, 2);
  X.col(0) = a;
  X.col(1) = 0.9 * a + std::sqrt(1 - 0.81) * b;
  const VectorXd v = variance_inflation(X);
  CHECK(v(0) == doctest::Approx(1.0 / (1.0 - 0.81)).epsilon(1e-10));
  CHECK(v(1) == doctest::Approx(5.263157894736842).epsilon(1e-10));
}

TEST_CASE("VIF flags") {
  VectorXd values(4);
  values << 11.0, 10.0, 2.0, std::numeric_limits<double>::infinity();
  const auto r = summarize_vif({"a", "b", "c", "d"}, values);
  CHECK(r.individual_flags == std::vector<std::string>{"a", "d"});
  CHECK(r.infinite_count == 1);
  CHECK(r.average_vif == doctest::Approx(23.0 / 3.0));
  CHECK(r.average_flag);

  VectorXd six(2);
  six << 6.0, 6.0;
  CHECK_FALSE(summarize_vif({"a", "b"}, six).average_flag);
  CHECK(summarize_vif({"a", "b"}, six).individual_flags.empty());
}

TEST_CASE("quick_filter routes constant columns and applies r_min") {
  const std::size_t n = 40;
  std::vector<double> y(n), weak(n), copy(n), constant(n, 3.0);
  std::vector<std::string> grp(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = double(i);
    copy[i] = y[i];
    weak[i] = (i % 2 ? 1.0 : -1.0) * 10.0;
    grp[i] = i < n / 2 ? "lo" : "hi";
  }
  weak[0] = 12.0;  // tiny |r|
  const Table t("t", {Column::numeric("y", y), Column::numeric("weak", weak), Column::numeric("copy", copy),
                      Column::numeric("constant", constant), Column::categorical("grp", grp)});
  const auto r = quick_filter(t, "y", {});
  CHECK(std::find(r.retained.begin(), r.retained.end(), "copy") != r.retained.end());
  CHECK(std::find(r.retained.begin(), r.retained.end(), "grp") != r.retained.end());
  CHECK(std::find(r.retained.begin(), r.retained.end(), "weak") == r.retained.end());
  CHECK(r.constant == std::vector<std::string>{"constant"});
  for (const auto& a : r.results) {
    CHECK(a.variable != "constant");
    if (a.variable == "copy") CHECK(a.statistic == doctest::Approx(1.0));
    if (a.variable == "grp") CHECK(a.test == TestKind::MannWhitneyU);
  }
  CHECK_THROWS_AS(quick_filter(t, "nope", {}), ValidationError);
}

TEST_CASE("vif on a table uses complete cases") {
  Rng rng(8);
  std::vector<double> a(30), b(30), c(30);
  std::vector<std::uint8_t> m(30);
  for (std::size_t i = 0; i < 30; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    c[i] = rng.normal();
    m[i] = i < 5;
  }
  const Table t("t", {Column::numeric("a", a, m), Column::numeric("b", b), Column::numeric("c", c)});
  const auto r = vif(t, {"a", "b", "c"});
  CHECK(r.complete_cases == 25);
  CHECK(r.names.size() == 3);
  CHECK_THROWS_AS(vif(t, {"a"}), ValidationError);
}

// ------------------------------------------------------------ properties

TEST_CASE("property: pearson symmetry and affine invariance") {
  Rng rng(40);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.index(40));
    const VectorXd x = oracle::random_vector(rng, n), y = oracle::random_vector(rng, n);
    const double r = pearson_r(x, y);
    CHECK(std::abs(r - pearson_r(y, x)) <= 1e-10);
    const double scale = 0.1 + 5 * rng.uniform(), shift = 10 * rng.normal();
    const VectorXd xt = (scale * x.array() + shift).matrix();
    CHECK(std::abs(r - pearson_r(xt, y)) <= 1e-10);
    CHECK(std::abs(r + pearson_r(VectorXd(-xt), y)) <= 1e-10);
    CHECK(std::abs(r) <= 1.0);
  }
}

TEST_CASE("property: U1 + U2 = n1 n2 and U matches pair counting") {
  Rng rng(41);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + rng.index(40);
    std::vector<double> v(n);
    std::vector<std::uint8_t> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = double(rng.index(6));  // many ties
      g[i] = rng.uniform() < 0.5;
    }
    g[0] = 0;
    g[1] = 1;
    const auto d = mann_whitney_detail(v, g);
    CHECK(d.u1 + d.u2 == double(d.n0 * d.n1));
    CHECK(d.u1 == oracle::brute_force_u(v, g));
    CHECK(d.p_value >= 0.0);
    CHECK(d.p_value <= 1.0);
  }
}

TEST_CASE("property: chi-square invariant under row and column permutation") {
  Rng rng(42);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index r = 2 + static_cast<Eigen::Index>(rng.index(3)), c = 2 + static_cast<Eigen::Index>(rng.index(3));
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 1.0 + double(rng.index(20));
    const auto base = chi_square_from_counts(m);
    Eigen::PermutationMatrix<Eigen::Dynamic> pr(r), pc(c);
    pr.setIdentity();
    pc.setIdentity();
    std::vector<int> ri(static_cast<std::size_t>(r)), ci(static_cast<std::size_t>(c));
    for (Eigen::Index i = 0; i < r; ++i) ri[static_cast<std::size_t>(i)] = int(i);
    for (Eigen::Index j = 0; j < c; ++j) ci[static_cast<std::size_t>(j)] = int(j);
    rng.shuffle(std::span<int>(ri));
    rng.shuffle(std::span<int>(ci));
    MatrixXd p(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) p(i, j) = m(ri[std::size_t(i)], ci[std::size_t(j)]);
    const auto perm = chi_square_from_counts(p);
    CHECK(perm.statistic == doctest::Approx(base.statistic).epsilon(1e-12));
    CHECK(base.p_value >= 0.0);
    CHECK(base.p_value <= 1.0);
  }
}

TEST_CASE("property: VIF agrees with the normal-equation oracle") {
  Rng rng(43);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.index(4));
    const Eigen::Index n = p + 5 + static_cast<Eigen::Index>(rng.index(40));
    MatrixXd X = oracle::random_matrix(rng, n, p);
    X.col(p - 1) += 0.7 * X.col(0);  // some collinearity
    const VectorXd v = variance_inflation(X);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double want = oracle::normal_equation_vif(X, j);
      CHECK(std::abs(v(j) - want) <= 1e-8 * std::max(1.0, want));
      CHECK(v(j) >= 1.0);
    }
  }
}

TEST_CASE("property: least squares RSS matches recomputed residuals") {
  Rng rng(44);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index p = static_cast<Eigen::Index>(rng.index(5));
    const Eigen::Index n = p + 2 + static_cast<Eigen::Index>(rng.index(30));
    const MatrixXd X = oracle::random_matrix(rng, n, p);
    const VectorXd y = oracle::random_vector(rng, n);
    const auto fit = least_squares_fit(X, y);
    const double rss = (y - fit.predict(X)).squaredNorm();
    CHECK(std::abs(fit.rss - rss) <= 1e-8 * std::max(1.0, rss));
    CHECK(fit.r_squared <= 1.0);
    if (p > 0) {
      const VectorXd beta = oracle::normal_equation_fit(X, y);
      CHECK((beta.tail(p) - fit.coefficients).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("property: raising r_min never retains a removed Pearson variable") {
  Rng rng(45);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 30;
    std::vector<Column> cols;
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    cols.push_back(Column::numeric("y", y));
    for (int j = 0; j < 8; ++j) {
      std::vector<double> x(n);
      const double w = rng.uniform();
      for (std::size_t i = 0; i < n; ++i) x[i] = w * y[i] + rng.normal();
      cols.push_back(Column::numeric("x" + std::to_string(j), x));
    }
    const Table t("t", cols);
    std::vector<std::string> previous = quick_filter(t, "y", {0.0, 0.05}).retained;
    for (double r_min : {0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
      const auto now = quick_filter(t, "y", {r_min, 0.05}).retained;
      for (const auto& v : now) CHECK(std::find(previous.begin(), previous.end(), v) != previous.end());
      previous = now;
    }
  }
}

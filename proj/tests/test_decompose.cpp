#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mfgpipe/decompose.hpp"
#include "mfgpipe/error.hpp"
#include "mfgpipe/random.hpp"

using namespace mfg;

namespace {

Series make(Eigen::Index n, auto f) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = f(double(i));
  return Series::indexed(v);
}

double seasonal_period_sum(const Decomposition& d) {
  return d.seasonal.values.head(d.period).sum();
}

double max_reconstruction_error(const Series& s, const Decomposition& d) {
  double worst = 0.0;
  for (Eigen::Index i = d.valid_begin; i < d.valid_end; ++i) {
    if (is_missing(s.values(i)) || is_missing(d.trend.values(i))) continue;
    worst = std::max(worst, std::abs(d.trend.values(i) + d.seasonal.values(i) + d.residual.values(i) - s.values(i)));
  }
  return worst;
}

double residual_rms(const Decomposition& d) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = d.valid_begin; i < d.valid_end; ++i) {
    if (is_missing(d.residual.values(i))) continue;
    sum += d.residual.values(i) * d.residual.values(i);
    ++count;
  }
  return std::sqrt(sum / double(count));
}

}  // namespace

TEST_CASE("moving average examples") {
  const auto ma = moving_average(make(5, [](double i) { return i + 1; }), 3);
  CHECK(is_missing(ma.values(0)));
  CHECK(ma.values(1) == doctest::Approx(2.0));
  CHECK(ma.values(2) == doctest::Approx(3.0));
  CHECK(ma.values(3) == doctest::Approx(4.0));
  CHECK(is_missing(ma.values(4)));

  const auto flat = moving_average(make(9, [](double) { return 7.0; }), 5);
  for (Eigen::Index i = 2; i < 7; ++i) CHECK(flat.values(i) == doctest::Approx(7.0));

  const auto whole = moving_average(make(7, [](double i) { return i * i; }), 7);
  CHECK(whole.values(3) == doctest::Approx((0 + 1 + 4 + 9 + 16 + 25 + 36) / 7.0));

  VectorXd holes(5);
  holes << 1, 2, missing_value(), 4, 5;
  const auto gap = moving_average(Series::indexed(holes), 3);
  CHECK(is_missing(gap.values(1)));
  CHECK(is_missing(gap.values(3)));

  CHECK_THROWS_AS(moving_average(make(5, [](double i) { return i; }), 4), ValidationError);
  CHECK_THROWS_AS(moving_average(make(5, [](double i) { return i; }), 7), ValidationError);
}

TEST_CASE("detrend_linear examples") {
  const auto line = detrend_linear(make(10, [](double i) { return 3.0 - 0.5 * i; }));
  CHECK(line.residual.values.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(line.fit.coefficients(0) == doctest::Approx(-0.5));

  const auto flat = detrend_linear(make(6, [](double) { return 2.0; }));
  CHECK(flat.fit.coefficients(0) == doctest::Approx(0.0));
  CHECK(flat.residual.values.cwiseAbs().maxCoeff() < 1e-12);

  // A cosine phased symmetrically about the midpoint is orthogonal to both
  // the constant and the index over whole periods.
  const Eigen::Index p = 12, n = 2 * p;
  const double mid = double(n - 1) / 2.0;
  auto wave = [&](double i) { return std::cos(2 * std::numbers::pi * (i - mid) / double(p)); };
  const auto mixed = detrend_linear(make(n, [&](double i) { return 1.0 + 0.3 * i + wave(i); }));
  for (Eigen::Index i = 0; i < n; ++i) CHECK(std::abs(mixed.residual.values(i) - wave(double(i))) < 1e-6);

  CHECK_THROWS_AS(detrend_linear(make(2, [](double i) { return i; })), ValidationError);
}

TEST_CASE("decompose a noiseless linear plus sine series") {
  const Eigen::Index p = 12;
  const Series s = make(3 * p, [&](double i) { return 5.0 + 0.2 * i + std::sin(2 * std::numbers::pi * i / double(p)); });
  const auto d = decompose_additive(s, p);
  CHECK(d.valid_begin == p / 2);
  CHECK(d.valid_end == 3 * p - p / 2);
  CHECK(residual_rms(d) < 1e-6);
  CHECK(std::abs(seasonal_period_sum(d)) < 1e-9);
  CHECK(max_reconstruction_error(s, d) < 1e-9);
  for (Eigen::Index i = 0; i < 3 * p; ++i)
    CHECK(std::abs(d.seasonal.values(i) - std::sin(2 * std::numbers::pi * double(i) / double(p))) < 1e-6);
}

TEST_CASE("decompose odd period and pure line") {
  const Series sine = make(21, [](double i) { return std::sin(2 * std::numbers::pi * i / 7.0); });
  const auto d = decompose_additive(sine, 7);
  CHECK(residual_rms(d) < 1e-6);
  CHECK(std::abs(seasonal_period_sum(d)) < 1e-9);

  const Series line = make(20, [](double i) { return -2.0 + 0.75 * i; });
  const auto l = decompose_additive(line, 4);
  CHECK(l.seasonal.values.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(residual_rms(l) < 1e-9);
}

TEST_CASE("decompose errors") {
  CHECK_THROWS_AS(decompose_additive(make(7, [](double i) { return i; }), 4), ValidationError);
  CHECK_THROWS_AS(decompose_additive(make(10, [](double i) { return i; }), 1), ValidationError);
  VectorXd v = VectorXd::LinSpaced(20, 0, 19);
  v(2) = v(5) = v(9) = missing_value();
  CHECK_THROWS_AS(decompose_additive(Series::indexed(v), 4), ValidationError);
  CHECK_THROWS_AS(Series({1, 1, 2}, VectorXd::Zero(3)), ValidationError);
}

TEST_CASE("series_from_table sorts by time") {
  const Table t("t", {Column::timestamp("at", {30, 10, 20}), Column::numeric("v", {3.0, 1.0, 2.0})});
  const auto s = series_from_table(t, "v", "at");
  CHECK(s.timestamps == std::vector<Timestamp>{10, 20, 30});
  CHECK(s.values(0) == 1.0);
  CHECK(s.values(2) == 3.0);
}

// ------------------------------------------------------------ properties

TEST_CASE("property: reconstruction, seasonal sum and shift invariance") {
  Rng rng(60);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.index(11));
    const Eigen::Index n = 2 * p + static_cast<Eigen::Index>(rng.index(40));
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 10 * rng.normal() + 0.1 * double(i);
    // Up to 10% missing.
    const Eigen::Index holes = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n / 10 + 1)));
    for (Eigen::Index h = 0; h < holes; ++h) v(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)))) = missing_value();
    if (v.array().isNaN().count() * 10 > n) continue;

    const Series s = Series::indexed(v);
    Decomposition d;
    try {
      d = decompose_additive(s, p);
    } catch (const ValidationError&) {
      continue;  // a phase with no usable observation
    }
    CHECK(max_reconstruction_error(s, d) < 1e-9);
    CHECK(std::abs(seasonal_period_sum(d)) < 1e-9);

    const double c = 100 * rng.normal();
    const Series shifted = Series::indexed((v.array() + c).matrix());
    const auto ds = decompose_additive(shifted, p);
    CHECK((ds.seasonal.values - d.seasonal.values).cwiseAbs().maxCoeff() < 1e-8);

    const Eigen::Index w = 2 * static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>((n - 1) / 2 + 1))) + 1;
    const auto a = moving_average(s, w);
    const auto b = moving_average(shifted, w);
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK(is_missing(a.values(i)) == is_missing(b.values(i)));
      if (!is_missing(a.values(i))) CHECK(std::abs(b.values(i) - a.values(i) - c) < 1e-8);
    }
  }
}

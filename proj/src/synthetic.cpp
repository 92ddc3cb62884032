#include "mfgpipe/synthetic.hpp"

#include <cstdio>

#include "mfgpipe/error.hpp"
#include "mfgpipe/random.hpp"

namespace mfg {

namespace {

std::string var_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "Var%02zu", i + 1);
  return buf;
}

}  // namespace

std::string planted_signal_name(const PlantedSignalSpec& spec) { return var_name(spec.signal_position); }

Table make_planted_signal(const PlantedSignalSpec& spec) {
  const std::size_t p = spec.noise_predictors + 1;
  if (spec.signal_position >= p) throw ValidationError("signal position outside the predictor range");
  if (spec.rows < 2) throw ValidationError("need at least 2 rows");
  Rng rng(spec.seed);

  std::vector<std::vector<double>> x(p, std::vector<double>(spec.rows));
  std::vector<double> y(spec.rows);
  std::vector<std::optional<std::string>> tool(spec.rows);
  std::vector<double> sparse(spec.rows);
  std::vector<std::uint8_t> sparse_missing(spec.rows);
  for (std::size_t i = 0; i < spec.rows; ++i) {
    for (std::size_t j = 0; j < p; ++j) x[j][i] = rng.normal();
    y[i] = spec.signal_coefficient * x[spec.signal_position][i] + spec.noise_sd * rng.normal();
    if (spec.extras) {
      tool[i] = "T" + std::to_string(1 + rng.index(4));
      sparse_missing[i] = rng.uniform() < 0.7 ? 1 : 0;
      sparse[i] = rng.normal();
    }
  }

  std::vector<Column> cols;
  cols.push_back(Column::numeric("y", y));
  for (std::size_t j = 0; j < p; ++j) cols.push_back(Column::numeric(var_name(j), x[j]));
  if (spec.extras) {
    cols.push_back(Column::categorical("tool", tool));
    cols.push_back(Column::numeric("probe_sparse", sparse, sparse_missing));
  }
  return Table("planted", std::move(cols));
}

}  // namespace mfg

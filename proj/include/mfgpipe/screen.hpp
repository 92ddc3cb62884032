#pragma once

#include <string>
#include <vector>

#include "mfgpipe/stats.hpp"
#include "mfgpipe/table.hpp"

namespace mfg {

struct ScreenRules {
  double r_min = 0.1;   // keep a Pearson-tested predictor when |r| >= r_min
  double alpha = 0.05;  // keep a rank / chi-square tested predictor when p <= alpha
};

struct ScreenResult {
  std::vector<std::string> retained;
  std::vector<AssociationResult> results;  // input column order
  std::vector<std::string> constant;       // never tested, never dropped
  std::vector<std::string> untested;       // timestamps, or too few complete pairs
};

// Univariate quick filter of every column against `response`. The test
// follows the kind pairing:
//   numeric / numeric            Pearson |r|
//   numeric / two-valued         Mann-Whitney U
//   numeric / multi-level        Mann-Whitney one-vs-rest per level, kept if any level passes
//   categorical / categorical    chi-square independence
// Two-valued means Boolean or exactly two observed values. Pairs are dropped
// pairwise, never listwise.
ScreenResult quick_filter(const Table& table, const std::string& response, const ScreenRules& rules = {});

// VIF over the listwise-complete rows of the named numeric or boolean columns.
VifReport vif(const Table& table, const std::vector<std::string>& predictors);

}  // namespace mfg

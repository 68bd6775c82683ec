#pragma once

#include <string>
#include <vector>

#include "ild/dataset.hpp"

namespace ild {

struct TestResult {
  double p_value = 1.0;
  double statistic = 0.0;  // t for the t-tests, observed table probability for FET
  std::string test;
  bool degenerate = false;  // a convention was applied where the formula is undefined
};

// One-sample one-sided t-test of H1: mean > mu0. Zero sample variance maps to
// p=0 (mean above mu0) or p=1 (otherwise) with the degenerate flag set.
TestResult ott_pvalue(const std::vector<double>& samples, double mu0 = 0.0);

// Paired fold-wise t-test with the resampling-corrected variance
// sigma^2 * (1/K + 1/(K-1)); one-sided p = 1 - cdf(t). Zero-variance
// differences fall back to the same conventions as ott_pvalue.
TestResult corrected_paired_ttest(const std::vector<double>& a,
                                  const std::vector<double>& b);

// Two-sided Fisher exact test on a 2x2 table: sums hypergeometric
// probabilities of all tables with the observed margins whose probability
// does not exceed the observed one. Exact rational arithmetic for total
// counts up to 1000, log-space with a 1e-12 relative tie slack above that.
TestResult fisher_exact(const ConfusionMatrix& cm);

struct HolmOutcome {
  int tau = 0;                     // rejections; always a prefix of sorted order
  std::vector<bool> rejected;      // in original input order
  std::vector<double> sorted_p;    // ascending
  std::vector<double> thresholds;  // alpha/(J+1-j) for sorted position j
};

// Holm step-down: reject sorted p_j while p_j < alpha/(J+1-j), stop at the
// first failure.
HolmOutcome holm_bonferroni(const std::vector<double>& p_values, double alpha);

enum class AggMode { mean, median };

// mean or median (even length averages the middle two), clamped to [0,1]
double aggregate_pvalues(std::vector<double> ps, AggMode mode);

}  // namespace ild

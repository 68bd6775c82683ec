#include "ild/stats.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ild/mathx.hpp"

namespace ild {
namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// unbiased sample variance
double var_of(const std::vector<double>& v, double mu) {
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(v.size() - 1);
}

TestResult degenerate_onesided(double mu, double mu0, std::string id) {
  TestResult r;
  r.test = std::move(id);
  r.degenerate = true;
  if (mu > mu0) {
    r.p_value = 0.0;
    r.statistic = std::numeric_limits<double>::infinity();
  } else {
    r.p_value = 1.0;
    r.statistic = mu < mu0 ? -std::numeric_limits<double>::infinity() : 0.0;
  }
  return r;
}

double lchoose(long n, long k) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

mpz_class mpz_choose(long n, long k) {
  mpz_class out;
  mpz_bin_uiui(out.get_mpz_t(), static_cast<unsigned long>(n),
               static_cast<unsigned long>(k));
  return out;
}

// num/den with num <= den; exact double division when both fit in 53 bits
double ratio_to_double(const mpz_class& num, const mpz_class& den) {
  if (mpz_sizeinbase(den.get_mpz_t(), 2) <= 53)
    return num.get_d() / den.get_d();
  mpq_class q(num, den);
  q.canonicalize();
  return q.get_d();
}

}  // namespace

TestResult ott_pvalue(const std::vector<double>& samples, double mu0) {
  const int k = static_cast<int>(samples.size());
  if (k < 2) throw std::invalid_argument("ott_pvalue: need at least 2 samples");
  const double mu = mean_of(samples);
  const double var = var_of(samples, mu);
  if (var <= 0.0) return degenerate_onesided(mu, mu0, "ott");
  const double t = (mu - mu0) / std::sqrt(var / k);
  TestResult r;
  r.test = "ott";
  r.statistic = t;
  r.p_value = 1.0 - student_t_cdf(t, k - 1);
  return r;
}

TestResult corrected_paired_ttest(const std::vector<double>& a,
                                  const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("corrected_paired_ttest: length mismatch");
  const int k = static_cast<int>(a.size());
  if (k < 2)
    throw std::invalid_argument("corrected_paired_ttest: need at least 2 pairs");
  std::vector<double> d(a.size());
  for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double mu = mean_of(d);
  const double var = var_of(d, mu);
  if (var <= 0.0) return degenerate_onesided(mu, 0.0, "ptt");
  const double sigma_cor = std::sqrt(var * (1.0 / k + 1.0 / (k - 1)));
  const double t = mu / sigma_cor;
  TestResult r;
  r.test = "ptt";
  r.statistic = t;
  r.p_value = 1.0 - student_t_cdf(t, k - 1);
  return r;
}

TestResult fisher_exact(const ConfusionMatrix& cm) {
  if (cm.counts.rows() != 2 || cm.counts.cols() != 2)
    throw std::invalid_argument("fisher_exact: 2x2 table required");
  const long tn = cm.tn(), fp = cm.fp(), fn = cm.fn(), tp = cm.tp();
  if (tn < 0 || fp < 0 || fn < 0 || tp < 0)
    throw std::invalid_argument("fisher_exact: negative count");
  const long n = tn + fp + fn + tp;
  if (n <= 0) throw std::invalid_argument("fisher_exact: empty table");

  const long r0 = tn + fp;  // truth-0 margin
  const long r1 = fn + tp;
  const long c0 = tn + fn;  // predicted-0 margin
  const long k_lo = std::max(0L, c0 - r1);
  const long k_hi = std::min(r0, c0);

  TestResult r;
  r.test = "fet";

  if (n <= 1000) {
    std::vector<mpz_class> numer;
    numer.reserve(static_cast<size_t>(k_hi - k_lo + 1));
    for (long k = k_lo; k <= k_hi; ++k)
      numer.push_back(mpz_choose(r0, k) * mpz_choose(r1, c0 - k));
    const mpz_class& obs = numer[static_cast<size_t>(tn - k_lo)];
    mpz_class den = 0, acc = 0;
    for (const auto& nk : numer) {
      den += nk;
      if (nk <= obs) acc += nk;  // exact tie rule, no slack needed
    }
    r.statistic = ratio_to_double(obs, den);
    r.p_value = ratio_to_double(acc, den);
  } else {
    const double lden = lchoose(n, c0);
    const double lobs =
        lchoose(r0, tn) + lchoose(r1, c0 - tn) - lden;
    double p = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) {
      const double lp = lchoose(r0, k) + lchoose(r1, c0 - k) - lden;
      if (lp <= lobs + 1e-12 * std::fabs(lobs) + 1e-12) p += std::exp(lp);
    }
    r.statistic = std::exp(lobs);
    r.p_value = std::min(1.0, p);
  }
  return r;
}

HolmOutcome holm_bonferroni(const std::vector<double>& p_values, double alpha) {
  const int j_total = static_cast<int>(p_values.size());
  if (j_total == 0) return {};
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("holm_bonferroni: alpha must be in (0,1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("holm_bonferroni: p-value outside [0,1]");

  std::vector<int> order(p_values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return p_values[a] < p_values[b]; });

  HolmOutcome out;
  out.rejected.assign(p_values.size(), false);
  out.sorted_p.resize(p_values.size());
  out.thresholds.resize(p_values.size());
  bool stopped = false;
  for (int j = 0; j < j_total; ++j) {
    out.sorted_p[j] = p_values[order[j]];
    out.thresholds[j] = alpha / static_cast<double>(j_total - j);
    if (!stopped && out.sorted_p[j] < out.thresholds[j]) {
      out.rejected[order[j]] = true;
      out.tau++;
    } else {
      stopped = true;
    }
  }
  return out;
}

double aggregate_pvalues(std::vector<double> ps, AggMode mode) {
  if (ps.empty()) throw std::invalid_argument("aggregate_pvalues: empty input");
  double v = 0.0;
  if (mode == AggMode::mean) {
    v = mean_of(ps);
  } else {
    std::sort(ps.begin(), ps.end());
    const size_t n = ps.size();
    v = n % 2 == 1 ? ps[n / 2] : 0.5 * (ps[n / 2 - 1] + ps[n / 2]);
  }
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace ild

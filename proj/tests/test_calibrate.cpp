#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ild/calibrate.hpp"
#include "ild/mathx.hpp"
#include "ild/rng.hpp"

using namespace ild;

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::VectorXd row = z.row(i).transpose();
    const double lse = logsumexp(row);
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      out(i, c) = std::exp(z(i, c) - lse);
  }
  return out;
}

// random class-conditional scores plus labels drawn from the softened truth;
// sharpening the logits by `overconfidence` miscalibrates the model on purpose
struct CalData {
  Eigen::MatrixXd probs;
  std::vector<int> labels;
};

CalData make_data(int n, int m, double overconfidence, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd z(n, m);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < m; ++c) z(i, c) = 1.5 * rng.normal();
  Eigen::MatrixXd truth = softmax_rows(z);
  CalData d;
  d.probs = softmax_rows(z * overconfidence);
  d.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(m);
    for (int c = 0; c < m; ++c) row[c] = truth(i, c);
    d.labels[i] = rng.categorical(row);
  }
  return d;
}

double log_loss_bits(const Eigen::MatrixXd& probs,
                     const std::vector<int>& labels) {
  double acc = 0.0;
  for (size_t i = 0; i < labels.size(); ++i)
    acc -= lg(std::max(probs(i, labels[i]), 1e-300)) / labels.size();
  return acc;
}

}  // namespace

TEST_SUITE("calibrate") {

TEST_CASE("temperature recovers T near 1 on calibrated data") {
  CalData d = make_data(2000, 3, 1.0, 2024);
  Calibrator cal = fit_calibrator(CalMethod::temperature, d.probs, d.labels);
  CHECK(cal.temperature() >= 0.9);
  CHECK(cal.temperature() <= 1.1);

  // the golden-section result must beat a dense grid search
  auto nll = [&](double t) {
    double acc = 0.0;
    for (size_t i = 0; i < d.labels.size(); ++i) {
      Eigen::VectorXd z = d.probs.row(i).cwiseMax(1e-12).array().log().matrix()
                              .transpose() / t;
      acc += logsumexp(z) - z(d.labels[i]);
    }
    return acc;
  };
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 400; ++k)
    best = std::min(best, nll(std::pow(10.0, -1.0 + 2.0 * k / 400.0)));
  CHECK(nll(cal.temperature()) <= best + 1e-8);
}

TEST_CASE("temperature detects overconfident scores") {
  CalData d = make_data(2000, 3, 2.5, 11);
  Calibrator cal = fit_calibrator(CalMethod::temperature, d.probs, d.labels);
  CHECK(cal.temperature() > 1.5);  // needs softening
  Eigen::MatrixXd q = cal.transform(d.probs);
  CHECK(log_loss_bits(q, d.labels) < log_loss_bits(d.probs, d.labels));
}

TEST_CASE("isotonic is a fixed point on monotone inputs") {
  // four score levels whose empirical frequency increases with the score
  const std::vector<double> level = {0.1, 0.3, 0.6, 0.9};
  const std::vector<int> pos_per_ten = {1, 3, 6, 9};
  Eigen::MatrixXd probs(40, 2);
  std::vector<int> labels(40);
  for (int g = 0; g < 4; ++g)
    for (int k = 0; k < 10; ++k) {
      const int i = 10 * g + k;
      probs(i, 1) = level[g];
      probs(i, 0) = 1.0 - level[g];
      labels[i] = k < pos_per_ten[g] ? 1 : 0;
    }
  Calibrator cal = fit_calibrator(CalMethod::isotonic, probs, labels);
  Eigen::MatrixXd q = cal.transform(probs);
  for (int i = 0; i < 40; ++i) {
    CHECK(q(i, 1) == doctest::Approx(probs(i, 1)).epsilon(1e-12));
    CHECK(q(i, 0) == doctest::Approx(probs(i, 0)).epsilon(1e-12));
  }

  // transform must be monotone along a sweep, per class
  Eigen::MatrixXd sweep(101, 2);
  for (int k = 0; k <= 100; ++k) {
    sweep(k, 1) = k / 100.0;
    sweep(k, 0) = 1.0 - sweep(k, 1);
  }
  Eigen::MatrixXd qs = cal.transform(sweep);
  for (int k = 1; k <= 100; ++k) CHECK(qs(k, 1) >= qs(k - 1, 1) - 1e-12);
}

TEST_CASE("histogram with one bin collapses to the class frequencies") {
  CalData d = make_data(200, 2, 1.7, 7);
  int ones = 0;
  for (int y : d.labels) ones += y;
  CalOptions opt;
  opt.histogram_bins = 1;
  Calibrator cal = fit_calibrator(CalMethod::histogram, d.probs, d.labels, opt);
  Eigen::MatrixXd q = cal.transform(d.probs);
  const double f1 = ones / 200.0;
  for (int i = 0; i < 200; ++i) {
    CHECK(q(i, 0) == doctest::Approx(1.0 - f1).epsilon(1e-12));
    CHECK(q(i, 1) == doctest::Approx(f1).epsilon(1e-12));
  }
}

TEST_CASE("unit temperature is the identity") {
  Calibrator cal = Calibrator::with_temperature(1.0, 2);
  Eigen::MatrixXd probs(3, 2);
  probs << 0.25, 0.75, 1.0, 0.0, 0.5, 0.5;
  Eigen::MatrixXd q = cal.transform(probs);
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 2; ++c)
      CHECK(std::fabs(q(i, c) - probs(i, c)) <= 1e-12);
}

TEST_CASE("huge temperature flattens every row") {
  Calibrator cal = Calibrator::with_temperature(1e9, 4);
  Eigen::MatrixXd probs(2, 4);
  probs << 0.7, 0.1, 0.1, 0.1, 0.01, 0.01, 0.01, 0.97;
  Eigen::MatrixXd q = cal.transform(probs);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 4; ++c) CHECK(q(i, c) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("isotonic keeps the two-symbol example at 0.052 bits") {
  // one covariate value is deterministic, the other leaks one decile
  const int n = 1000;
  Eigen::MatrixXd probs(n, 2);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    if (i < 500) {
      probs(i, 0) = 1.0;
      probs(i, 1) = 0.0;
      labels[i] = 0;
    } else {
      probs(i, 0) = 0.9;
      probs(i, 1) = 0.1;
      labels[i] = i < 950 ? 0 : 1;
    }
  }
  Calibrator cal = fit_calibrator(CalMethod::isotonic, probs, labels);
  Eigen::MatrixXd q = cal.transform(probs);

  double cond = 0.0;  // (1/N) sum_i sum_m q lg q
  Eigen::VectorXd marg = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 2; ++c) {
      cond += xlgx(q(i, c)) / n;
      marg(c) += q(i, c) / n;
    }
  }
  double mi = cond - (xlgx(marg(0)) + xlgx(marg(1)));
  CHECK(std::fabs(mi - 0.052) <= 0.002);
}

TEST_CASE("all methods emit simplex rows on fuzzed inputs") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    CalData d = make_data(300, 3, 2.0, 100 + seed);
    CalData probe = make_data(80, 3, 0.6, 200 + seed);
    for (CalMethod method : {CalMethod::isotonic, CalMethod::platt,
                             CalMethod::beta, CalMethod::temperature,
                             CalMethod::histogram}) {
      Calibrator cal = fit_calibrator(method, d.probs, d.labels);
      Eigen::MatrixXd q = apply_calibrator(cal, probe.probs);
      for (int i = 0; i < q.rows(); ++i) {
        CHECK(q.row(i).minCoeff() >= 0.0);
        CHECK(q.row(i).maxCoeff() <= 1.0);
        CHECK(q.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("temperature never changes a row argmax") {
  CalData d = make_data(500, 4, 3.0, 31);
  Calibrator cal = fit_calibrator(CalMethod::temperature, d.probs, d.labels);
  Eigen::MatrixXd q = cal.transform(d.probs);
  for (int i = 0; i < 500; ++i) {
    Eigen::Index a, b;
    d.probs.row(i).maxCoeff(&a);
    q.row(i).maxCoeff(&b);
    CHECK(a == b);
  }
}

TEST_CASE("isotonic and histogram lower the log-loss on their own fit data") {
  for (std::uint64_t seed : {5u, 6u, 7u, 8u}) {
    CalData d = make_data(500, 3, 2.2, 300 + seed);
    const double raw = log_loss_bits(d.probs, d.labels);
    for (CalMethod method : {CalMethod::isotonic, CalMethod::histogram}) {
      Calibrator cal = fit_calibrator(method, d.probs, d.labels);
      const double fitted = log_loss_bits(cal.transform(d.probs), d.labels);
      CHECK(fitted <= raw + 1e-6);
    }
  }
}

TEST_CASE("parametric methods fix an overconfident binary model") {
  CalData d = make_data(1500, 2, 3.0, 41);
  const double raw = log_loss_bits(d.probs, d.labels);
  for (CalMethod method : {CalMethod::platt, CalMethod::beta}) {
    Calibrator cal = fit_calibrator(method, d.probs, d.labels);
    CHECK(log_loss_bits(cal.transform(d.probs), d.labels) <= raw);
  }
}

TEST_CASE("single-class data errors or degrades by method") {
  Eigen::MatrixXd probs(20, 2);
  std::vector<int> labels(20, 0);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    probs(i, 1) = 0.3 * rng.uniform();
    probs(i, 0) = 1.0 - probs(i, 1);
  }
  for (CalMethod method : {CalMethod::platt, CalMethod::beta,
                           CalMethod::temperature})
    CHECK_THROWS_AS(fit_calibrator(method, probs, labels),
                    std::invalid_argument);
  for (CalMethod method : {CalMethod::isotonic, CalMethod::histogram}) {
    Calibrator cal = fit_calibrator(method, probs, labels);
    Eigen::MatrixXd q = cal.transform(probs);
    for (int i = 0; i < 20; ++i) {
      CHECK(q(i, 0) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(q(i, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("input validation") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  CHECK_THROWS_AS(fit_calibrator(CalMethod::platt, bad, {0, 1}),
                  std::invalid_argument);
  // NaN compares false against every simplex check, and a NaN score would
  // wedge the isotonic pool loop, so it must be rejected up front
  Eigen::MatrixXd nan_row(2, 2);
  nan_row << 0.5, 0.5, std::numeric_limits<double>::quiet_NaN(), 0.5;
  for (CalMethod m : {CalMethod::isotonic, CalMethod::platt, CalMethod::beta,
                      CalMethod::temperature, CalMethod::histogram})
    CHECK_THROWS_AS(fit_calibrator(m, nan_row, {0, 1}), std::invalid_argument);
  Eigen::MatrixXd ok(2, 2);
  ok << 0.5, 0.5, 0.4, 0.6;
  CHECK_THROWS_AS(fit_calibrator(CalMethod::platt, ok, {0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_calibrator(CalMethod::platt, ok, {0, 2}),
                  std::invalid_argument);
  Calibrator cal = fit_calibrator(CalMethod::isotonic, ok, {0, 1});
  Eigen::MatrixXd wide(1, 3);
  wide << 0.2, 0.3, 0.5;
  CHECK_THROWS_AS(cal.transform(wide), std::invalid_argument);
  CHECK_THROWS_AS(Calibrator::with_temperature(0.0, 2), std::invalid_argument);
}

}  // TEST_SUITE

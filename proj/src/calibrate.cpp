#include "ild/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "ild/mathx.hpp"

namespace ild {

namespace {

constexpr double kProbFloor = 1e-12;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_rows(const Eigen::MatrixXd& probs) {
  if (probs.rows() == 0 || probs.cols() < 2)
    throw std::invalid_argument("calibrate: need a nonempty matrix with >= 2 classes");
  // NaN also compares false against the simplex checks below, and a NaN
  // score would break the sort ordering inside the isotonic fit
  if (!probs.allFinite())
    throw std::invalid_argument("calibrate: rows must be finite");
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (std::fabs(probs.row(i).sum() - 1.0) > 1e-6 ||
        probs.row(i).minCoeff() < -1e-12)
      throw std::invalid_argument("calibrate: rows must lie on the simplex");
  }
}

// pool-adjacent-violators on (score, target) pairs; ties in score are
// aggregated first so the fitted step function is single-valued
void pav_fit(std::vector<std::pair<double, double>> pts,
             std::vector<double>& xs, std::vector<double>& vs) {
  std::sort(pts.begin(), pts.end());
  std::vector<double> bx, bv, bw;
  size_t i = 0;
  while (i < pts.size()) {
    size_t j = i;
    double sum = 0.0;
    while (j < pts.size() && pts[j].first == pts[i].first) sum += pts[j++].second;
    bx.push_back(pts[i].first);
    bv.push_back(sum / (j - i));
    bw.push_back(static_cast<double>(j - i));
    while (bv.size() >= 2 && bv[bv.size() - 2] > bv.back()) {
      const double w = bw[bw.size() - 2] + bw.back();
      const double v =
          (bv[bv.size() - 2] * bw[bw.size() - 2] + bv.back() * bw.back()) / w;
      bx.pop_back();
      bv.pop_back();
      bw.pop_back();
      bv.back() = v;
      bw.back() = w;
    }
    i = j;
  }
  xs = std::move(bx);
  vs = std::move(bv);
}

double step_eval(const std::vector<double>& xs, const std::vector<double>& vs,
                 double s) {
  const auto it = std::upper_bound(xs.begin(), xs.end(), s);
  const auto idx = it - xs.begin();
  return vs[idx == 0 ? 0 : idx - 1];
}

// Newton iterations for a small logistic regression; X has one column per
// coefficient, the last column is the intercept
Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& X,
                             const std::vector<double>& t) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  double base = 0.0;
  for (double v : t) base += v / n;
  base = std::min(std::max(base, 1e-6), 1.0 - 1e-6);
  w(p - 1) = std::log(base / (1.0 - base));
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(p, p) * 1e-9;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = sigmoid(X.row(i).dot(w));
      g += (mu - t[i]) * X.row(i).transpose();
      h += mu * (1.0 - mu) * X.row(i).transpose() * X.row(i);
    }
    const Eigen::VectorXd step = h.ldlt().solve(g);
    w -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  return w;
}

}  // namespace

CalMethod cal_method_from_string(const std::string& name) {
  if (name == "isotonic") return CalMethod::isotonic;
  if (name == "platt") return CalMethod::platt;
  if (name == "beta") return CalMethod::beta;
  if (name == "temperature") return CalMethod::temperature;
  if (name == "histogram") return CalMethod::histogram;
  throw std::invalid_argument("unknown calibration method: " + name);
}

std::string to_string(CalMethod method) {
  switch (method) {
    case CalMethod::isotonic: return "isotonic";
    case CalMethod::platt: return "platt";
    case CalMethod::beta: return "beta";
    case CalMethod::temperature: return "temperature";
    case CalMethod::histogram: return "histogram";
  }
  return "?";
}

Calibrator Calibrator::with_temperature(double t, int num_classes) {
  if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (num_classes < 2) throw std::invalid_argument("need >= 2 classes");
  Calibrator cal;
  cal.method_ = CalMethod::temperature;
  cal.m_ = num_classes;
  cal.temp_ = t;
  return cal;
}

Calibrator fit_calibrator(CalMethod method, const Eigen::MatrixXd& probs,
                          const std::vector<int>& labels,
                          const CalOptions& opt) {
  check_rows(probs);
  const int n = static_cast<int>(probs.rows());
  const int m = static_cast<int>(probs.cols());
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("calibrate: labels misaligned with probs");
  for (int y : labels)
    if (y < 0 || y >= m) throw std::invalid_argument("calibrate: label out of range");

  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2 &&
      (method == CalMethod::platt || method == CalMethod::beta ||
       method == CalMethod::temperature))
    throw std::invalid_argument("calibrate: " + to_string(method) +
                                " needs at least two classes in the data");

  Calibrator cal;
  cal.method_ = method;
  cal.m_ = m;

  switch (method) {
    case CalMethod::isotonic: {
      cal.iso_x_.resize(m);
      cal.iso_v_.resize(m);
      for (int c = 0; c < m; ++c) {
        std::vector<std::pair<double, double>> pts(n);
        for (int i = 0; i < n; ++i)
          pts[i] = {probs(i, c), labels[i] == c ? 1.0 : 0.0};
        pav_fit(std::move(pts), cal.iso_x_[c], cal.iso_v_[c]);
      }
      break;
    }
    case CalMethod::platt:
    case CalMethod::beta: {
      cal.coef_.assign(m, {0.0, 0.0, 0.0});
      for (int c = 0; c < m; ++c) {
        std::vector<double> t(n);
        double pos = 0.0;
        for (int i = 0; i < n; ++i) pos += (t[i] = labels[i] == c ? 1.0 : 0.0);
        if (pos == 0.0 || pos == n) {
          // class absent (or alone) in this split: constant map
          const double c0 = pos == 0.0 ? -35.0 : 35.0;
          cal.coef_[c] = {0.0, 0.0, c0};
          continue;
        }
        if (method == CalMethod::platt) {
          Eigen::MatrixXd X(n, 2);
          for (int i = 0; i < n; ++i) {
            X(i, 0) = probs(i, c);
            X(i, 1) = 1.0;
          }
          const Eigen::VectorXd w = fit_logistic(X, t);
          cal.coef_[c] = {w(0), 0.0, w(1)};
        } else {
          Eigen::MatrixXd X(n, 3);
          for (int i = 0; i < n; ++i) {
            const double p = std::min(std::max(probs(i, c), kProbFloor),
                                      1.0 - kProbFloor);
            X(i, 0) = std::log(p);
            X(i, 1) = -std::log(1.0 - p);
            X(i, 2) = 1.0;
          }
          const Eigen::VectorXd w = fit_logistic(X, t);
          cal.coef_[c] = {w(0), w(1), w(2)};
        }
      }
      break;
    }
    case CalMethod::temperature: {
      Eigen::MatrixXd logit =
          probs.cwiseMax(kProbFloor).array().log().matrix();
      const auto nll = [&](double t) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          Eigen::VectorXd row = logit.row(i).transpose() / t;
          acc += logsumexp(row) - row(labels[i]);
        }
        return acc;
      };
      // golden-section over log T; the likelihood is smooth and unimodal here
      const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
      double lo = std::log(1e-2), hi = std::log(1e2);
      double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
      double f1 = nll(std::exp(x1)), f2 = nll(std::exp(x2));
      for (int it = 0; it < 120 && hi - lo > 1e-12; ++it) {
        if (f1 <= f2) {
          hi = x2; x2 = x1; f2 = f1;
          x1 = hi - invphi * (hi - lo);
          f1 = nll(std::exp(x1));
        } else {
          lo = x1; x1 = x2; f1 = f2;
          x2 = lo + invphi * (hi - lo);
          f2 = nll(std::exp(x2));
        }
      }
      cal.temp_ = std::exp((lo + hi) / 2.0);
      break;
    }
    case CalMethod::histogram: {
      const int b = opt.histogram_bins;
      if (b < 1) throw std::invalid_argument("calibrate: need >= 1 histogram bin");
      cal.hist_cuts_.resize(m);
      cal.hist_vals_.resize(m);
      for (int c = 0; c < m; ++c) {
        std::vector<double> sorted(n);
        for (int i = 0; i < n; ++i) sorted[i] = probs(i, c);
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> cuts;
        for (int k = 1; k < b; ++k)
          cuts.push_back(sorted[static_cast<size_t>(k) * n / b]);
        double global = 0.0;
        std::vector<double> hit(b, 0.0), cnt(b, 0.0);
        for (int i = 0; i < n; ++i) {
          const auto idx = std::upper_bound(cuts.begin(), cuts.end(),
                                            probs(i, c)) - cuts.begin();
          cnt[idx] += 1.0;
          hit[idx] += labels[i] == c ? 1.0 : 0.0;
          global += (labels[i] == c ? 1.0 : 0.0) / n;
        }
        std::vector<double> vals(b);
        for (int k = 0; k < b; ++k)
          vals[k] = cnt[k] > 0.0 ? hit[k] / cnt[k] : global;
        cal.hist_cuts_[c] = std::move(cuts);
        cal.hist_vals_[c] = std::move(vals);
      }
      break;
    }
  }
  return cal;
}

Eigen::MatrixXd Calibrator::transform(const Eigen::MatrixXd& probs) const {
  check_rows(probs);
  if (static_cast<int>(probs.cols()) != m_)
    throw std::invalid_argument("calibrate: class count mismatch");
  const Eigen::Index n = probs.rows();
  Eigen::MatrixXd out(n, m_);

  if (method_ == CalMethod::temperature) {
    if (temp_ == 1.0) return probs;  // exact identity, skip the log round-trip
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd z =
          probs.row(i).cwiseMax(kProbFloor).array().log().matrix().transpose() /
          temp_;
      const double lse = logsumexp(z);
      for (int c = 0; c < m_; ++c) out(i, c) = std::exp(z(c) - lse);
    }
    return out;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < m_; ++c) {
      const double s = probs(i, c);
      switch (method_) {
        case CalMethod::isotonic:
          out(i, c) = step_eval(iso_x_[c], iso_v_[c], s);
          break;
        case CalMethod::platt:
          out(i, c) = sigmoid(coef_[c][0] * s + coef_[c][2]);
          break;
        case CalMethod::beta: {
          const double p = std::min(std::max(s, kProbFloor), 1.0 - kProbFloor);
          out(i, c) = sigmoid(coef_[c][0] * std::log(p) -
                              coef_[c][1] * std::log(1.0 - p) + coef_[c][2]);
          break;
        }
        case CalMethod::histogram: {
          const auto idx = std::upper_bound(hist_cuts_[c].begin(),
                                            hist_cuts_[c].end(), s) -
                           hist_cuts_[c].begin();
          out(i, c) = hist_vals_[c][idx];
          break;
        }
        default: break;
      }
    }
    const double sum = out.row(i).sum();
    if (sum > 1e-300)
      out.row(i) /= sum;
    else
      out.row(i).setConstant(1.0 / m_);
  }
  return out;
}

nlohmann::json Calibrator::params() const {
  nlohmann::json j;
  j["method"] = to_string(method_);
  j["num_classes"] = m_;
  switch (method_) {
    case CalMethod::temperature:
      j["temperature"] = temp_;
      break;
    case CalMethod::platt:
    case CalMethod::beta: {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& c : coef_) rows.push_back({c[0], c[1], c[2]});
      j["coefficients"] = rows;
      break;
    }
    case CalMethod::isotonic: {
      nlohmann::json blocks = nlohmann::json::array();
      for (const auto& v : iso_v_) blocks.push_back(v.size());
      j["blocks_per_class"] = blocks;
      break;
    }
    case CalMethod::histogram:
      j["bins"] = hist_vals_.empty() ? 0 : static_cast<int>(hist_vals_[0].size());
      break;
  }
  return j;
}

Eigen::MatrixXd apply_calibrator(const Calibrator& cal,
                                 const Eigen::MatrixXd& probs) {
  return cal.transform(probs);
}

}  // namespace ild

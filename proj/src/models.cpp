#include "ild/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ild/mathx.hpp"
#include "ild/parallel.hpp"
#include "ild/rng.hpp"

namespace ild {

std::vector<int> argmax_rows(const Eigen::MatrixXd& p) {
  std::vector<int> out(p.rows());
  for (int i = 0; i < p.rows(); ++i) {
    int best = 0;
    for (int m = 1; m < p.cols(); ++m)
      if (p(i, m) > p(i, best)) best = m;
    out[i] = best;
  }
  return out;
}

std::vector<int> ProbClassifier::predict(const Eigen::MatrixXd& x) const {
  return argmax_rows(predict_proba(x));
}

void MarginalPredictor::fit(const Dataset& train) {
  train.validate();
  marginal_ = class_marginal(train.y, train.num_classes);
}

Eigen::MatrixXd MarginalPredictor::predict_proba(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd p(x.rows(), marginal_.size());
  p.rowwise() = marginal_.transpose();
  return clip_rows(p);
}

std::unique_ptr<MarginalPredictor> fit_marginal_predictor(const Dataset& train) {
  auto model = std::make_unique<MarginalPredictor>();
  model->fit(train);
  return model;
}

KnnClassifier::KnnClassifier(int k) : k_(k) {
  if (k < 1) throw std::invalid_argument("knn: k must be positive");
}

void KnnClassifier::fit(const Dataset& train) {
  train.validate();
  if (k_ > train.n())
    throw std::invalid_argument("knn: k exceeds training size");
  train_ = train;
}

Eigen::MatrixXd KnnClassifier::predict_proba(const Eigen::MatrixXd& x) const {
  if (train_.n() == 0) throw std::logic_error("knn: not fitted");
  const int m = train_.num_classes;
  Eigen::MatrixXd out(x.rows(), m);
  std::vector<std::pair<double, int>> dist(train_.n());
  for (int q = 0; q < x.rows(); ++q) {
    for (int i = 0; i < train_.n(); ++i)
      dist[i] = {(train_.x.row(i) - x.row(q)).squaredNorm(), i};
    std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < k_; ++j) counts(train_.y[dist[j].second]) += 1.0;
    out.row(q) = ((counts.array() + 1.0) / (k_ + m)).transpose();
  }
  return out;
}

GmmBayesClassifier::GmmBayesClassifier(int components, CovType type, double reg,
                                       std::uint64_t seed)
    : components_(components), type_(type), reg_(reg), seed_(seed) {
  if (components < 1 || components > 10)
    throw std::invalid_argument("gmm-bayes: components outside [1,10]");
  if (!(reg >= 1e-10 && reg <= 1e-1))
    throw std::invalid_argument("gmm-bayes: reg outside [1e-10,1e-1]");
}

void GmmBayesClassifier::fit(const Dataset& train) {
  train.validate();
  priors_ = class_marginal(train.y, train.num_classes);
  class_n_ = priors_ * train.n();
  gmms_.assign(train.num_classes, Gmm{});
  for (int m = 0; m < train.num_classes; ++m) {
    std::vector<int> rows;
    for (int i = 0; i < train.n(); ++i)
      if (train.y[i] == m) rows.push_back(i);
    if (static_cast<int>(rows.size()) < components_)
      throw std::invalid_argument("gmm-bayes: class smaller than component count");
    Eigen::MatrixXd xm(rows.size(), train.dim());
    for (size_t i = 0; i < rows.size(); ++i) xm.row(i) = train.x.row(rows[i]);
    gmms_[m].fit(xm, components_, type_, reg_,
                 derive_seed(seed_, 0x6b, static_cast<std::uint64_t>(m)));
  }
}

Eigen::MatrixXd GmmBayesClassifier::predict_proba(const Eigen::MatrixXd& x) const {
  if (gmms_.empty()) throw std::logic_error("gmm-bayes: not fitted");
  const int m = num_classes();
  Eigen::MatrixXd logj(x.rows(), m);
  for (int c = 0; c < m; ++c)
    logj.col(c) = gmms_[c].log_density(x).array() + std::log(priors_(c));
  Eigen::MatrixXd p(x.rows(), m);
  for (int i = 0; i < x.rows(); ++i) {
    const double lse = logsumexp(logj.row(i).transpose());
    p.row(i) = (logj.row(i).array() - lse).exp();
  }
  return clip_rows(p);
}

Eigen::VectorXd GmmBayesClassifier::class_log_density(const Eigen::MatrixXd& x,
                                                      int label) const {
  return gmms_.at(label).log_density(x);
}

Eigen::VectorXd GmmBayesClassifier::marginal_log_density(
    const Eigen::MatrixXd& x) const {
  const int m = num_classes();
  Eigen::MatrixXd logj(x.rows(), m);
  for (int c = 0; c < m; ++c)
    logj.col(c) = gmms_[c].log_density(x).array() + std::log(priors_(c));
  Eigen::VectorXd out(x.rows());
  for (int i = 0; i < x.rows(); ++i) out(i) = logsumexp(logj.row(i).transpose());
  return out;
}

double GmmBayesClassifier::aic() const {
  if (gmms_.empty()) throw std::logic_error("gmm-bayes: not fitted");
  // joint likelihood = per-class density fits plus the label likelihood
  // under the empirical priors; the priors add M-1 free parameters
  double out = 0.0;
  for (size_t m = 0; m < gmms_.size(); ++m) {
    out += gmms_[m].aic();
    if (class_n_(m) > 0.0)
      out -= 2.0 * class_n_(m) * std::log(priors_(m));
  }
  return out + 2.0 * (static_cast<double>(gmms_.size()) - 1.0);
}

nlohmann::json candidate_to_json(const ModelCandidate& c) {
  return nlohmann::json{
      {"family", c.family}, {"hp", c.hp}, {"score", c.score}, {"rank", c.rank}};
}

Objective objective_from_string(const std::string& s) {
  if (s == "ber") return Objective::ber;
  if (s == "aic") return Objective::aic;
  if (s == "mse-proxy") return Objective::mse_proxy;
  throw std::invalid_argument("unknown objective: " + s);
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::ber: return "ber";
    case Objective::aic: return "aic";
    case Objective::mse_proxy: return "mse-proxy";
  }
  return "ber";
}

const std::vector<std::string> kPortfolioFamilies = {
    "softmax-net", "pc-softmax-net", "gmm-bayes", "knn"};

namespace {

int log_uniform_int(Rng& rng, int lo, int hi) {
  const double v = rng.log_uniform(static_cast<double>(lo),
                                   static_cast<double>(hi) + 0.999);
  return std::clamp(static_cast<int>(v), lo, hi);
}

}  // namespace

nlohmann::json sample_hyper(const std::string& family,
                            const HyperRanges& ranges, Rng& rng) {
  nlohmann::json hp;
  if (family == "softmax-net" || family == "pc-softmax-net") {
    hp["hidden_layers"] = rng.uniform_int(ranges.min_layers, ranges.max_layers);
    hp["units"] = log_uniform_int(rng, ranges.min_units, ranges.max_units);
    hp["learning_rate"] = rng.log_uniform(ranges.min_lr, ranges.max_lr);
    hp["l2"] = rng.log_uniform(ranges.min_l2, ranges.max_l2);
    hp["epochs"] = ranges.epochs;
    hp["batch_size"] = ranges.batch_size;
    static const char* opts[] = {"adam", "rmsprop", "sgd"};
    hp["optimizer"] = opts[rng.uniform_int(0, 2)];
  } else if (family == "gmm-bayes") {
    hp["components"] = rng.uniform_int(ranges.min_components, ranges.max_components);
    static const char* covs[] = {"full", "diag", "tied", "spherical"};
    hp["covariance"] = covs[rng.uniform_int(0, 3)];
    hp["reg"] = rng.log_uniform(ranges.min_reg, ranges.max_reg);
  } else if (family == "knn") {
    hp["k"] = log_uniform_int(rng, ranges.min_k, ranges.max_k);
  } else if (family == "marginal") {
    // no hyperparameters
  } else {
    throw std::invalid_argument("unknown model family: " + family);
  }
  return hp;
}

std::unique_ptr<ProbClassifier> make_classifier(const std::string& family,
                                                const nlohmann::json& hp,
                                                std::uint64_t seed) {
  if (family == "softmax-net" || family == "pc-softmax-net") {
    NetHyper nh;
    nh.hidden_layers = hp.value("hidden_layers", 1);
    nh.units = hp.value("units", 16);
    nh.learning_rate = hp.value("learning_rate", 1e-2);
    nh.epochs = hp.value("epochs", 120);
    nh.batch_size = hp.value("batch_size", 128);
    nh.l2 = hp.value("l2", 1e-6);
    nh.head = family == "pc-softmax-net" ? Head::pc_softmax : Head::softmax;
    const std::string norm = hp.value("pc_norm", "scaled_exp");
    nh.pc_norm = norm == "weighted_sum" ? PcNorm::weighted_sum : PcNorm::scaled_exp;
    const std::string opt = hp.value("optimizer", "adam");
    nh.optimizer = opt == "sgd" ? Optimizer::sgd
                 : opt == "rmsprop" ? Optimizer::rmsprop : Optimizer::adam;
    return std::make_unique<NetClassifier>(nh, seed);
  }
  if (family == "gmm-bayes") {
    return std::make_unique<GmmBayesClassifier>(
        hp.value("components", 1),
        cov_type_from_string(hp.value("covariance", "full")),
        hp.value("reg", 1e-6), seed);
  }
  if (family == "knn") return std::make_unique<KnnClassifier>(hp.value("k", 5));
  if (family == "marginal") return std::make_unique<MarginalPredictor>();
  throw std::invalid_argument("unknown model family: " + family);
}

std::vector<ModelCandidate> random_search(
    const Dataset& data, const std::string& family, const HyperRanges& ranges,
    int budget, Objective objective, const SplitPlan& plan, std::uint64_t seed,
    const CandidateScorer& custom_scorer, int threads) {
  if (budget < 1) throw std::invalid_argument("random_search: budget >= 1");
  if (objective == Objective::mse_proxy && !custom_scorer)
    throw std::invalid_argument("random_search: mse-proxy needs a scorer");
  if (objective == Objective::aic && family != "gmm-bayes" && !custom_scorer)
    throw std::invalid_argument("random_search: aic applies to gmm-bayes");

  const auto splits = make_splits(data, plan);
  std::vector<ModelCandidate> results(budget);
  std::vector<std::string> failures(budget);

  parallel_for(budget, threads, [&](int i) {
    Rng rng(derive_seed(seed, 0x5ea, static_cast<std::uint64_t>(i)));
    ModelCandidate cand;
    cand.family = family;
    cand.hp = sample_hyper(family, ranges, rng);
    try {
      std::vector<double> scores;
      scores.reserve(splits.size());
      for (size_t s = 0; s < splits.size(); ++s) {
        const std::uint64_t fit_seed =
            derive_seed(seed, 0xf17, static_cast<std::uint64_t>(i), s);
        const Dataset train = data.subset(splits[s].train);
        const Dataset val = data.subset(splits[s].test);
        double sc;
        if (custom_scorer) {
          sc = custom_scorer(train, val, cand.hp, fit_seed);
        } else if (objective == Objective::aic) {
          auto model = make_classifier(family, cand.hp, fit_seed);
          model->fit(train);
          sc = dynamic_cast<const GmmBayesClassifier&>(*model).aic();
        } else {
          auto model = make_classifier(family, cand.hp, fit_seed);
          model->fit(train);
          const auto cm =
              confusion_matrix(val.y, model->predict(val.x), data.num_classes);
          sc = classification_metrics(cm).ber;
        }
        scores.push_back(sc);
      }
      const double n = static_cast<double>(scores.size());
      double mean = 0.0;
      for (double sc : scores) mean += sc;
      mean /= n;
      if (objective == Objective::mse_proxy) {
        // stability proxy: sample variance of the scorer's split estimates
        double ss = 0.0;
        for (double sc : scores) ss += (sc - mean) * (sc - mean);
        cand.score = scores.size() > 1 ? ss / (n - 1.0) : 0.0;
      } else {
        cand.score = mean;
      }
      results[i] = std::move(cand);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  std::vector<ModelCandidate> ok;
  for (int i = 0; i < budget; ++i)
    if (failures[i].empty()) ok.push_back(std::move(results[i]));
  if (ok.empty()) {
    std::string msg = "random_search: every candidate failed;";
    for (int i = 0; i < std::min(budget, 3); ++i)
      msg += " [" + failures[i] + "]";
    throw std::runtime_error(msg);
  }
  std::stable_sort(ok.begin(), ok.end(),
                   [](const ModelCandidate& a, const ModelCandidate& b) {
                     return a.score < b.score;
                   });
  for (size_t i = 0; i < ok.size(); ++i) ok[i].rank = static_cast<int>(i);
  return ok;
}

namespace {

double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double g = 1.0;
  for (int c : counts) {
    const double f = c / static_cast<double>(total);
    g -= f * f;
  }
  return g;
}

struct TreeScorer {
  const Dataset& ds;
  std::vector<double>& importance;
  int max_depth;
  int min_node;

  void split(const std::vector<int>& rows, const std::vector<int>& feats,
             int depth) {
    const int n = static_cast<int>(rows.size());
    if (depth >= max_depth || n < min_node) return;
    std::vector<int> counts(ds.num_classes, 0);
    for (int r : rows) counts[ds.y[r]]++;
    const double node_gini = gini(counts, n);
    if (node_gini <= 0.0) return;

    double best_gain = 0.0;
    int best_f = -1;
    double best_t = 0.0;
    for (int f : feats) {
      std::vector<double> vals(n);
      for (int i = 0; i < n; ++i) vals[i] = ds.x(rows[i], f);
      std::vector<double> sorted = vals;
      std::sort(sorted.begin(), sorted.end());
      for (int q = 1; q <= 15; ++q) {
        const double t = sorted[static_cast<size_t>(n) * q / 16];
        std::vector<int> lc(ds.num_classes, 0), rc(ds.num_classes, 0);
        int ln = 0;
        for (int i = 0; i < n; ++i) {
          if (vals[i] <= t) {
            lc[ds.y[rows[i]]]++;
            ln++;
          } else {
            rc[ds.y[rows[i]]]++;
          }
        }
        if (ln == 0 || ln == n) continue;
        const double child =
            (ln * gini(lc, ln) + (n - ln) * gini(rc, n - ln)) / n;
        const double gain = node_gini - child;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_t = t;
        }
      }
    }
    if (best_f < 0) return;
    importance[best_f] += best_gain * n / ds.n();
    std::vector<int> left, right;
    for (int r : rows)
      (ds.x(r, best_f) <= best_t ? left : right).push_back(r);
    split(left, feats, depth + 1);
    split(right, feats, depth + 1);
  }
};

std::vector<double> anova_f_scores(const Dataset& ds) {
  const int n = ds.n(), d = ds.dim(), m = ds.num_classes;
  std::vector<double> f(d, 0.0);
  std::vector<std::vector<int>> by_class(m);
  for (int i = 0; i < n; ++i) by_class[ds.y[i]].push_back(i);
  for (int j = 0; j < d; ++j) {
    const double grand = ds.x.col(j).mean();
    double between = 0.0, within = 0.0;
    int groups = 0;
    for (int c = 0; c < m; ++c) {
      if (by_class[c].empty()) continue;
      groups++;
      double mu = 0.0;
      for (int i : by_class[c]) mu += ds.x(i, j);
      mu /= by_class[c].size();
      between += by_class[c].size() * (mu - grand) * (mu - grand);
      for (int i : by_class[c]) within += (ds.x(i, j) - mu) * (ds.x(i, j) - mu);
    }
    if (groups < 2 || within <= 0.0 || n <= groups) continue;
    f[j] = (between / (groups - 1)) / (within / (n - groups));
  }
  return f;
}

}  // namespace

FeatureReduction reduce_features(const Dataset& ds, int target_d,
                                 std::uint64_t seed) {
  ds.validate();
  const int d = ds.dim();
  if (target_d <= 0) throw std::invalid_argument("reduce_features: target_d > 0");
  if (target_d > d)
    throw std::invalid_argument("reduce_features: target_d exceeds dimension");

  std::vector<int> keep;
  if (target_d == d) {
    keep.resize(d);
    std::iota(keep.begin(), keep.end(), 0);
  } else {
    std::vector<double> importance(d, 0.0);
    const int rounds = 50;
    const int subset =
        std::max(1, static_cast<int>(std::lround(std::sqrt(double(d)))));
    Rng rng(derive_seed(seed, 0x7e));
    for (int r = 0; r < rounds; ++r) {
      std::vector<int> rows(ds.n());
      for (auto& v : rows) v = rng.uniform_int(0, ds.n() - 1);
      std::vector<int> feats = rng.permutation(d);
      feats.resize(subset);
      TreeScorer scorer{ds, importance, 3, 10};
      scorer.split(rows, feats, 0);
    }
    double total = 0.0;
    for (double v : importance) total += v;
    if (total <= 0.0) importance = anova_f_scores(ds);

    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return importance[a] > importance[b];
    });
    keep.assign(order.begin(), order.begin() + target_d);
    std::sort(keep.begin(), keep.end());
  }

  FeatureReduction out;
  out.columns = keep;
  Eigen::MatrixXd x(ds.n(), target_d);
  for (int j = 0; j < target_d; ++j) x.col(j) = ds.x.col(keep[j]);
  out.data = make_dataset(std::move(x), ds.y, ds.num_classes);
  for (int j = 0; j < target_d; ++j)
    out.data.feature_names.push_back(
        keep[j] < static_cast<int>(ds.feature_names.size())
            ? ds.feature_names[keep[j]]
            : "x" + std::to_string(keep[j]));
  out.data.label_names = ds.label_names;
  return out;
}

}  // namespace ild

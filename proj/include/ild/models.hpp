#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "ild/dataset.hpp"
#include "ild/gmm.hpp"
#include "ild/net.hpp"
#include "ild/splits.hpp"

namespace ild {

class ProbClassifier {
 public:
  virtual ~ProbClassifier() = default;
  virtual void fit(const Dataset& train) = 0;
  // rows sum to 1 within 1e-9 (clipped away from exact 0/1)
  virtual Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const = 0;
  virtual int num_classes() const = 0;
  // row-wise argmax, smallest index on ties
  std::vector<int> predict(const Eigen::MatrixXd& x) const;
};

std::vector<int> argmax_rows(const Eigen::MatrixXd& p);

// predicts the training label marginal for every input
class MarginalPredictor : public ProbClassifier {
 public:
  void fit(const Dataset& train) override;
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override;
  int num_classes() const override { return static_cast<int>(marginal_.size()); }
  const Eigen::VectorXd& marginal() const { return marginal_; }

 private:
  Eigen::VectorXd marginal_;
};

std::unique_ptr<MarginalPredictor> fit_marginal_predictor(const Dataset& train);

// brute-force Euclidean k-NN; probabilities are Laplace-smoothed neighbor
// frequencies, (count + 1) / (k + M), so log-loss stays finite
class KnnClassifier : public ProbClassifier {
 public:
  explicit KnnClassifier(int k);
  void fit(const Dataset& train) override;
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override;
  int num_classes() const override { return train_.num_classes; }

 private:
  int k_;
  Dataset train_;
};

// per-class mixture densities composed through Bayes rule
class GmmBayesClassifier : public ProbClassifier {
 public:
  GmmBayesClassifier(int components, CovType type, double reg,
                     std::uint64_t seed);
  void fit(const Dataset& train) override;
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override;
  int num_classes() const override { return static_cast<int>(gmms_.size()); }

  // natural-log densities used by the density-ratio MI estimate
  Eigen::VectorXd class_log_density(const Eigen::MatrixXd& x, int label) const;
  Eigen::VectorXd marginal_log_density(const Eigen::MatrixXd& x) const;
  const Eigen::VectorXd& priors() const { return priors_; }
  double aic() const;  // joint data log-likelihood, priors included

 private:
  int components_;
  CovType type_;
  double reg_;
  std::uint64_t seed_;
  std::vector<Gmm> gmms_;
  Eigen::VectorXd priors_;
  Eigen::VectorXd class_n_;
};

class NetClassifier : public ProbClassifier {
 public:
  NetClassifier(NetHyper hp, std::uint64_t seed) : net_(hp, seed) {}
  void fit(const Dataset& train) override { net_.fit(train); }
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override {
    return net_.predict_proba(x);
  }
  int num_classes() const override { return net_.num_classes(); }
  const SoftmaxNet& net() const { return net_; }

 private:
  SoftmaxNet net_;
};

struct ModelCandidate {
  std::string family;
  nlohmann::json hp;
  double score = 0.0;  // mean validation objective, lower is better
  int rank = -1;
};

nlohmann::json candidate_to_json(const ModelCandidate& c);

enum class Objective { ber, aic, mse_proxy };

Objective objective_from_string(const std::string& s);
std::string to_string(Objective o);

// sampling windows for random search, sized for commodity-hardware budgets;
// the paper-scale bounds are enforced by the fit functions themselves
struct HyperRanges {
  int min_layers = 0, max_layers = 2;
  int min_units = 4, max_units = 64;       // log-uniform
  double min_lr = 1e-3, max_lr = 1e-1;     // log-uniform
  double min_l2 = 1e-8, max_l2 = 1e-2;     // log-uniform
  int epochs = 120;
  int batch_size = 128;
  int min_components = 1, max_components = 5;
  double min_reg = 1e-8, max_reg = 1e-1;   // log-uniform
  int min_k = 1, max_k = 64;               // log-uniform
};

extern const std::vector<std::string> kPortfolioFamilies;

nlohmann::json sample_hyper(const std::string& family,
                            const HyperRanges& ranges, class Rng& rng);

// constructs an unfitted classifier for the sampled configuration
std::unique_ptr<ProbClassifier> make_classifier(const std::string& family,
                                                const nlohmann::json& hp,
                                                std::uint64_t seed);

// replaces the built-in objective; returns the validation score of hp
// trained on `train` and judged on `val`
using CandidateScorer = std::function<double(
    const Dataset& train, const Dataset& val, const nlohmann::json& hp,
    std::uint64_t seed)>;

// Samples `budget` configurations, scores each as the mean objective over the
// MCCV splits of `plan` (mse-proxy instead takes the sample variance of the
// scorer's split estimates), and returns survivors sorted ascending (ties
// keep sample order). Throws only if every candidate failed.
std::vector<ModelCandidate> random_search(
    const Dataset& data, const std::string& family, const HyperRanges& ranges,
    int budget, Objective objective, const SplitPlan& plan, std::uint64_t seed,
    const CandidateScorer& custom_scorer = nullptr, int threads = 1);

struct FeatureReduction {
  Dataset data;
  std::vector<int> columns;  // ascending original indices of kept features
};

// keeps the target_d columns ranked highest by bagged shallow-tree impurity
// importance, falling back to one-way ANOVA F-scores when the trees find no
// usable split
FeatureReduction reduce_features(const Dataset& ds, int target_d,
                                 std::uint64_t seed);

}  // namespace ild

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ild/dataset.hpp"
#include "ild/gmm.hpp"
#include "ild/net.hpp"

namespace ild {

// One mutual-information estimate in bits. Values are kept unclamped so the
// one-sample t-test downstream sees an unbiased sign; anything outside
// [0, lg M] is flagged instead.
struct MiEstimate {
  double value = 0.0;
  std::string method;
  std::string model;
  int fold = -1;
  bool out_of_range = false;
};

struct EntropyBounds {
  double lower = 0.0;  // H_l in bits
  double upper = 0.0;  // H_u in bits
  int regime = 1;      // piecewise segment m used by the lower bound
};

// Fano-style sandwich on H(Y|X) from a Bayes-approximating classifier's
// holdout error. err must lie in [0, (M-1)/M]; a boundary error sitting on a
// segment edge books the smaller regime (both expressions agree there).
EntropyBounds cond_entropy_bounds(double err, int num_classes);

// Midpoint of the feasible MI interval [H(Y) - H_u, H(Y) - H_l], floored at 0.
MiEstimate mi_midpoint(double err, const Eigen::VectorXd& marginal,
                       int num_classes);

enum class LogLossForm {
  predictive_entropy,  // (1/N) sum_i sum_m p lg p  minus  sum_m q lg q
  cross_entropy        // H(Y) - (1/N) sum_i -lg p_i[y_i]
};

MiEstimate mi_logloss(const Eigen::MatrixXd& probs,
                      const std::vector<int>& labels,
                      const Eigen::VectorXd& marginal,
                      LogLossForm form = LogLossForm::predictive_entropy);

struct GmmMiHyper {
  int max_components = 5;  // K searched in 1..max, picked by AIC
  CovType cov = CovType::full;
  double reg = 1e-6;

  void validate() const;
};

// Density-ratio estimate: per-class conditional mixtures plus the empirical
// label marginal give p(x|y) and p(x); the estimate is the sample mean of
// lg p(x|y) - lg p(x) over the dataset.
MiEstimate mi_gmm(const Dataset& ds, const GmmMiHyper& hp, std::uint64_t seed);

// Sample mean of lg p(x|y) - lg p(x) over `eval` under an already fitted
// per-class mixture model.
double gmm_density_ratio_bits(const class GmmBayesClassifier& model,
                              const Dataset& eval);

struct MineHyper {
  int hidden_layers = 1;
  int units = 32;
  double learning_rate = 1e-3;
  double l2 = 0.0;
  int epochs = 10000;
  int patience = 500;  // epochs without lower-bound improvement before stop
  int ensemble = 10;

  void validate() const;
};

// Donsker-Varadhan lower bound via a statistics network on (x, one-hot y).
// Marginal samples come from a per-epoch label permutation; the denominator
// gradient is bias-corrected with a moving average. The returned value is
// the full-data bound in bits, averaged over `ensemble` seeded runs.
MiEstimate mi_mine(const Dataset& ds, const MineHyper& hp, std::uint64_t seed,
                   int threads = 1);

// Single run trained on `train`, bound evaluated on `eval` (fresh label
// permutation for the marginal side). `ensemble` is ignored.
double mine_holdout_bits(const Dataset& train, const Dataset& eval,
                         const MineHyper& hp, std::uint64_t seed);

// Mean negative log prior-corrected score, -(1/N) sum lg S_pc(x)[y], in bits.
double pc_softmax_score_bits(const SoftmaxNet& net, const Eigen::MatrixXd& x,
                             const std::vector<int>& y);

// Fits on `train`, scores on `eval`. The head is forced to pc-softmax.
MiEstimate mi_pcsoftmax_eval(const Dataset& train, const Dataset& eval,
                             const NetHyper& hp, std::uint64_t seed);

// Standalone variant: holds out a stratified 30% of ds for the evaluation.
MiEstimate mi_pcsoftmax(const Dataset& ds, const NetHyper& hp,
                        std::uint64_t seed);

}  // namespace ild

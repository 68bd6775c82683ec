#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "ild/calibrate.hpp"
#include "ild/dataset.hpp"
#include "ild/miest.hpp"
#include "ild/models.hpp"
#include "ild/stats.hpp"

namespace ild {

// detection approaches; each picks the per-fold statistic and the test that
// turns one candidate's fold column into a p-value
extern const std::vector<std::string> kIldApproaches;

struct IldConfig {
  std::string approach = "log-loss";
  double alpha = 0.01;       // Holm family-wise error rate
  int top_j = 10;            // candidates carried into the outer folds
  int outer_folds = 10;
  int hpo_budget = 100;      // total random-search draws (split across families)
  int inner_repeats = 3;     // MCCV repeats inside the hyperparameter search
  double inner_fraction = 0.3;
  HyperRanges ranges;
  CalMethod calibration = CalMethod::isotonic;   // cal-log-loss only
  // cross-entropy here, unlike the reporting default: the t-test needs fold
  // estimates whose sign is unbiased under independence, and the
  // predictive-entropy form cannot go negative for near-balanced labels
  LogLossForm logloss_form = LogLossForm::cross_entropy;
  PcNorm pc_norm = PcNorm::scaled_exp;           // pc-softmax only
  int mine_epochs = 200;     // desk-scale training length inside the pipeline
  int mine_patience = 50;
  int threads = 1;

  void validate() const;
};

// one selected model configuration carried through the outer folds
struct CandidateOutcome {
  std::string family;
  nlohmann::json hp;
  double validation_score = 0.0;      // search objective, lower is better
  std::vector<double> fold_estimates; // MI bits, accuracies, or fold p-values
  std::vector<double> fold_baselines; // marginal accuracies (ptt-majority only)
  TestResult test;
  bool rejected = false;              // Holm rejection for this candidate
};

struct DetectionReport {
  std::string approach;
  double alpha = 0.0;
  int top_j_requested = 0;
  int top_j_effective = 0;   // candidates that produced a p-value
  int threshold = 0;         // max(1, floor(top_j_effective / 2))
  int tau = 0;
  bool leak = false;         // tau >= threshold
  bool reduced_candidates = false;  // fewer candidates than requested survived
  std::vector<std::string> dropped; // fold-refit failures, family + reason
  std::vector<CandidateOutcome> candidates;
  HolmOutcome holm;
  double seconds = 0.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// Full pipeline: hyperparameter search, top-J selection across the portfolio,
// per-fold refits, one p-value per candidate, Holm step-down, tau decision.
DetectionReport run_ild(const Dataset& ds, const IldConfig& cfg,
                        std::uint64_t seed);

// Same pipeline for several approaches at once; the search and the fold
// refits are shared where the approaches agree on them, and every report
// equals the one run_ild would produce alone.
std::vector<DetectionReport> run_ild_multi(
    const Dataset& ds, const IldConfig& cfg,
    const std::vector<std::string>& approaches, std::uint64_t seed);

struct IldSystem {
  Dataset data;
  bool leaky = false;  // ground-truth z
  std::string name;
};

struct IldMetrics {
  double accuracy = 0.0;
  double fpr = 0.0;  // false alarms / true non-leaky
  double fnr = 0.0;  // misses / true leaky
};

// empty denominators contribute 0 (a suite with no leaky system has fnr 0)
IldMetrics ild_metrics(const std::vector<bool>& truth,
                       const std::vector<bool>& predicted);

struct IldEvaluation {
  IldMetrics metrics;  // over the systems that completed
  std::vector<DetectionReport> reports;   // empty report on error
  std::vector<std::string> errors;        // per system, "" when it completed
};

// Runs the detector on every system; a failing system is recorded and
// excluded from the metrics rather than aborting the suite.
IldEvaluation evaluate_ild(const std::vector<IldSystem>& systems,
                           const IldConfig& cfg, std::uint64_t seed);

// mean |truth - estimate| / h_y; h_y must be positive
double nmae(const std::vector<double>& truth,
            const std::vector<double>& estimate, double h_y);

}  // namespace ild

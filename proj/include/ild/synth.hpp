#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ild/dataset.hpp"

namespace ild {

enum class Technique { perturbation, proximity };
enum class GenMethod { balanced, minority, majority };

struct SynthConfig {
  Technique technique = Technique::perturbation;
  GenMethod gen_method = GenMethod::balanced;
  int num_classes = 2;
  int dims = 2;
  double noise = 0.0;      // label noise epsilon in [0,1]
  double imbalance = 0.5;  // r in (0, 1/M]; balanced requires r = 1/M
  int samples_per_class_base = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

// Gaussian class-conditional generator with one shared covariance. `means`
// holds the sampling means actually used (proximity already scales them by
// 1-eps); the perturbation label mixture is applied on top via `noise`.
struct GroundTruthModel {
  Eigen::MatrixXd means;  // M x d
  Eigen::MatrixXd sigma;  // d x d shared covariance
  Eigen::VectorXd p_y;    // target label marginal
  Technique technique = Technique::perturbation;
  double noise = 0.0;
};

// Sigma = Q S Q^T with Q Haar-orthogonal and S diagonal, entries in
// [1e-6, 1): eigenvalues below 1e-6 are resampled so Cholesky stays stable.
Eigen::MatrixXd random_covariance(int d, std::uint64_t seed);
std::pair<Eigen::MatrixXd, Eigen::VectorXd> random_covariance_with_scales(
    int d, std::uint64_t seed);

// majority: first M-1 classes get ceil(N r) each, the last the remainder;
// minority: last class gets ceil(N r), the rest split evenly (ceil).
std::vector<int> class_counts(int num_classes, int total, double imbalance,
                              GenMethod method);

// idealized label marginal corresponding to class_counts proportions
Eigen::VectorXd imbalance_marginal(int num_classes, double imbalance,
                                   GenMethod method);

// Samples sum(class_counts) rows with N = samples_per_class_base * M.
// Deterministic in cfg.seed, bit-for-bit.
std::pair<Dataset, GroundTruthModel> generate_system(const SynthConfig& cfg);

// Exact label posterior of the generator at x; perturbation mixes the Bayes
// posterior with the marginal at rate eps, proximity is plain Bayes on the
// shifted means. Rows sum to 1.
Eigen::VectorXd posterior(const GroundTruthModel& gt, const Eigen::VectorXd& x);
Eigen::MatrixXd posterior_matrix(const GroundTruthModel& gt,
                                 const Eigen::MatrixXd& x);

// Monte-Carlo plug-in of the generator's mutual information over the rows of
// ds, in bits: H(Y) minus the average posterior entropy.
double ground_truth_mi(const Dataset& ds, const GroundTruthModel& gt);

}  // namespace ild

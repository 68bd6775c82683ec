#pragma once

#include <cstdint>
#include <vector>

#include "ild/dataset.hpp"

namespace ild {

enum class CovType { full, diag, tied, spherical };

CovType cov_type_from_string(const std::string& s);
std::string to_string(CovType t);

// Gaussian mixture fit by EM. Covariances are regularized on the diagonal by
// `reg`; a component whose responsibility mass collapses triggers a restart
// with a reseeded initialization (up to 3) before failing.
class Gmm {
 public:
  void fit(const Eigen::MatrixXd& x, int components, CovType type, double reg,
           std::uint64_t seed, int max_iter = 200, double tol = 1e-6);

  Eigen::VectorXd log_density(const Eigen::MatrixXd& x) const;  // natural log
  double total_loglik(const Eigen::MatrixXd& x) const;

  int n_params() const;  // free parameters incl. K-1 mixing weights
  double aic() const;    // -2 loglik(train) + 2 n_params

  int components() const { return static_cast<int>(weights_.size()); }
  int dim() const { return static_cast<int>(means_.cols()); }
  const Eigen::MatrixXd& means() const { return means_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covs_; }
  const std::vector<double>& loglik_history() const { return history_; }

 private:
  // log N(x; mu_k, Sigma_k) for every row and component
  Eigen::MatrixXd component_log_density(const Eigen::MatrixXd& x) const;

  Eigen::MatrixXd means_;              // K x d
  Eigen::VectorXd weights_;            // K
  std::vector<Eigen::MatrixXd> covs_;  // K of d x d (tied: identical copies)
  CovType type_ = CovType::full;
  double train_loglik_ = 0.0;
  std::vector<double> history_;
};

}  // namespace ild

#include "ild/gmm.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

#include "ild/mathx.hpp"
#include "ild/rng.hpp"

namespace ild {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr int kRestarts = 3;

// farthest-point seeding: spreads initial means without a full k-means pass
Eigen::MatrixXd init_means(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd means(k, x.cols());
  int first = rng.uniform_int(0, n - 1);
  means.row(0) = x.row(first);
  Eigen::VectorXd dist2 =
      (x.rowwise() - means.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    int far = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i)
      if (dist2(i) > best) {
        best = dist2(i);
        far = i;
      }
    means.row(c) = x.row(far);
    dist2 = dist2.cwiseMin(
        (x.rowwise() - means.row(c)).rowwise().squaredNorm());
  }
  return means;
}

Eigen::MatrixXd shape_covariance(const Eigen::MatrixXd& scatter, CovType type,
                                 double reg) {
  const int d = static_cast<int>(scatter.rows());
  Eigen::MatrixXd cov;
  switch (type) {
    case CovType::full:
    case CovType::tied:
      cov = scatter;
      break;
    case CovType::diag:
      cov = scatter.diagonal().asDiagonal();
      break;
    case CovType::spherical:
      cov = Eigen::MatrixXd::Identity(d, d) * (scatter.trace() / d);
      break;
  }
  cov.diagonal().array() += reg;
  return cov;
}

}  // namespace

CovType cov_type_from_string(const std::string& s) {
  if (s == "full") return CovType::full;
  if (s == "diag") return CovType::diag;
  if (s == "tied") return CovType::tied;
  if (s == "spherical") return CovType::spherical;
  throw std::invalid_argument("unknown covariance type: " + s);
}

std::string to_string(CovType t) {
  switch (t) {
    case CovType::full: return "full";
    case CovType::diag: return "diag";
    case CovType::tied: return "tied";
    case CovType::spherical: return "spherical";
  }
  return "full";
}

void Gmm::fit(const Eigen::MatrixXd& x, int components, CovType type,
              double reg, std::uint64_t seed, int max_iter, double tol) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (components < 1) throw std::invalid_argument("gmm: components >= 1");
  if (n < components)
    throw std::invalid_argument("gmm: fewer samples than components");
  if (reg < 0.0) throw std::invalid_argument("gmm: negative regularization");
  type_ = type;

  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - global_mean;
  const Eigen::MatrixXd global_scatter =
      centered.transpose() * centered / static_cast<double>(n);

  std::string failure;
  for (int attempt = 0; attempt < kRestarts; ++attempt) {
    Rng rng(derive_seed(seed, 0x93, static_cast<std::uint64_t>(attempt)));
    means_ = init_means(x, components, rng);
    weights_ = Eigen::VectorXd::Constant(components, 1.0 / components);
    covs_.assign(components, shape_covariance(global_scatter, type, reg));
    history_.clear();

    bool degenerate = false;
    double prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
      Eigen::MatrixXd logp;
      try {
        logp = component_log_density(x);
      } catch (const std::runtime_error&) {
        degenerate = true;
        break;
      }
      logp.array().rowwise() +=
          weights_.array().log().transpose();
      Eigen::VectorXd lse(n);
      for (int i = 0; i < n; ++i) lse(i) = logsumexp(logp.row(i).transpose());
      const double loglik = lse.sum();
      history_.push_back(loglik);

      Eigen::MatrixXd resp = (logp.colwise() - lse).array().exp();
      Eigen::VectorXd mass = resp.colwise().sum();
      if (mass.minCoeff() < 1e-8) {
        degenerate = true;
        break;
      }

      means_ = (resp.transpose() * x).array().colwise() / mass.array();
      Eigen::MatrixXd tied_acc = Eigen::MatrixXd::Zero(d, d);
      for (int k = 0; k < components; ++k) {
        const Eigen::MatrixXd diff = x.rowwise() - means_.row(k);
        const Eigen::MatrixXd scatter =
            diff.transpose() * (resp.col(k).asDiagonal() * diff) / mass(k);
        if (type == CovType::tied)
          tied_acc += scatter * (mass(k) / n);
        else
          covs_[k] = shape_covariance(scatter, type, reg);
      }
      if (type == CovType::tied) {
        const Eigen::MatrixXd shared = shape_covariance(tied_acc, type, reg);
        for (auto& c : covs_) c = shared;
      }
      weights_ = mass / static_cast<double>(n);

      if (iter > 0 && loglik - prev < tol * (1.0 + std::fabs(loglik)) &&
          loglik >= prev - 1e-8) {
        prev = loglik;
        break;
      }
      prev = loglik;
    }
    if (!degenerate && std::isfinite(prev)) {
      train_loglik_ = total_loglik(x);
      return;
    }
    failure = "gmm: degenerate component on attempt " +
              std::to_string(attempt + 1);
  }
  throw std::runtime_error(failure + " (all restarts exhausted)");
}

Eigen::MatrixXd Gmm::component_log_density(const Eigen::MatrixXd& x) const {
  const int n = static_cast<int>(x.rows());
  const int k = components();
  const int d = dim();
  Eigen::MatrixXd out(n, k);
  for (int c = 0; c < k; ++c) {
    Eigen::LLT<Eigen::MatrixXd> llt(covs_[c]);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("gmm: covariance lost positive definiteness");
    const Eigen::MatrixXd diff = (x.rowwise() - means_.row(c)).transpose();
    const Eigen::MatrixXd white = llt.matrixL().solve(diff);
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    out.col(c) = -0.5 * (white.array().square().colwise().sum().transpose() +
                         d * kLog2Pi + logdet);
  }
  return out;
}

Eigen::VectorXd Gmm::log_density(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd logp = component_log_density(x);
  logp.array().rowwise() += weights_.array().log().transpose();
  Eigen::VectorXd out(x.rows());
  for (int i = 0; i < x.rows(); ++i) out(i) = logsumexp(logp.row(i).transpose());
  return out;
}

double Gmm::total_loglik(const Eigen::MatrixXd& x) const {
  return log_density(x).sum();
}

int Gmm::n_params() const {
  const int k = components();
  const int d = dim();
  int cov = 0;
  switch (type_) {
    case CovType::full: cov = k * d * (d + 1) / 2; break;
    case CovType::diag: cov = k * d; break;
    case CovType::tied: cov = d * (d + 1) / 2; break;
    case CovType::spherical: cov = k; break;
  }
  return k * d + (k - 1) + cov;
}

double Gmm::aic() const { return -2.0 * train_loglik_ + 2.0 * n_params(); }

}  // namespace ild

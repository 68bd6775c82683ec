#include "ild/synth.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ild/mathx.hpp"
#include "ild/rng.hpp"

namespace ild {
namespace {

constexpr double kMinScale = 1e-6;   // smallest allowed covariance eigenvalue
constexpr double kRidge = 1e-8;      // added to Sigma before inversion

// ceil that forgives values sitting a hair above an integer
long ceil_count(double v) { return static_cast<long>(std::ceil(v - 1e-9)); }

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd jittered = sigma;
  jittered.diagonal().array() += kRidge;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("covariance is not positive definite");
  return llt.matrixL();
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (dims < 1) throw std::invalid_argument("need at least 1 dimension");
  if (!(noise >= 0.0 && noise <= 1.0))
    throw std::invalid_argument("noise must lie in [0,1]");
  const double cap = 1.0 / num_classes;
  if (!(imbalance > 0.0 && imbalance <= cap + 1e-12))
    throw std::invalid_argument("imbalance must lie in (0, 1/M]");
  if (gen_method == GenMethod::balanced && std::fabs(imbalance - cap) > 1e-9)
    throw std::invalid_argument("balanced generation requires r = 1/M");
  if (samples_per_class_base < 1)
    throw std::invalid_argument("samples_per_class_base must be positive");
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> random_covariance_with_scales(
    int d, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("random_covariance: d must be >= 1");
  Rng rng(derive_seed(seed, 0xC0D1));

  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)  // fix signs so Q is Haar-distributed
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);

  Eigen::VectorXd s(d);
  for (int i = 0; i < d; ++i) {
    double v = rng.uniform();
    while (v < kMinScale) v = rng.uniform();
    s(i) = v;
  }
  Eigen::MatrixXd sigma = q * s.asDiagonal() * q.transpose();
  sigma = 0.5 * (sigma + sigma.transpose().eval());
  return {std::move(sigma), std::move(s)};
}

Eigen::MatrixXd random_covariance(int d, std::uint64_t seed) {
  return random_covariance_with_scales(d, seed).first;
}

std::vector<int> class_counts(int num_classes, int total, double imbalance,
                              GenMethod method) {
  if (num_classes < 2) throw std::invalid_argument("class_counts: M >= 2");
  if (total < num_classes) throw std::invalid_argument("class_counts: N < M");
  const double cap = 1.0 / num_classes;
  if (!(imbalance > 0.0 && imbalance <= cap + 1e-12))
    throw std::invalid_argument("class_counts: r outside (0, 1/M]");

  const long head = ceil_count(total * imbalance);
  std::vector<int> counts(num_classes);
  if (method == GenMethod::minority) {
    const long rest =
        ceil_count(static_cast<double>(total - head) / (num_classes - 1));
    for (int m = 0; m < num_classes - 1; ++m) counts[m] = static_cast<int>(rest);
    counts[num_classes - 1] = static_cast<int>(head);
  } else {
    // balanced is the majority formula evaluated at r = 1/M
    for (int m = 0; m < num_classes - 1; ++m) counts[m] = static_cast<int>(head);
    counts[num_classes - 1] =
        static_cast<int>(total - (num_classes - 1) * head);
  }
  for (int c : counts)
    if (c <= 0)
      throw std::invalid_argument(
          "class_counts: configuration leaves a class empty");
  return counts;
}

Eigen::VectorXd imbalance_marginal(int num_classes, double imbalance,
                                   GenMethod method) {
  Eigen::VectorXd p(num_classes);
  if (method == GenMethod::minority) {
    p.setConstant((1.0 - imbalance) / (num_classes - 1));
    p(num_classes - 1) = imbalance;
  } else {
    p.setConstant(imbalance);
    p(num_classes - 1) = 1.0 - imbalance * (num_classes - 1);
  }
  return p;
}

std::pair<Dataset, GroundTruthModel> generate_system(const SynthConfig& cfg) {
  cfg.validate();
  const int m_cls = cfg.num_classes;
  const int d = cfg.dims;
  const int total = cfg.samples_per_class_base * m_cls;
  const auto counts = class_counts(m_cls, total, cfg.imbalance, cfg.gen_method);
  int n = 0;
  for (int c : counts) n += c;

  GroundTruthModel gt;
  gt.technique = cfg.technique;
  gt.noise = cfg.noise;
  gt.p_y = imbalance_marginal(m_cls, cfg.imbalance, cfg.gen_method);
  gt.sigma = random_covariance(d, derive_seed(cfg.seed, 1));
  const double shrink =
      cfg.technique == Technique::proximity ? 1.0 - cfg.noise : 1.0;
  gt.means.resize(m_cls, d);
  for (int m = 0; m < m_cls; ++m)
    gt.means.row(m).setConstant(1.5 * (m + 1) * shrink);

  const Eigen::MatrixXd chol = cholesky_factor(gt.sigma);
  Eigen::MatrixXd x(n, d);
  std::vector<int> y(n);
  int row = 0;
  for (int m = 0; m < m_cls; ++m) {
    Rng rng(derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(m)));
    Eigen::VectorXd z(d);
    for (int i = 0; i < counts[m]; ++i, ++row) {
      for (int j = 0; j < d; ++j) z(j) = rng.normal();
      x.row(row) = gt.means.row(m) + (chol * z).transpose();
      y[row] = m;
    }
  }

  if (cfg.technique == Technique::perturbation && cfg.noise > 0.0) {
    std::vector<double> w(gt.p_y.data(), gt.p_y.data() + m_cls);
    Rng rng(derive_seed(cfg.seed, 3));
    for (int i = 0; i < n; ++i)
      if (rng.uniform() < cfg.noise) y[i] = rng.categorical(w);
  }

  Dataset ds = make_dataset(std::move(x), std::move(y), m_cls);
  for (int j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (int m = 0; m < m_cls; ++m) ds.label_names.push_back(std::to_string(m));
  return {std::move(ds), std::move(gt)};
}

Eigen::MatrixXd posterior_matrix(const GroundTruthModel& gt,
                                 const Eigen::MatrixXd& x) {
  const int m_cls = static_cast<int>(gt.means.rows());
  const int d = static_cast<int>(gt.means.cols());
  if (x.cols() != d) throw std::invalid_argument("posterior: dimension mismatch");
  if (!x.allFinite()) throw std::invalid_argument("posterior: non-finite input");

  Eigen::MatrixXd reg = gt.sigma;
  reg.diagonal().array() += kRidge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::runtime_error("posterior: covariance singular after ridge");

  // log p(m|x) up to a shared constant: ln p_Y(m) - quad_m / 2
  Eigen::MatrixXd scores(x.rows(), m_cls);
  for (int m = 0; m < m_cls; ++m) {
    Eigen::MatrixXd centered = x.rowwise() - gt.means.row(m);
    Eigen::MatrixXd solved = ldlt.solve(centered.transpose());
    scores.col(m) =
        -0.5 * (centered.array() * solved.transpose().array()).rowwise().sum() +
        std::log(gt.p_y(m));
  }
  Eigen::MatrixXd post(x.rows(), m_cls);
  for (int i = 0; i < x.rows(); ++i) {
    const double lse = logsumexp(scores.row(i).transpose());
    post.row(i) = (scores.row(i).array() - lse).exp();
  }
  if (gt.technique == Technique::perturbation && gt.noise > 0.0) {
    post = (1.0 - gt.noise) * post;
    post.rowwise() += gt.noise * gt.p_y.transpose();
  }
  return post;
}

Eigen::VectorXd posterior(const GroundTruthModel& gt, const Eigen::VectorXd& x) {
  return posterior_matrix(gt, x.transpose()).row(0).transpose();
}

double ground_truth_mi(const Dataset& ds, const GroundTruthModel& gt) {
  const Eigen::MatrixXd post = posterior_matrix(gt, ds.x);
  double cond = 0.0;
  for (int i = 0; i < post.rows(); ++i)
    cond += entropy_bits(post.row(i).transpose());
  cond /= static_cast<double>(post.rows());
  return entropy_bits(gt.p_y) - cond;
}

}  // namespace ild

#include "ild/miest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "ild/mathx.hpp"
#include "ild/models.hpp"
#include "ild/parallel.hpp"
#include "ild/rng.hpp"
#include "ild/splits.hpp"

namespace ild {

namespace {

constexpr double kLgE = 1.4426950408889634;  // lg(e), nats to bits

MiEstimate make_estimate(double value, std::string method, std::string model,
                         int num_classes) {
  MiEstimate e;
  e.value = value;
  e.method = std::move(method);
  e.model = std::move(model);
  e.out_of_range = !(value >= 0.0 && value <= lg(num_classes));
  if (!std::isfinite(value))
    throw std::runtime_error("mi estimate is not finite (" + e.method + ")");
  return e;
}

}  // namespace

EntropyBounds cond_entropy_bounds(double err, int num_classes) {
  if (num_classes < 2)
    throw std::invalid_argument("cond_entropy_bounds: need >= 2 classes");
  const double max_err = (num_classes - 1.0) / num_classes;
  if (!(err >= 0.0) || err > max_err + 1e-12)
    throw std::invalid_argument("cond_entropy_bounds: error outside [0, (M-1)/M]");
  err = std::min(err, max_err);

  const double acc = 1.0 - err;
  int m = num_classes - 1;
  for (int k = 1; k < num_classes; ++k) {
    if (acc >= 1.0 / (k + 1) - 1e-12) {
      m = k;
      break;
    }
  }

  EntropyBounds b;
  b.regime = m;
  const double slope = m * (m + 1.0) * lg((m + 1.0) / m);
  b.lower = std::max(0.0, lg(m) + slope * (err - (m - 1.0) / m));
  b.upper = binary_entropy_bits(err) + err * lg(num_classes - 1.0);
  b.upper = std::min(b.upper, lg(num_classes));
  b.upper = std::max(b.upper, b.lower);
  return b;
}

MiEstimate mi_midpoint(double err, const Eigen::VectorXd& marginal,
                       int num_classes) {
  if (marginal.size() != num_classes)
    throw std::invalid_argument("mi_midpoint: marginal size mismatch");
  const EntropyBounds b = cond_entropy_bounds(err, num_classes);
  const double hy = entropy_bits(marginal);
  const double f_l = hy - b.upper;
  const double f_u = hy - b.lower;
  return make_estimate(std::max(0.0, (f_l + f_u) / 2.0), "mid-point",
                       "bayes-approx", num_classes);
}

MiEstimate mi_logloss(const Eigen::MatrixXd& probs,
                      const std::vector<int>& labels,
                      const Eigen::VectorXd& marginal, LogLossForm form) {
  const int n = static_cast<int>(probs.rows());
  const int m = static_cast<int>(probs.cols());
  if (n == 0 || m < 2) throw std::invalid_argument("mi_logloss: empty input");
  if (static_cast<int>(labels.size()) != n || marginal.size() != m)
    throw std::invalid_argument("mi_logloss: shape mismatch");

  const Eigen::MatrixXd p = clip_rows(probs);
  const Eigen::VectorXd q = clip_vector(marginal);
  double marg_term = 0.0;
  for (int c = 0; c < m; ++c) marg_term += xlgx(q(c));

  double value = 0.0;
  if (form == LogLossForm::predictive_entropy) {
    double pred = 0.0;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < m; ++c) pred += xlgx(p(i, c));
    value = pred / n - marg_term;
  } else {
    double ce = 0.0;
    for (int i = 0; i < n; ++i) {
      const int y = labels[i];
      if (y < 0 || y >= m) throw std::invalid_argument("mi_logloss: bad label");
      ce -= lg(p(i, y));
    }
    value = -marg_term - ce / n;
  }
  return make_estimate(value,
                       form == LogLossForm::predictive_entropy ? "log-loss"
                                                               : "log-loss-ce",
                       "probs", m);
}

void GmmMiHyper::validate() const {
  if (max_components < 1 || max_components > 10)
    throw std::invalid_argument("gmm mi: components must lie in [1, 10]");
  if (!(reg >= 1e-10 && reg <= 1e-1))
    throw std::invalid_argument("gmm mi: reg must lie in [1e-10, 1e-1]");
}

MiEstimate mi_gmm(const Dataset& ds, const GmmMiHyper& hp, std::uint64_t seed) {
  hp.validate();
  std::unique_ptr<GmmBayesClassifier> best;
  double best_aic = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (int k = 1; k <= hp.max_components; ++k) {
    auto cand = std::make_unique<GmmBayesClassifier>(
        k, hp.cov, hp.reg, derive_seed(seed, 0x6a, k));
    cand->fit(ds);
    if (cand->aic() < best_aic) {
      best_aic = cand->aic();
      best = std::move(cand);
      best_k = k;
    }
  }

  const double value = gmm_density_ratio_bits(*best, ds);
  return make_estimate(value, "gmm", "gmm-k" + std::to_string(best_k),
                       ds.num_classes);
}

double gmm_density_ratio_bits(const GmmBayesClassifier& model,
                              const Dataset& eval) {
  double sum = 0.0;
  for (int c = 0; c < eval.num_classes; ++c) {
    std::vector<int> rows;
    for (int i = 0; i < eval.n(); ++i)
      if (eval.y[i] == c) rows.push_back(i);
    if (rows.empty()) continue;
    Eigen::MatrixXd xc(rows.size(), eval.dim());
    for (size_t r = 0; r < rows.size(); ++r) xc.row(r) = eval.x.row(rows[r]);
    const Eigen::VectorXd cond = model.class_log_density(xc, c);
    const Eigen::VectorXd marg = model.marginal_log_density(xc);
    sum += (cond - marg).sum();
  }
  return kLgE * sum / eval.n();
}

void MineHyper::validate() const {
  if (hidden_layers < 0 || hidden_layers > 50)
    throw std::invalid_argument("mine: hidden layers must lie in [0, 50]");
  if (units < 2 || units > 256)
    throw std::invalid_argument("mine: units must lie in [2, 256]");
  if (!(learning_rate >= 1e-5 && learning_rate <= 1e-1))
    throw std::invalid_argument("mine: learning rate must lie in [1e-5, 1e-1]");
  if (!(l2 >= 0.0 && l2 <= 0.2))
    throw std::invalid_argument("mine: l2 must lie in [0, 0.2]");
  if (epochs < 1 || patience < 1 || ensemble < 1)
    throw std::invalid_argument("mine: epochs, patience, ensemble must be >= 1");
}

namespace {

// scalar-output ReLU MLP for the Donsker-Varadhan statistics network
class MineNet {
 public:
  MineNet(int input_dim, const MineHyper& hp, std::uint64_t seed) : hp_(hp) {
    Rng rng(derive_seed(seed, 0x317));
    int fan_in = input_dim;
    for (int l = 0; l < hp.hidden_layers; ++l) {
      push_layer(fan_in, hp.units, std::sqrt(2.0 / fan_in), rng);
      fan_in = hp.units;
    }
    push_layer(fan_in, 1, std::sqrt(1.0 / fan_in), rng);
  }

  Eigen::VectorXd forward(const Eigen::MatrixXd& x,
                          std::vector<Eigen::MatrixXd>* acts) const {
    Eigen::MatrixXd h = x;
    if (acts) acts->push_back(h);
    for (size_t l = 0; l + 1 < w_.size(); ++l) {
      h = ((h * w_[l]).rowwise() + b_[l].transpose()).cwiseMax(0.0);
      if (acts) acts->push_back(h);
    }
    return (h * w_.back()).rowwise().sum() +
           Eigen::VectorXd::Constant(h.rows(), b_.back()(0));
  }

  // ascends sum_k weight_k * T(x_k) plus the l2 penalty, in place
  void ascend(const Eigen::MatrixXd& x, const Eigen::VectorXd& weight,
              double lr) {
    std::vector<Eigen::MatrixXd> acts;
    forward(x, &acts);
    const size_t out = w_.size() - 1;
    // delta starts as d(sum w_k T_k)/d(output) = weight
    Eigen::MatrixXd delta = weight;
    for (size_t l = out + 1; l-- > 0;) {
      const Eigen::MatrixXd gw = acts[l].transpose() * delta;
      const Eigen::VectorXd gb = delta.colwise().sum().transpose();
      if (l > 0) {
        Eigen::MatrixXd back = delta * w_[l].transpose();
        delta = (acts[l].array() > 0.0).cast<double>() * back.array();
      }
      w_[l] += lr * (gw - 2.0 * hp_.l2 * w_[l]);
      b_[l] += lr * (gb - 2.0 * hp_.l2 * b_[l]);
    }
  }

 private:
  void push_layer(int in, int out, double scale, Rng& rng) {
    Eigen::MatrixXd w(in, out);
    for (int i = 0; i < in; ++i)
      for (int j = 0; j < out; ++j) w(i, j) = scale * rng.normal();
    w_.push_back(std::move(w));
    b_.push_back(Eigen::VectorXd::Zero(out));
  }

  MineHyper hp_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

int mine_batch_count(int n) {
  for (int b = n / 32; b >= 2; --b)
    if (n % b == 0) return b;
  return 1;
}

Eigen::MatrixXd with_onehot(const Eigen::MatrixXd& x, const std::vector<int>& y,
                            int num_classes) {
  Eigen::MatrixXd z(x.rows(), x.cols() + num_classes);
  z.leftCols(x.cols()) = x;
  z.rightCols(num_classes).setZero();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    z(i, x.cols() + y[i]) = 1.0;
  return z;
}

// training loop; `perm_rng` is left positioned for the final evaluation draw
MineNet mine_fit(const Dataset& ds, const MineHyper& hp, std::uint64_t seed,
                 Rng& perm_rng) {
  const int n = ds.n();
  const int m = ds.num_classes;
  const int batches = mine_batch_count(n);
  const int bs = n / batches;

  MineNet net(ds.dim() + m, hp, seed);
  const Eigen::MatrixXd joint = with_onehot(ds.x, ds.y, m);

  double ema = 0.0;
  bool ema_ready = false;
  double best_v = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    const std::vector<int> pi = perm_rng.permutation(n);
    double epoch_v = 0.0;
    for (int b = 0; b < batches; ++b) {
      const int lo = b * bs;
      Eigen::MatrixXd batch(2 * bs, ds.dim() + m);
      batch.topRows(bs) = joint.middleRows(lo, bs);
      for (int i = 0; i < bs; ++i) {
        batch.row(bs + i) = joint.row(lo + i);
        batch.block(bs + i, ds.dim(), 1, m).setZero();
        batch(bs + i, ds.dim() + ds.y[pi[lo + i]]) = 1.0;
      }
      const Eigen::VectorXd t = net.forward(batch, nullptr);
      const double mean_joint = t.head(bs).mean();
      const Eigen::VectorXd et = t.tail(bs).array().exp();
      const double mean_exp = et.mean();
      const double v = mean_joint - std::log(mean_exp);
      if (!std::isfinite(v))
        throw std::runtime_error("mine: lower bound diverged");
      ema = ema_ready ? 0.9 * ema + 0.1 * mean_exp : mean_exp;
      ema_ready = true;

      Eigen::VectorXd weight(2 * bs);
      weight.head(bs).setConstant(1.0 / bs);
      weight.tail(bs) = -et / (bs * ema);
      net.ascend(batch, weight, hp.learning_rate);
      epoch_v += v / batches;
    }
    if (epoch_v > best_v + 1e-6) {
      best_v = epoch_v;
      best_epoch = epoch;
    } else if (epoch - best_epoch >= hp.patience) {
      break;
    }
  }
  return net;
}

// bound on `eval` with a fresh label permutation for the marginal side
double mine_dv_bits(const MineNet& net, const Dataset& eval, Rng& perm_rng) {
  const int n = eval.n();
  const int m = eval.num_classes;
  const std::vector<int> pi = perm_rng.permutation(n);
  std::vector<int> ym(n);
  for (int i = 0; i < n; ++i) ym[i] = eval.y[pi[i]];
  const Eigen::VectorXd tj =
      net.forward(with_onehot(eval.x, eval.y, m), nullptr);
  const Eigen::VectorXd tm = net.forward(with_onehot(eval.x, ym, m), nullptr);
  const double nats = tj.mean() - std::log(tm.array().exp().mean());
  if (!std::isfinite(nats)) throw std::runtime_error("mine: estimate diverged");
  return kLgE * nats;
}

double mine_single_run(const Dataset& ds, const MineHyper& hp,
                       std::uint64_t seed) {
  Rng perm_rng(derive_seed(seed, 0xbead));
  const MineNet net = mine_fit(ds, hp, seed, perm_rng);
  return mine_dv_bits(net, ds, perm_rng);
}

}  // namespace

double mine_holdout_bits(const Dataset& train, const Dataset& eval,
                         const MineHyper& hp, std::uint64_t seed) {
  hp.validate();
  if (train.num_classes != eval.num_classes || train.dim() != eval.dim())
    throw std::invalid_argument("mine: train/eval shape mismatch");
  Rng perm_rng(derive_seed(seed, 0xbead));
  const MineNet net = mine_fit(train, hp, seed, perm_rng);
  return mine_dv_bits(net, eval, perm_rng);
}

MiEstimate mi_mine(const Dataset& ds, const MineHyper& hp, std::uint64_t seed,
                   int threads) {
  hp.validate();
  std::vector<double> runs(hp.ensemble, 0.0);
  parallel_for(hp.ensemble, threads, [&](int k) {
    runs[k] = mine_single_run(ds, hp, derive_seed(seed, 0x371e, k));
  });
  double mean = 0.0;
  for (double v : runs) mean += v / hp.ensemble;
  return make_estimate(mean, "mine",
                       "mine-ens" + std::to_string(hp.ensemble),
                       ds.num_classes);
}

double pc_softmax_score_bits(const SoftmaxNet& net, const Eigen::MatrixXd& x,
                             const std::vector<int>& y) {
  if (net.hyper().head != Head::pc_softmax)
    throw std::invalid_argument("pc score needs a pc-softmax head");
  // -lg S_pc evaluated in the log domain: trained scores can overflow exp
  const Eigen::MatrixXd s = net.scores(x);
  const Eigen::VectorXd& prior = net.class_prior();
  const bool scaled = net.hyper().pc_norm == PcNorm::scaled_exp;
  Eigen::VectorXd log_prior;
  if (!scaled)
    log_prior = prior.array().max(1e-300).log().matrix();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd den = s.row(i).transpose();
    if (scaled)
      den = den.cwiseProduct(prior);
    else
      den += log_prior;
    acc -= kLgE * (s(i, y[i]) - logsumexp(den));
  }
  return acc / x.rows();
}

MiEstimate mi_pcsoftmax_eval(const Dataset& train, const Dataset& eval,
                             const NetHyper& hp, std::uint64_t seed) {
  NetHyper pc_hp = hp;
  pc_hp.head = Head::pc_softmax;
  const auto net = fit_softmax_net(train, pc_hp, seed);
  const double value = pc_softmax_score_bits(*net, eval.x, eval.y);
  return make_estimate(value, "pc-softmax",
                       pc_hp.pc_norm == PcNorm::scaled_exp ? "pc-scaled-exp"
                                                           : "pc-weighted-sum",
                       train.num_classes);
}

MiEstimate mi_pcsoftmax(const Dataset& ds, const NetHyper& hp,
                        std::uint64_t seed) {
  const auto split =
      mccv_splits(ds.y, ds.num_classes, 1, 0.3, derive_seed(seed, 0xca1))[0];
  return mi_pcsoftmax_eval(ds.subset(split.train), ds.subset(split.test), hp,
                           seed);
}

}  // namespace ild

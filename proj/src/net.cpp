#include "ild/net.hpp"

#include <cmath>
#include <stdexcept>

#include "ild/mathx.hpp"
#include "ild/rng.hpp"

namespace ild {
namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

}  // namespace

void NetHyper::validate() const {
  if (hidden_layers < 0 || hidden_layers > 50)
    throw std::invalid_argument("net: hidden_layers outside [0,50]");
  if (units < 2 || units > 256)
    throw std::invalid_argument("net: units outside [2,256]");
  if (!(learning_rate >= 1e-5 && learning_rate <= 1e-1))
    throw std::invalid_argument("net: learning_rate outside [1e-5,1e-1]");
  if (epochs < 1) throw std::invalid_argument("net: epochs must be positive");
  if (batch_size < 1) throw std::invalid_argument("net: batch_size must be positive");
  if (!(l2 >= 0.0 && l2 <= 0.2))
    throw std::invalid_argument("net: l2 outside [0,0.2]");
}

SoftmaxNet::SoftmaxNet(NetHyper hp, std::uint64_t seed)
    : hp_(hp), seed_(seed) {
  hp_.validate();
}

void SoftmaxNet::init_params(int input_dim, int num_classes) {
  input_dim_ = input_dim;
  num_classes_ = num_classes;
  w_.clear();
  b_.clear();
  Rng rng(derive_seed(seed_, 0xE7));
  int fan_in = input_dim;
  for (int l = 0; l < hp_.hidden_layers; ++l) {
    const int fan_out = hp_.units;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-limit, limit);
    w_.push_back(std::move(w));
    b_.push_back(Eigen::VectorXd::Zero(fan_out));
    fan_in = fan_out;
  }
  const double limit = std::sqrt(6.0 / (fan_in + num_classes));
  Eigen::MatrixXd w(fan_in, num_classes);
  for (int i = 0; i < fan_in; ++i)
    for (int j = 0; j < num_classes; ++j) w(i, j) = rng.uniform(-limit, limit);
  w_.push_back(std::move(w));
  b_.push_back(Eigen::VectorXd::Zero(num_classes));
}

Eigen::MatrixXd SoftmaxNet::forward(
    const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>* activations) const {
  Eigen::MatrixXd a = x;
  if (activations) activations->push_back(a);
  for (size_t l = 0; l + 1 < w_.size(); ++l) {
    a = relu(((a * w_[l]).rowwise() + b_[l].transpose()).eval());
    if (activations) activations->push_back(a);
  }
  return (a * w_.back()).rowwise() + b_.back().transpose();
}

Eigen::MatrixXd SoftmaxNet::scores(const Eigen::MatrixXd& x) const {
  if (w_.empty()) throw std::logic_error("net: not fitted");
  return forward(x, nullptr);
}

Eigen::MatrixXd SoftmaxNet::head_output(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd s = scores(x);
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (int i = 0; i < s.rows(); ++i) {
    double denom;
    if (hp_.head == Head::softmax) {
      denom = logsumexp(s.row(i).transpose());
    } else if (hp_.pc_norm == PcNorm::scaled_exp) {
      denom = logsumexp((prior_.array() * s.row(i).transpose().array()).matrix());
    } else {
      denom = logsumexp((s.row(i).transpose().array() + prior_.array().log()).matrix());
    }
    out.row(i) = (s.row(i).array() - denom).exp();
  }
  return out;
}

Eigen::MatrixXd SoftmaxNet::predict_proba(const Eigen::MatrixXd& x) const {
  // renormalizing the head output cancels its per-row denominator exactly,
  // leaving the plain softmax of the scores for every head; computing that
  // directly stays finite even when a prior-compensated loss has pushed the
  // scores far enough that exp() of a raw head value would overflow
  const Eigen::MatrixXd s = scores(x);
  Eigen::MatrixXd p(s.rows(), s.cols());
  for (int i = 0; i < s.rows(); ++i) {
    const double denom = logsumexp(s.row(i).transpose());
    p.row(i) = (s.row(i).array() - denom).exp();
  }
  return clip_rows(p);
}

std::vector<int> SoftmaxNet::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd p = predict_proba(x);
  std::vector<int> out(p.rows());
  for (int i = 0; i < p.rows(); ++i) {
    int best = 0;
    for (int m = 1; m < p.cols(); ++m)
      if (p(i, m) > p(i, best)) best = m;
    out[i] = best;
  }
  return out;
}

SoftmaxNet SoftmaxNet::with_head(Head head, PcNorm norm) const {
  SoftmaxNet copy = *this;
  copy.hp_.head = head;
  copy.hp_.pc_norm = norm;
  return copy;
}

Eigen::VectorXd SoftmaxNet::get_params() const {
  int total = 0;
  for (size_t l = 0; l < w_.size(); ++l)
    total += static_cast<int>(w_[l].size() + b_[l].size());
  Eigen::VectorXd flat(total);
  int at = 0;
  for (size_t l = 0; l < w_.size(); ++l) {
    flat.segment(at, w_[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(w_[l].data(), w_[l].size());
    at += static_cast<int>(w_[l].size());
    flat.segment(at, b_[l].size()) = b_[l];
    at += static_cast<int>(b_[l].size());
  }
  return flat;
}

void SoftmaxNet::set_params(const Eigen::VectorXd& flat) {
  int at = 0;
  for (size_t l = 0; l < w_.size(); ++l) {
    Eigen::Map<Eigen::VectorXd>(w_[l].data(), w_[l].size()) =
        flat.segment(at, w_[l].size());
    at += static_cast<int>(w_[l].size());
    b_[l] = flat.segment(at, b_[l].size());
    at += static_cast<int>(b_[l].size());
  }
}

double SoftmaxNet::loss(const Eigen::MatrixXd& x,
                        const std::vector<int>& y) const {
  const Eigen::MatrixXd s = scores(x);
  const int n = static_cast<int>(x.rows());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double denom;
    if (hp_.head == Head::softmax) {
      denom = logsumexp(s.row(i).transpose());
    } else if (hp_.pc_norm == PcNorm::scaled_exp) {
      denom = logsumexp((prior_.array() * s.row(i).transpose().array()).matrix());
    } else {
      denom = logsumexp((s.row(i).transpose().array() + prior_.array().log()).matrix());
    }
    acc += denom - s(i, y[i]);
  }
  acc /= n;
  for (const auto& w : w_) acc += 0.5 * hp_.l2 * w.squaredNorm();
  return acc;
}

double SoftmaxNet::loss_and_grad(const Eigen::MatrixXd& x,
                                 const std::vector<int>& y,
                                 Eigen::VectorXd& grad) const {
  const int n = static_cast<int>(x.rows());
  std::vector<Eigen::MatrixXd> acts;
  const Eigen::MatrixXd s = forward(x, &acts);

  // dL/dscores and the loss in one pass
  Eigen::MatrixXd gs(n, num_classes_);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd row = s.row(i).transpose();
    double denom;
    Eigen::VectorXd dd(num_classes_);  // d denom / d score
    if (hp_.head == Head::softmax) {
      denom = logsumexp(row);
      dd = (row.array() - denom).exp();
    } else if (hp_.pc_norm == PcNorm::scaled_exp) {
      denom = logsumexp((prior_.array() * row.array()).matrix());
      dd = prior_.array() * (prior_.array() * row.array() - denom).exp();
    } else {
      denom = logsumexp((row.array() + prior_.array().log()).matrix());
      dd = (row.array() + prior_.array().log() - denom).exp();
    }
    total += denom - row(y[i]);
    gs.row(i) = dd.transpose() / n;
    gs(i, y[i]) -= 1.0 / n;
  }
  total /= n;

  std::vector<Eigen::MatrixXd> gw(w_.size());
  std::vector<Eigen::VectorXd> gb(w_.size());
  Eigen::MatrixXd delta = gs;
  for (int l = static_cast<int>(w_.size()) - 1; l >= 0; --l) {
    gw[l] = acts[l].transpose() * delta + hp_.l2 * w_[l];
    gb[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = delta * w_[l].transpose();
      delta = delta.cwiseProduct(
          (acts[l].array() > 0.0).cast<double>().matrix());
    }
    total += 0.5 * hp_.l2 * w_[l].squaredNorm();
  }

  int nparams = 0;
  for (size_t l = 0; l < w_.size(); ++l)
    nparams += static_cast<int>(w_[l].size() + b_[l].size());
  grad.resize(nparams);
  int at = 0;
  for (size_t l = 0; l < w_.size(); ++l) {
    grad.segment(at, gw[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(gw[l].data(), gw[l].size());
    at += static_cast<int>(gw[l].size());
    grad.segment(at, gb[l].size()) = gb[l];
    at += static_cast<int>(gb[l].size());
  }
  return total;
}

void SoftmaxNet::fit(const Dataset& train) {
  train.validate();
  prior_ = class_marginal(train.y, train.num_classes);
  init_params(train.dim(), train.num_classes);

  const int n = train.n();
  Eigen::VectorXd theta = get_params();
  Eigen::VectorXd theta_prev = theta;
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  long step = 0;
  bool diverged = false;

  Rng rng(derive_seed(seed_, 0x0B));
  for (int epoch = 0; epoch < hp_.epochs && !diverged; ++epoch) {
    const std::vector<int> perm = rng.permutation(n);
    for (int start = 0; start < n; start += hp_.batch_size) {
      const int len = std::min(hp_.batch_size, n - start);
      Eigen::MatrixXd xb(len, train.dim());
      std::vector<int> yb(len);
      for (int i = 0; i < len; ++i) {
        xb.row(i) = train.x.row(perm[start + i]);
        yb[i] = train.y[perm[start + i]];
      }
      const double batch_loss = loss_and_grad(xb, yb, g);
      if (!std::isfinite(batch_loss) || !g.allFinite()) {
        // inputs are validated, so this is optimizer divergence (the
        // prior-compensated scaled-exp objective is unbounded below and can
        // legally run the scores past the floating-point range); training
        // stops at the last parameters whose loss was still finite
        set_params(theta_prev);
        diverged = true;
        break;
      }
      theta_prev = theta;
      ++step;
      switch (hp_.optimizer) {
        case Optimizer::sgd:
          theta -= hp_.learning_rate * g;
          break;
        case Optimizer::rmsprop:
          v = 0.9 * v + 0.1 * g.cwiseProduct(g);
          theta -= hp_.learning_rate *
                   g.cwiseQuotient((v.cwiseSqrt().array() + 1e-8).matrix());
          break;
        case Optimizer::adam: {
          m = 0.9 * m + 0.1 * g;
          v = 0.999 * v + 0.001 * g.cwiseProduct(g);
          const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(step));
          const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(step));
          theta -= hp_.learning_rate *
                   (m / bc1).cwiseQuotient(
                       ((v / bc2).cwiseSqrt().array() + 1e-8).matrix());
          break;
        }
      }
      set_params(theta);
    }
  }
}

std::unique_ptr<SoftmaxNet> fit_softmax_net(const Dataset& train,
                                            const NetHyper& hp,
                                            std::uint64_t seed) {
  auto net = std::make_unique<SoftmaxNet>(hp, seed);
  net->fit(train);
  return net;
}

}  // namespace ild

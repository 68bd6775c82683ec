#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ild/dataset.hpp"

namespace ild {

enum class Head { softmax, pc_softmax };
enum class PcNorm { scaled_exp, weighted_sum };  // denominator variant
enum class Optimizer { sgd, rmsprop, adam };

struct NetHyper {
  int hidden_layers = 1;  // 0 means plain multinomial regression
  int units = 16;
  double learning_rate = 1e-2;
  int epochs = 120;
  int batch_size = 128;
  double l2 = 1e-6;
  Head head = Head::softmax;
  PcNorm pc_norm = PcNorm::scaled_exp;
  Optimizer optimizer = Optimizer::adam;

  void validate() const;
};

// ReLU MLP ending in M linear score nodes. The head maps scores to the
// training loss and to predicted probabilities; the pc-softmax head weighs
// the denominator by the class marginal of the training labels.
class SoftmaxNet {
 public:
  SoftmaxNet(NetHyper hp, std::uint64_t seed);

  void fit(const Dataset& train);

  Eigen::MatrixXd scores(const Eigen::MatrixXd& x) const;
  // head output renormalized onto the simplex (pc scores need not sum to 1)
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
  // raw head output: softmax rows, or S_pc values without renormalization
  Eigen::MatrixXd head_output(const Eigen::MatrixXd& x) const;
  std::vector<int> predict(const Eigen::MatrixXd& x) const;

  // same weights under a different head; used to compare head behaviors
  SoftmaxNet with_head(Head head, PcNorm norm = PcNorm::scaled_exp) const;

  // loss with l2 term and its gradient in the flat parameter layout; exposed
  // so the backward pass can be checked against finite differences
  double loss(const Eigen::MatrixXd& x, const std::vector<int>& y) const;
  double loss_and_grad(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       Eigen::VectorXd& grad) const;
  Eigen::VectorXd get_params() const;
  void set_params(const Eigen::VectorXd& flat);

  int num_classes() const { return num_classes_; }
  const Eigen::VectorXd& class_prior() const { return prior_; }
  const NetHyper& hyper() const { return hp_; }

 private:
  void init_params(int input_dim, int num_classes);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x,
                          std::vector<Eigen::MatrixXd>* activations) const;

  NetHyper hp_;
  std::uint64_t seed_ = 0;
  int input_dim_ = 0;
  int num_classes_ = 0;
  Eigen::VectorXd prior_;  // training label marginal, used by the pc head
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

std::unique_ptr<SoftmaxNet> fit_softmax_net(const Dataset& train,
                                            const NetHyper& hp,
                                            std::uint64_t seed);

}  // namespace ild

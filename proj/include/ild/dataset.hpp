#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ild {

// Feature matrix with integer labels in [0, M). Labels are always contiguous
// after ingestion; original label spellings live in label_names.
struct Dataset {
    Eigen::MatrixXd x;  // N x d
    std::vector<int> y;
    int num_classes = 0;
    std::vector<std::string> feature_names;  // size d or empty
    std::vector<std::string> label_names;    // size num_classes or empty

    int n() const { return static_cast<int>(x.rows()); }
    int dim() const { return static_cast<int>(x.cols()); }

    // throws std::invalid_argument on any violated invariant
    void validate() const;

    Dataset subset(const std::vector<int>& rows) const;
};

Dataset make_dataset(Eigen::MatrixXd x, std::vector<int> y, int num_classes);

Eigen::VectorXd class_marginal(const std::vector<int>& y, int num_classes);
Eigen::VectorXd class_marginal(const Dataset& ds);

// rows = ground truth, cols = prediction
struct ConfusionMatrix {
    Eigen::MatrixXi counts;

    int classes() const { return static_cast<int>(counts.rows()); }
    int total() const { return counts.sum(); }

    // binary accessors; the positive class is label 1
    int tn() const { return counts(0, 0); }
    int fp() const { return counts(0, 1); }
    int fn() const { return counts(1, 0); }
    int tp() const { return counts(1, 1); }
};

ConfusionMatrix confusion_matrix(const std::vector<int>& y, const std::vector<int>& y_hat,
                                 int num_classes);
ConfusionMatrix make_binary_cm(int tn, int fp, int fn, int tp);

// collapse an MxM matrix to 2x2 with positive_class vs rest
ConfusionMatrix binarize_cm(const ConfusionMatrix& cm, int positive_class);

struct Metrics {
    double accuracy = 0.0;
    double error = 0.0;
    double fpr = 0.0;
    double fnr = 0.0;
    double mcc = 0.0;
    double ber = 0.0;
    // set when a rate or MCC hit a zero denominator and the 0-convention applied
    bool degenerate = false;
};

Metrics classification_metrics(const ConfusionMatrix& cm);

}  // namespace ild

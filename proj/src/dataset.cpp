#include "ild/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace ild {

void Dataset::validate() const {
    const int N = n();
    if (num_classes < 2) throw std::invalid_argument("Dataset: num_classes must be >= 2");
    if (static_cast<int>(y.size()) != N) throw std::invalid_argument("Dataset: label count != row count");
    if (N < num_classes) throw std::invalid_argument("Dataset: fewer rows than classes");
    for (int v : y)
        if (v < 0 || v >= num_classes) throw std::invalid_argument("Dataset: label out of range");
    if (!x.allFinite()) throw std::invalid_argument("Dataset: non-finite feature value");
    if (!feature_names.empty() && static_cast<int>(feature_names.size()) != dim())
        throw std::invalid_argument("Dataset: feature_names size mismatch");
    if (!label_names.empty() && static_cast<int>(label_names.size()) != num_classes)
        throw std::invalid_argument("Dataset: label_names size mismatch");
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
    Dataset out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    out.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
        out.y[i] = y[static_cast<std::size_t>(rows[i])];
    }
    out.num_classes = num_classes;
    out.feature_names = feature_names;
    out.label_names = label_names;
    return out;
}

Dataset make_dataset(Eigen::MatrixXd x, std::vector<int> y, int num_classes) {
    Dataset ds;
    ds.x = std::move(x);
    ds.y = std::move(y);
    ds.num_classes = num_classes;
    ds.validate();
    return ds;
}

Eigen::VectorXd class_marginal(const std::vector<int>& y, int num_classes) {
    if (y.empty()) throw std::invalid_argument("class_marginal: empty labels");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(num_classes);
    for (int v : y) {
        if (v < 0 || v >= num_classes) throw std::invalid_argument("class_marginal: label out of range");
        p[v] += 1.0;
    }
    return p / static_cast<double>(y.size());
}

Eigen::VectorXd class_marginal(const Dataset& ds) { return class_marginal(ds.y, ds.num_classes); }

ConfusionMatrix confusion_matrix(const std::vector<int>& y, const std::vector<int>& y_hat,
                                 int num_classes) {
    if (y.size() != y_hat.size()) throw std::invalid_argument("confusion_matrix: length mismatch");
    if (y.empty()) throw std::invalid_argument("confusion_matrix: empty inputs");
    ConfusionMatrix cm;
    cm.counts = Eigen::MatrixXi::Zero(num_classes, num_classes);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] >= num_classes || y_hat[i] < 0 || y_hat[i] >= num_classes)
            throw std::invalid_argument("confusion_matrix: label out of range");
        cm.counts(y[i], y_hat[i]) += 1;
    }
    return cm;
}

ConfusionMatrix make_binary_cm(int tn, int fp, int fn, int tp) {
    if (tn < 0 || fp < 0 || fn < 0 || tp < 0)
        throw std::invalid_argument("make_binary_cm: negative count");
    ConfusionMatrix cm;
    cm.counts.resize(2, 2);
    cm.counts << tn, fp, fn, tp;
    return cm;
}

ConfusionMatrix binarize_cm(const ConfusionMatrix& cm, int positive_class) {
    const int M = cm.classes();
    if (positive_class < 0 || positive_class >= M)
        throw std::invalid_argument("binarize_cm: positive class out of range");
    int tn = 0, fp = 0, fn = 0, tp = 0;
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) {
            const bool ti = (i == positive_class), pj = (j == positive_class);
            int c = cm.counts(i, j);
            if (ti && pj) tp += c;
            else if (ti && !pj) fn += c;
            else if (!ti && pj) fp += c;
            else tn += c;
        }
    }
    return make_binary_cm(tn, fp, fn, tp);
}

namespace {

// 0/0 -> 0 with a degenerate marker, per the shared zero-denominator convention
double safe_rate(double num, double den, bool& degenerate) {
    if (den <= 0.0) {
        degenerate = true;
        return 0.0;
    }
    return num / den;
}

}  // namespace

Metrics classification_metrics(const ConfusionMatrix& cm) {
    const int M = cm.classes();
    const double N = cm.total();
    if (N <= 0) throw std::invalid_argument("classification_metrics: empty confusion matrix");

    Metrics m;
    double diag = 0.0;
    for (int i = 0; i < M; ++i) diag += cm.counts(i, i);
    m.accuracy = diag / N;
    m.error = 1.0 - m.accuracy;

    // FPR/FNR/MCC are binary notions; for M > 2 they are computed on the
    // label-1-vs-rest collapse, matching the detector's FET binarization.
    const ConfusionMatrix b = M == 2 ? cm : binarize_cm(cm, 1);
    const double tn = b.tn(), fp = b.fp(), fn = b.fn(), tp = b.tp();
    m.fpr = safe_rate(fp, fp + tn, m.degenerate);
    m.fnr = safe_rate(fn, fn + tp, m.degenerate);

    const double denom2 = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom2 <= 0.0) {
        m.mcc = 0.0;
        m.degenerate = true;
    } else {
        m.mcc = (tp * tn - fp * fn) / std::sqrt(denom2);
    }

    if (M == 2) {
        m.ber = 0.5 * (m.fpr + m.fnr);
    } else {
        // balanced error: mean per-class miss rate over classes with support
        double acc = 0.0;
        int covered = 0;
        for (int i = 0; i < M; ++i) {
            double row = cm.counts.row(i).sum();
            if (row > 0) {
                acc += 1.0 - cm.counts(i, i) / row;
                ++covered;
            } else {
                m.degenerate = true;
            }
        }
        m.ber = covered > 0 ? acc / covered : 0.0;
    }
    return m;
}

}  // namespace ild

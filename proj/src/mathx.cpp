#include "ild/mathx.hpp"

#include <cmath>
#include <stdexcept>

namespace ild {

double entropy_bits(const Eigen::VectorXd& p) {
    if (p.size() == 0) throw std::invalid_argument("entropy_bits: empty vector");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0) throw std::invalid_argument("entropy_bits: negative entry");
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("entropy_bits: entries do not sum to 1");
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) h -= xlgx(p[i]);
    return h < 0.0 ? 0.0 : h;  // guard against -0 and rounding
}

Eigen::MatrixXd clip_rows(const Eigen::MatrixXd& probs, double eps) {
    Eigen::MatrixXd out = probs.cwiseMax(eps).cwiseMin(1.0 - eps);
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
    return out;
}

Eigen::VectorXd clip_vector(const Eigen::VectorXd& p, double eps) {
    Eigen::VectorXd out = p.cwiseMax(eps).cwiseMin(1.0 - eps);
    return out / out.sum();
}

double logsumexp(const Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

namespace {

// Lentz continued fraction for the incomplete beta function
double betacf(double a, double b, double x) {
    const int max_iter = 400;
    const double eps = 3e-16, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double inc_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("inc_beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                 a * std::log(x) + b * std::log1p(-x);
    double bt = std::exp(lbt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_cdf: df must be positive");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    double x = df / (df + t * t);
    double half_tail = 0.5 * inc_beta(0.5 * df, 0.5, x);
    return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace ild

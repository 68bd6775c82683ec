#pragma once

#include <Eigen/Dense>

namespace ild {

// All entropies and MI values in this library are in bits (base-2 logs).

inline double lg(double x) { return std::log2(x); }

// x lg x with the 0 lg 0 = 0 convention
inline double xlgx(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

// binary entropy H2(e) in bits
inline double binary_entropy_bits(double e) { return -xlgx(e) - xlgx(1.0 - e); }

// H(p) in bits; validates that p is a probability vector
double entropy_bits(const Eigen::VectorXd& p);

// clip every entry to [eps, 1-eps] and renormalize each row to sum 1
Eigen::MatrixXd clip_rows(const Eigen::MatrixXd& probs, double eps = 1e-9);
Eigen::VectorXd clip_vector(const Eigen::VectorXd& p, double eps = 1e-9);

double logsumexp(const Eigen::VectorXd& v);

// regularized incomplete beta I_x(a, b)
double inc_beta(double a, double b, double x);

// Student-t CDF with df degrees of freedom, via the incomplete beta function
double student_t_cdf(double t, double df);

double normal_cdf(double z);

}  // namespace ild

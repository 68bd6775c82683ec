#include <cmath>

#include "doctest.h"
#include "ild/mathx.hpp"

using namespace ild;

TEST_SUITE("mathx") {

TEST_CASE("xlgx is 0 at 0 and matches p*lg(p) elsewhere") {
  CHECK(xlgx(0.0) == 0.0);
  CHECK(xlgx(1.0) == 0.0);
  CHECK(xlgx(0.5) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(xlgx(0.25) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("entropy in bits") {
  Eigen::VectorXd uniform4 = Eigen::VectorXd::Constant(4, 0.25);
  CHECK(entropy_bits(uniform4) == doctest::Approx(2.0).epsilon(1e-12));

  Eigen::VectorXd skew(2);
  skew << 0.95, 0.05;
  // -0.95*lg(0.95) - 0.05*lg(0.05)
  CHECK(entropy_bits(skew) == doctest::Approx(0.2863969571).epsilon(1e-9));

  Eigen::VectorXd point(3);
  point << 0.0, 1.0, 0.0;
  CHECK(entropy_bits(point) == 0.0);

  CHECK(binary_entropy_bits(0.5) == doctest::Approx(1.0));
  CHECK(binary_entropy_bits(0.0) == 0.0);
  CHECK(binary_entropy_bits(0.05) ==
        doctest::Approx(0.2863969571).epsilon(1e-9));
}

TEST_CASE("entropy rejects malformed distributions") {
  Eigen::VectorXd neg(2);
  neg << 1.1, -0.1;
  CHECK_THROWS_AS(entropy_bits(neg), std::invalid_argument);
  Eigen::VectorXd off(2);
  off << 0.6, 0.6;
  CHECK_THROWS_AS(entropy_bits(off), std::invalid_argument);
}

TEST_CASE("logsumexp is shift-stable") {
  Eigen::VectorXd two = Eigen::VectorXd::Zero(2);
  CHECK(logsumexp(two) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  Eigen::VectorXd big = Eigen::VectorXd::Constant(2, 1000.0);
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));
  Eigen::VectorXd mix(3);
  mix << -1e8, 0.0, 1.0;
  CHECK(logsumexp(mix) ==
        doctest::Approx(std::log(std::exp(0.0) + std::exp(1.0))).epsilon(1e-12));
}

TEST_CASE("clip_rows keeps rows on the simplex") {
  Eigen::MatrixXd p(2, 3);
  p << 1.0, 0.0, 0.0,
       0.2, 0.3, 0.5;
  Eigen::MatrixXd q = clip_rows(p, 1e-9);
  for (int i = 0; i < q.rows(); ++i) {
    CHECK(q.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q.row(i).minCoeff() > 0.0);
  }
  CHECK(q(1, 2) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("student t cdf closed forms") {
  // df=1 is Cauchy, df=2 has an elementary form
  CHECK(student_t_cdf(0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(student_t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(student_t_cdf(2.0, 1.0) ==
        doctest::Approx(0.5 + std::atan(2.0) / M_PI).epsilon(1e-10));
  CHECK(student_t_cdf(1.0, 2.0) ==
        doctest::Approx(0.5 + 1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-10));
  CHECK(student_t_cdf(-1.0, 2.0) ==
        doctest::Approx(0.5 - 1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-10));
  // symmetry and tails
  for (double df : {1.0, 3.0, 9.0, 30.0}) {
    CHECK(student_t_cdf(1.7, df) + student_t_cdf(-1.7, df) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(student_t_cdf(std::numeric_limits<double>::infinity(), 5.0) == 1.0);
  CHECK(student_t_cdf(-std::numeric_limits<double>::infinity(), 5.0) == 0.0);
}

TEST_CASE("student t approaches normal for large df") {
  CHECK(student_t_cdf(1.96, 1e7) ==
        doctest::Approx(normal_cdf(1.96)).epsilon(1e-6));
  CHECK(normal_cdf(1.959963985) == doctest::Approx(0.975).epsilon(1e-8));
}

}  // TEST_SUITE

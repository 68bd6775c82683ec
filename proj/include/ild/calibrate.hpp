#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "json.hpp"

namespace ild {

enum class CalMethod { isotonic, platt, beta, temperature, histogram };

CalMethod cal_method_from_string(const std::string& name);
std::string to_string(CalMethod method);

struct CalOptions {
  int histogram_bins = 10;
};

// Post-hoc probability calibrator. Isotonic, platt, beta and histogram act
// one-vs-rest per class with a final row renormalization; temperature rescales
// the log-probabilities jointly, which keeps every row argmax unchanged.
class Calibrator {
 public:
  CalMethod method() const { return method_; }
  int num_classes() const { return m_; }
  double temperature() const { return temp_; }

  // probs rows must lie on the simplex (within 1e-6) with matching width
  Eigen::MatrixXd transform(const Eigen::MatrixXd& probs) const;

  nlohmann::json params() const;

  static Calibrator with_temperature(double t, int num_classes);

 private:
  friend Calibrator fit_calibrator(CalMethod method,
                                   const Eigen::MatrixXd& probs,
                                   const std::vector<int>& labels,
                                   const CalOptions& opt);

  CalMethod method_ = CalMethod::temperature;
  int m_ = 0;
  // isotonic: per class, block start scores and fitted block values
  std::vector<std::vector<double>> iso_x_, iso_v_;
  // platt (a,b,unused) / beta (a,b,c), per class
  std::vector<std::array<double, 3>> coef_;
  double temp_ = 1.0;
  // histogram: per class, interior cut points and per-bin frequencies
  std::vector<std::vector<double>> hist_cuts_, hist_vals_;
};

// Fits on held-out calibration data. Single-class labels are an error for
// platt/beta/temperature; isotonic and histogram degrade to a constant map.
Calibrator fit_calibrator(CalMethod method, const Eigen::MatrixXd& probs,
                          const std::vector<int>& labels,
                          const CalOptions& opt = {});

Eigen::MatrixXd apply_calibrator(const Calibrator& cal,
                                 const Eigen::MatrixXd& probs);

}  // namespace ild

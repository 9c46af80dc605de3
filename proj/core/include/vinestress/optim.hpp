#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

namespace vinestress {

//! Result of a derivative-free local minimization.
struct LocalResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  int max_evaluations = 2000;
  //! Stop when the simplex value spread falls below this (absolute + relative).
  double ftol = 1e-10;
  //! Stop when the simplex diameter falls below this.
  double xtol = 1e-10;
};

//! Nelder-Mead simplex minimizer.
//!
//! `step` gives the initial simplex offset per coordinate. Non-finite
//! objective values are treated as +infinity, so infeasible regions can be
//! expressed by returning NaN or inf.
LocalResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                        const NelderMeadOptions& opts = {});

//! One-dimensional bounded minimization (Brent). Returns (argmin, min).
std::pair<double, double> brent_minimize(const std::function<double(double)>& f,
                                         double lower, double upper, int bits = 40,
                                         int max_iter = 200);

} // namespace vinestress

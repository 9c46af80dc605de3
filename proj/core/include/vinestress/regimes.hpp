#pragma once

#include "vinestress/errors.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace vinestress {

// ---------------------------------------------------------------------------
// Kernel PCA compression

enum class KernelType { linear, gaussian };

struct KernelSpec {
  KernelType type = KernelType::linear;
  //! Gaussian kernel exp(-|x - y|^2 / (2 h^2)); 0 picks the median pairwise
  //! distance.
  double bandwidth = 0.0;
};

double median_pairwise_distance(const Eigen::MatrixXd& data);

//! Scores of the first kernel principal component of the rows of `data`
//! (n > d >= 1), signed to correlate positively with the first column.
//! All zero when the leading eigenvalue of the centered kernel matrix is
//! below 1e-10.
Eigen::VectorXd kernel_pca_first_component(const Eigen::MatrixXd& data, const KernelSpec& k = {});

// ---------------------------------------------------------------------------
// Two-component t-copula mixture

//! pi weights component 1; rho1 >= rho2 by convention.
struct MixtureParams {
  double pi = 0.5;
  double rho1 = 0.5;
  double rho2 = -0.5;
  double nu1 = 4.0;
  double nu2 = 4.0;
};

//! Throws DomainError outside pi in [0, 1], |rho| < 1, nu > 2.
void validate(const MixtureParams& m);

//! Log density of the mixture at a point of the unit square.
double mixture_log_density(double u, double v, const MixtureParams& m);
double mixture_loglik(const Eigen::MatrixXd& u, const MixtureParams& m);

struct MixtureFitOptions {
  int max_iterations = 500;
  //! Stop once an iteration gains less log-likelihood than this.
  double tolerance = 1e-6;
  std::vector<double> nu_grid{2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 25.0};
  //! Continuous refinement of each nu between its grid neighbours at the end.
  bool refine_nu = true;
  //! A component weight below this (or above 1 - this) is a collapse.
  double min_weight = 0.01;
  double boundary_weight = 0.1;
  std::size_t workers = 1;
};

//! One mixture component absorbed (almost) all observations.
class DegenerateMixtureError : public FitError {
public:
  using FitError::FitError;
};

struct MixtureFit {
  MixtureParams params;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  //! min(pi, 1 - pi) below MixtureFitOptions::boundary_weight: the data may
  //! hold a single regime.
  bool near_boundary = false;
  //! Log-likelihood after every E-step; nondecreasing.
  std::vector<double> trace;
};

//! EM fit on n >= 200 pairs in the open unit square. Initialized by the sign
//! of the product of normal scores; deterministic.
MixtureFit fit_tcop_mixture(const Eigen::MatrixXd& u, const MixtureFitOptions& opts = {});

struct ClusterAssignment {
  //! n x 2 posterior probabilities of components 1 and 2.
  Eigen::MatrixXd posterior;
  //! 1 or 2; ties go to 1.
  std::vector<int> labels;
};

ClusterAssignment assign_clusters(const Eigen::MatrixXd& u, const MixtureParams& m,
                                  std::size_t workers = 1);

//! CSV with header row,posterior1,posterior2,label (rows numbered from 0).
void write_assignment_csv(std::ostream& os, const ClusterAssignment& a);

//! n x 2 sample; component labels (1 or 2) are stored when `labels` is set.
Eigen::MatrixXd simulate_tcop_mixture(const MixtureParams& m, std::size_t n, std::mt19937_64& rng,
                                      std::vector<int>* labels = nullptr);

// ---------------------------------------------------------------------------
// Pipeline

struct RegimeAnalysis {
  Eigen::VectorXd score;
  //! Ranks of (score, loss) divided by n + 1.
  Eigen::MatrixXd u;
  MixtureFit fit;
  ClusterAssignment assignment;
};

//! Kernel-PCA compression of the factors, rank transform, mixture fit and
//! posterior assignment.
RegimeAnalysis cluster_regimes(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                               const KernelSpec& kernel = {}, const MixtureFitOptions& opts = {});

} // namespace vinestress

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace vinestress {

//! Jones-Faddy skew-t law: location, scale and left/right tail shapes.
//!
//! With alpha == beta the law is Student t with 2*alpha degrees of freedom.
struct SkewTParams {
  double mu = 0.0;
  double sigma = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
};

//! Shape box used by the maximum-likelihood fit.
inline constexpr double kSkewTShapeMin = 0.1;
inline constexpr double kSkewTShapeMax = 10.0;

void validate(const SkewTParams& p);

double skewt_density(double x, const SkewTParams& p);
double skewt_log_density(double x, const SkewTParams& p);
double skewt_cdf(double x, const SkewTParams& p);
double skewt_quantile(double q, const SkewTParams& p);
//! Location of the (unique) density maximum.
double skewt_mode(const SkewTParams& p);
double skewt_sample(const SkewTParams& p, std::mt19937_64& rng);

struct SkewTFit {
  SkewTParams params;
  double loglik = 0.0;
  //! Log-likelihood at the moment-based starting point.
  double initial_loglik = 0.0;
  bool alpha_at_bound = false;
  bool beta_at_bound = false;

  bool at_boundary() const { return alpha_at_bound || beta_at_bound; }
};

//! Maximum likelihood within alpha, beta in [0.1, 10], sigma > 0.
//! Requires at least 50 finite, non-constant observations.
SkewTFit fit_skewt(std::span<const double> sample);

double skewt_loglik(std::span<const double> sample, const SkewTParams& p);

// ---------------------------------------------------------------------------
// Generalized Pareto tails and the kernel/GPD hybrid

enum class TailSide { lower, upper };

//! Generalized Pareto model for excesses beyond `threshold`. For the lower
//! side the excess is (threshold - x).
struct GpdTail {
  double threshold = 0.0;
  double scale = 1.0;
  double shape = 0.0;
  TailSide side = TailSide::upper;
  //! Probability mass beyond the threshold.
  double tail_mass = 0.1;
};

//! Survival function of a GPD excess y >= 0.
double gpd_survival(double y, double scale, double shape);
double gpd_density(double y, double scale, double shape);
//! Excess at which the survival function equals s in (0, 1].
double gpd_excess_quantile(double s, double scale, double shape);

//! Gaussian kernel estimate of cdf and density on the core region
//! [lower, upper], stored on a uniform grid and interpolated with cubic
//! Hermite splines (the cdf interpolant uses the kernel density as slope, and
//! the density is the exact derivative of that interpolant).
struct KernelCore {
  double lower = 0.0;
  double upper = 1.0;
  double bandwidth = 1.0;
  std::vector<double> cdf_nodes;
  std::vector<double> pdf_nodes;

  double cdf(double x) const;
  double pdf(double x) const;
  double quantile(double q) const;
};

//! Exact Gaussian-kernel cdf and density estimates (O(n) per point).
double kernel_cdf(std::span<const double> sample, double bandwidth, double x);
double kernel_pdf(std::span<const double> sample, double bandwidth, double x);
//! Silverman's rule: 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
double silverman_bandwidth(std::span<const double> sample);

struct HybridMarginal {
  KernelCore core;
  GpdTail lower;
  GpdTail upper;

  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double q) const;
};

//! Kernel core between the empirical q_lo and q_hi quantiles with GPD tails.
//! Tail scales are tied to the kernel estimate so the density is continuous at
//! both thresholds; tail shapes are estimated by maximum likelihood.
HybridMarginal fit_hybrid(std::span<const double> sample, double q_lo = 0.15,
                          double q_hi = 0.85);

// ---------------------------------------------------------------------------

//! PIT values are clamped to [kPitClamp, 1 - kPitClamp].
inline constexpr double kPitClamp = 1e-10;

class MarginalModel {
public:
  using Variant = std::variant<SkewTParams, HybridMarginal>;

  MarginalModel() = default;
  MarginalModel(SkewTParams p);
  MarginalModel(HybridMarginal h);

  const Variant& variant() const { return model_; }
  bool is_skew_t() const { return std::holds_alternative<SkewTParams>(model_); }

  double pdf(double x) const;
  double log_pdf(double x) const;
  double cdf(double x) const;
  double quantile(double q) const;
  //! Clamped probability integral transform.
  double pit(double x) const;
  //! Location of the density maximum.
  double mode() const;

private:
  Variant model_ = SkewTParams{};
};

double marginal_pit(double x, const MarginalModel& m);
double marginal_quantile(double u, const MarginalModel& m);

} // namespace vinestress

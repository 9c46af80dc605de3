#include "vinestress/univariate.hpp"

#include "vinestress/errors.hpp"
#include "vinestress/optim.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace vinestress {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 + z/s) and log(1 - z/s) for s = sqrt(a + b + z^2), without
// cancellation in either tail.
struct SkewLogs {
  double plus;
  double minus;
};

SkewLogs skew_logs(double z, double ab)
{
  const double s = std::sqrt(ab + z * z);
  if (z >= 0.0)
    return {std::log((s + z) / s), std::log(ab / (s * (s + z)))};
  return {std::log(ab / (s * (s - z))), std::log((s - z) / s)};
}

// y = (1 + z/s)/2 and 1 - y, both computed without cancellation.
std::pair<double, double> skew_y(double z, double ab)
{
  const double s = std::sqrt(ab + z * z);
  if (z >= 0.0)
    return {0.5 * (s + z) / s, 0.5 * ab / (s * (s + z))};
  return {0.5 * ab / (s * (s - z)), 0.5 * (s - z) / s};
}

double log_norm_const(double a, double b)
{
  return (a + b - 1.0) * std::numbers::ln2 + std::lgamma(a) + std::lgamma(b) -
         std::lgamma(a + b) + 0.5 * std::log(a + b);
}

double std_normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double std_normal_pdf(double x)
{
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Type-7 empirical quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double q)
{
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

void require_finite(std::span<const double> sample, const char* what)
{
  for (double v : sample)
    if (!std::isfinite(v))
      throw FitError(std::string(what) + ": sample contains non-finite values");
}

double logistic(double t)
{
  return 1.0 / (1.0 + std::exp(-t));
}

double logit(double p)
{
  return std::log(p / (1.0 - p));
}

double shape_from(double t)
{
  return kSkewTShapeMin + (kSkewTShapeMax - kSkewTShapeMin) * logistic(t);
}

double shape_to(double a)
{
  const double p = (a - kSkewTShapeMin) / (kSkewTShapeMax - kSkewTShapeMin);
  return logit(std::clamp(p, 1e-9, 1.0 - 1e-9));
}

SkewTParams params_from(const Eigen::VectorXd& t)
{
  return {t(0), std::exp(t(1)), shape_from(t(2)), shape_from(t(3))};
}

Eigen::VectorXd params_to(const SkewTParams& p)
{
  Eigen::VectorXd t(4);
  t << p.mu, std::log(p.sigma), shape_to(p.alpha), shape_to(p.beta);
  return t;
}

} // namespace

// ---------------------------------------------------------------------------
// skew-t

void validate(const SkewTParams& p)
{
  if (!(p.sigma > 0.0) || !(p.alpha > 0.0) || !(p.beta > 0.0) || !std::isfinite(p.mu) ||
      !std::isfinite(p.sigma) || !std::isfinite(p.alpha) || !std::isfinite(p.beta))
    throw DomainError("skew-t parameters require sigma, alpha, beta > 0");
}

double skewt_log_density(double x, const SkewTParams& p)
{
  if (!std::isfinite(x))
    throw DomainError("skewt_density: non-finite argument");
  const double z = (x - p.mu) / p.sigma;
  const double ab = p.alpha + p.beta;
  const auto [lp, lm] = skew_logs(z, ab);
  return -std::log(p.sigma) - log_norm_const(p.alpha, p.beta) + (p.alpha + 0.5) * lp +
         (p.beta + 0.5) * lm;
}

double skewt_density(double x, const SkewTParams& p)
{
  return std::exp(skewt_log_density(x, p));
}

double skewt_cdf(double x, const SkewTParams& p)
{
  if (std::isnan(x))
    throw DomainError("skewt_cdf: NaN argument");
  if (x == -kInf)
    return 0.0;
  if (x == kInf)
    return 1.0;
  const double z = (x - p.mu) / p.sigma;
  const auto [y, ybar] = skew_y(z, p.alpha + p.beta);
  if (y <= 0.5)
    return boost::math::ibeta(p.alpha, p.beta, y);
  return 1.0 - boost::math::ibeta(p.beta, p.alpha, ybar);
}

double skewt_quantile(double q, const SkewTParams& p)
{
  if (!(q > 0.0 && q < 1.0))
    throw DomainError("skewt_quantile: probability must lie in (0, 1)");
  double y, ybar;
  if (q <= 0.5) {
    y = boost::math::ibeta_inv(p.alpha, p.beta, q);
    ybar = 1.0 - y;
  } else {
    ybar = boost::math::ibeta_inv(p.beta, p.alpha, 1.0 - q);
    y = 1.0 - ybar;
  }
  const double z = std::sqrt(p.alpha + p.beta) * (y - ybar) / (2.0 * std::sqrt(y * ybar));
  double x = p.mu + p.sigma * z;
  // one Newton step on the cdf, kept only if it helps
  const double f = skewt_density(x, p);
  if (f > 0.0) {
    const double r0 = skewt_cdf(x, p) - q;
    const double x1 = x - r0 / f;
    if (std::isfinite(x1) && std::abs(skewt_cdf(x1, p) - q) < std::abs(r0))
      x = x1;
  }
  return x;
}

double skewt_mode(const SkewTParams& p)
{
  const double a = p.alpha, b = p.beta;
  const double z = (a - b) * std::sqrt(a + b) / std::sqrt((2.0 * a + 1.0) * (2.0 * b + 1.0));
  return p.mu + p.sigma * z;
}

double skewt_sample(const SkewTParams& p, std::mt19937_64& rng)
{
  std::gamma_distribution<double> ga(p.alpha, 1.0), gb(p.beta, 1.0);
  const double g1 = ga(rng), g2 = gb(rng);
  const double y = g1 / (g1 + g2);
  const double ybar = g2 / (g1 + g2);
  const double z = std::sqrt(p.alpha + p.beta) * (y - ybar) / (2.0 * std::sqrt(y * ybar));
  return p.mu + p.sigma * z;
}

double skewt_loglik(std::span<const double> sample, const SkewTParams& p)
{
  const double ab = p.alpha + p.beta;
  const double c = -std::log(p.sigma) - log_norm_const(p.alpha, p.beta);
  double ll = 0.0;
  for (double x : sample) {
    const double z = (x - p.mu) / p.sigma;
    const auto [lp, lm] = skew_logs(z, ab);
    ll += c + (p.alpha + 0.5) * lp + (p.beta + 0.5) * lm;
  }
  return ll;
}

SkewTFit fit_skewt(std::span<const double> sample)
{
  if (sample.size() < 50)
    throw FitError("fit_skewt: need at least 50 observations");
  require_finite(sample, "fit_skewt");

  const double n = static_cast<double>(sample.size());
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
  double var = 0.0;
  for (double v : sample)
    var += (v - mean) * (v - mean);
  var /= n - 1.0;
  if (!(var > 1e-300) || std::sqrt(var) <= 1e-14 * std::abs(mean))
    throw FitError("fit_skewt: degenerate (constant) sample");

  // moments of a t_4 (alpha = beta = 2): variance 2 sigma^2
  const SkewTParams init{mean, std::sqrt(var / 2.0), 2.0, 2.0};

  auto objective = [&](const Eigen::VectorXd& t) {
    const SkewTParams p = params_from(t);
    return -skewt_loglik(sample, p) / n;
  };

  SkewTFit fit;
  fit.initial_loglik = skewt_loglik(sample, init);

  const Eigen::VectorXd t0 = params_to(init);
  Eigen::VectorXd step(4);
  step << 0.5 * init.sigma, 0.3, 0.5, 0.5;
  NelderMeadOptions opts;
  opts.max_evaluations = 4000;
  opts.ftol = 1e-12;
  opts.xtol = 1e-9;

  // multi-start: the moment initializer plus three deterministic jitters
  static const double jitter[3][4] = {
      {0.10, 0.2, 0.8, -0.8}, {-0.10, -0.2, -0.8, 0.8}, {0.0, 0.1, 1.5, 1.5}};
  LocalResult best = nelder_mead(objective, t0, step, opts);
  for (const auto& j : jitter) {
    Eigen::VectorXd start = t0;
    start(0) += j[0] * init.sigma;
    start(1) += j[1];
    start(2) += j[2];
    start(3) += j[3];
    auto r = nelder_mead(objective, start, step, opts);
    if (r.value < best.value)
      best = r;
  }
  // restart from the winner to shake off a collapsed simplex
  auto polished = nelder_mead(objective, best.x, 0.1 * step, opts);
  if (polished.value < best.value)
    best = polished;

  fit.params = params_from(best.x);
  fit.loglik = skewt_loglik(sample, fit.params);
  if (fit.loglik < fit.initial_loglik) {
    fit.params = init;
    fit.loglik = fit.initial_loglik;
  }
  constexpr double tol = 1e-3;
  auto at_bound = [&](double a) {
    return a <= kSkewTShapeMin * (1.0 + tol) || a >= kSkewTShapeMax * (1.0 - tol);
  };
  fit.alpha_at_bound = at_bound(fit.params.alpha);
  fit.beta_at_bound = at_bound(fit.params.beta);
  return fit;
}

// ---------------------------------------------------------------------------
// GPD

double gpd_survival(double y, double scale, double shape)
{
  if (y <= 0.0)
    return 1.0;
  const double t = shape * y / scale;
  if (std::abs(shape) < 1e-12)
    return std::exp(-y / scale);
  if (1.0 + t <= 0.0)
    return 0.0;
  return std::exp(-std::log1p(t) / shape);
}

double gpd_density(double y, double scale, double shape)
{
  if (y < 0.0)
    return 0.0;
  if (std::abs(shape) < 1e-12)
    return std::exp(-y / scale) / scale;
  const double t = shape * y / scale;
  if (1.0 + t <= 0.0)
    return 0.0;
  return std::exp(-(1.0 / shape + 1.0) * std::log1p(t)) / scale;
}

double gpd_excess_quantile(double s, double scale, double shape)
{
  if (!(s > 0.0 && s <= 1.0))
    throw DomainError("gpd_excess_quantile: survival level must lie in (0, 1]");
  const double ls = std::log(s);
  if (std::abs(shape) < 1e-12)
    return -scale * ls;
  return scale * std::expm1(-shape * ls) / shape;
}

namespace {

// Negative GPD log-likelihood of excesses with the scale held fixed.
double gpd_negloglik(std::span<const double> excess, double scale, double shape)
{
  double nll = static_cast<double>(excess.size()) * std::log(scale);
  for (double y : excess) {
    const double t = shape * y / scale;
    if (1.0 + t <= 0.0)
      return kInf;
    const double l = std::abs(shape) < 1e-12 ? y / scale : std::log1p(t) / shape;
    nll += (1.0 + shape) * l;
  }
  return nll;
}

double fit_gpd_shape(std::span<const double> excess, double scale)
{
  const double ymax = *std::max_element(excess.begin(), excess.end());
  const double lo = std::max(-1.0, -scale / ymax) + 1e-8;
  const double hi = 2.0;
  auto [xi, nll] =
      brent_minimize([&](double s) { return gpd_negloglik(excess, scale, s); }, lo, hi, 52);
  (void)nll;
  return xi;
}

} // namespace

// ---------------------------------------------------------------------------
// kernel core

double kernel_cdf(std::span<const double> sample, double bandwidth, double x)
{
  double s = 0.0;
  for (double v : sample)
    s += std_normal_cdf((x - v) / bandwidth);
  return s / static_cast<double>(sample.size());
}

double kernel_pdf(std::span<const double> sample, double bandwidth, double x)
{
  double s = 0.0;
  for (double v : sample)
    s += std_normal_pdf((x - v) / bandwidth);
  return s / (static_cast<double>(sample.size()) * bandwidth);
}

double silverman_bandwidth(std::span<const double> sample)
{
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double var = 0.0;
  for (double v : sorted)
    var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0))
    spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

namespace {

struct HermiteCell {
  std::size_t k;
  double t;
  double dx;
};

HermiteCell locate(const KernelCore& c, double x)
{
  const std::size_t cells = c.cdf_nodes.size() - 1;
  const double dx = (c.upper - c.lower) / static_cast<double>(cells);
  double pos = (x - c.lower) / dx;
  pos = std::clamp(pos, 0.0, static_cast<double>(cells));
  auto k = static_cast<std::size_t>(std::floor(pos));
  if (k >= cells)
    k = cells - 1;
  return {k, pos - static_cast<double>(k), dx};
}

double hermite_value(const KernelCore& c, const HermiteCell& h)
{
  const double t = h.t, t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * c.cdf_nodes[h.k] + (t3 - 2 * t2 + t) * h.dx * c.pdf_nodes[h.k] +
         (-2 * t3 + 3 * t2) * c.cdf_nodes[h.k + 1] + (t3 - t2) * h.dx * c.pdf_nodes[h.k + 1];
}

double hermite_slope(const KernelCore& c, const HermiteCell& h)
{
  const double t = h.t, t2 = t * t;
  return ((6 * t2 - 6 * t) * c.cdf_nodes[h.k] + (3 * t2 - 4 * t + 1) * h.dx * c.pdf_nodes[h.k] +
          (-6 * t2 + 6 * t) * c.cdf_nodes[h.k + 1] + (3 * t2 - 2 * t) * h.dx * c.pdf_nodes[h.k + 1]) /
         h.dx;
}

} // namespace

double KernelCore::cdf(double x) const
{
  return hermite_value(*this, locate(*this, x));
}

double KernelCore::pdf(double x) const
{
  return std::max(0.0, hermite_slope(*this, locate(*this, x)));
}

double KernelCore::quantile(double q) const
{
  const auto it = std::upper_bound(cdf_nodes.begin(), cdf_nodes.end(), q);
  std::size_t k = it == cdf_nodes.begin() ? 0 : static_cast<std::size_t>(it - cdf_nodes.begin()) - 1;
  k = std::min(k, cdf_nodes.size() - 2);
  const double dx = (upper - lower) / static_cast<double>(cdf_nodes.size() - 1);
  double a = 0.0, b = 1.0;
  double t = 0.5;
  for (int iter = 0; iter < 100; ++iter) {
    const HermiteCell cell{k, t, dx};
    const double r = hermite_value(*this, cell) - q;
    if (r > 0.0)
      b = t;
    else
      a = t;
    const double slope = hermite_slope(*this, cell) * dx;
    double next = slope > 0.0 ? t - r / slope : 0.5 * (a + b);
    if (!(next > a && next < b))
      next = 0.5 * (a + b);
    if (std::abs(next - t) < 1e-15 || b - a < 1e-15) {
      t = next;
      break;
    }
    t = next;
  }
  return lower + (static_cast<double>(k) + t) * dx;
}

// ---------------------------------------------------------------------------
// hybrid

double HybridMarginal::pdf(double x) const
{
  if (x < lower.threshold)
    return lower.tail_mass * gpd_density(lower.threshold - x, lower.scale, lower.shape);
  if (x > upper.threshold)
    return upper.tail_mass * gpd_density(x - upper.threshold, upper.scale, upper.shape);
  return core.pdf(x);
}

double HybridMarginal::cdf(double x) const
{
  if (x < lower.threshold)
    return lower.tail_mass * gpd_survival(lower.threshold - x, lower.scale, lower.shape);
  if (x > upper.threshold)
    return 1.0 - upper.tail_mass * gpd_survival(x - upper.threshold, upper.scale, upper.shape);
  return core.cdf(x);
}

double HybridMarginal::quantile(double q) const
{
  if (!(q > 0.0 && q < 1.0))
    throw DomainError("hybrid quantile: probability must lie in (0, 1)");
  if (q < lower.tail_mass)
    return lower.threshold - gpd_excess_quantile(q / lower.tail_mass, lower.scale, lower.shape);
  if (q > 1.0 - upper.tail_mass)
    return upper.threshold +
           gpd_excess_quantile((1.0 - q) / upper.tail_mass, upper.scale, upper.shape);
  return core.quantile(q);
}

HybridMarginal fit_hybrid(std::span<const double> sample, double q_lo, double q_hi)
{
  if (sample.size() < 200)
    throw FitError("fit_hybrid: need at least 200 observations");
  if (!(q_lo > 0.0 && q_lo < q_hi && q_hi < 1.0))
    throw DomainError("fit_hybrid: require 0 < q_lo < q_hi < 1");
  require_finite(sample, "fit_hybrid");

  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double u_lo = sorted_quantile(sorted, q_lo);
  const double u_hi = sorted_quantile(sorted, q_hi);
  if (!(u_hi > u_lo))
    throw FitError("fit_hybrid: degenerate sample (equal thresholds)");

  std::vector<double> lower_excess, upper_excess;
  for (double v : sorted) {
    if (v < u_lo)
      lower_excess.push_back(u_lo - v);
    else if (v > u_hi)
      upper_excess.push_back(v - u_hi);
  }
  if (lower_excess.size() < 20 || upper_excess.size() < 20)
    throw FitError("fit_hybrid: fewer than 20 tail exceedances");

  HybridMarginal m;
  m.core.lower = u_lo;
  m.core.upper = u_hi;
  m.core.bandwidth = silverman_bandwidth(sorted);
  if (!(m.core.bandwidth > 0.0))
    throw FitError("fit_hybrid: zero kernel bandwidth");

  constexpr std::size_t nodes = 2049;
  m.core.cdf_nodes.resize(nodes);
  m.core.pdf_nodes.resize(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    // endpoints are set exactly so the splice uses the kernel values at u_L, u_R
    const double x = k + 1 == nodes ? u_hi
                                    : u_lo + (u_hi - u_lo) * static_cast<double>(k) /
                                                 static_cast<double>(nodes - 1);
    m.core.cdf_nodes[k] = kernel_cdf(sorted, m.core.bandwidth, x);
    m.core.pdf_nodes[k] = kernel_pdf(sorted, m.core.bandwidth, x);
  }

  const double h_lo = m.core.pdf_nodes.front(), h_hi = m.core.pdf_nodes.back();
  const double H_lo = m.core.cdf_nodes.front(), H_hi = m.core.cdf_nodes.back();
  if (!(h_lo > 0.0 && h_hi > 0.0))
    throw FitError("fit_hybrid: zero kernel density at a threshold");

  m.lower = {u_lo, H_lo / h_lo, 0.0, TailSide::lower, H_lo};
  m.upper = {u_hi, (1.0 - H_hi) / h_hi, 0.0, TailSide::upper, 1.0 - H_hi};
  if (!(m.lower.tail_mass > 0.0 && m.lower.tail_mass < 0.5 && m.upper.tail_mass > 0.0 &&
        m.upper.tail_mass < 0.5))
    throw FitError("fit_hybrid: tail mass outside (0, 0.5)");

  m.lower.shape = fit_gpd_shape(lower_excess, m.lower.scale);
  m.upper.shape = fit_gpd_shape(upper_excess, m.upper.scale);
  return m;
}

// ---------------------------------------------------------------------------
// MarginalModel

MarginalModel::MarginalModel(SkewTParams p) : model_(p)
{
  validate(p);
}

MarginalModel::MarginalModel(HybridMarginal h) : model_(std::move(h)) {}

double MarginalModel::pdf(double x) const
{
  return std::visit(
      [x](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SkewTParams>)
          return skewt_density(x, m);
        else
          return m.pdf(x);
      },
      model_);
}

double MarginalModel::log_pdf(double x) const
{
  if (const auto* p = std::get_if<SkewTParams>(&model_))
    return skewt_log_density(x, *p);
  return std::log(std::get<HybridMarginal>(model_).pdf(x));
}

double MarginalModel::cdf(double x) const
{
  return std::visit(
      [x](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SkewTParams>)
          return skewt_cdf(x, m);
        else
          return m.cdf(x);
      },
      model_);
}

double MarginalModel::quantile(double q) const
{
  return std::visit(
      [q](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SkewTParams>)
          return skewt_quantile(q, m);
        else
          return m.quantile(q);
      },
      model_);
}

double MarginalModel::pit(double x) const
{
  return std::clamp(cdf(x), kPitClamp, 1.0 - kPitClamp);
}

double MarginalModel::mode() const
{
  if (const auto* p = std::get_if<SkewTParams>(&model_))
    return skewt_mode(*p);
  const auto& h = std::get<HybridMarginal>(model_);
  const auto& nodes = h.core.pdf_nodes;
  const auto k = static_cast<std::size_t>(std::max_element(nodes.begin(), nodes.end()) -
                                          nodes.begin());
  const double dx = (h.core.upper - h.core.lower) / static_cast<double>(nodes.size() - 1);
  const double lo = h.core.lower + dx * static_cast<double>(k == 0 ? 0 : k - 1);
  const double hi = std::min(h.core.upper, h.core.lower + dx * static_cast<double>(k + 1));
  return brent_minimize([&](double x) { return -h.core.pdf(x); }, lo, hi, 50).first;
}

double marginal_pit(double x, const MarginalModel& m)
{
  return m.pit(x);
}

double marginal_quantile(double u, const MarginalModel& m)
{
  return m.quantile(u);
}

} // namespace vinestress

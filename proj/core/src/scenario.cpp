#include "vinestress/scenario.hpp"

#include "vinestress/errors.hpp"
#include "vinestress/optim.hpp"
#include "vinestress/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace vinestress {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

bool Bounds::contains(const Eigen::VectorXd& x) const
{
  return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

Bounds search_bounds(const Eigen::MatrixXd& data, double expand)
{
  if (data.rows() < 1)
    throw DomainError("search_bounds: empty data");
  Bounds b;
  b.lower = data.colwise().minCoeff().transpose();
  b.upper = data.colwise().maxCoeff().transpose();
  const Eigen::VectorXd range = b.upper - b.lower;
  b.lower -= expand * range;
  b.upper += expand * range;
  for (Eigen::Index j = 0; j < range.size(); ++j)
    if (!(range(j) > 0.0))
      throw DomainError("search_bounds: constant column " + std::to_string(j));
  return b;
}

void validate(const OptimizerConfig& c)
{
  if (c.population_size < 0 || c.population_size == 1 || c.population_size == 2 ||
      c.population_size == 3)
    throw DomainError("optimizer: population size must be 0 (automatic) or at least 4");
  if (c.iterations < 1 || c.restarts < 1)
    throw DomainError("optimizer: iterations and restarts must be positive");
  if (!(c.weight > 0.0 && c.weight < 2.0) || !(c.crossover > 0.0 && c.crossover < 2.0))
    throw DomainError("optimizer: weights must lie in (0, 2)");
}

// ---------------------------------------------------------------------------
// Differential evolution

namespace {

struct RestartOutcome {
  Eigen::VectorXd z;
  double value = kNegInf;
  int generations = 0;
  long evaluations = 0;
  bool converged = false;
};

double safe_value(double v)
{
  return std::isfinite(v) ? v : kNegInf;
}

RestartOutcome de_restart(const std::function<double(const Eigen::VectorXd&)>& f, int dim,
                          const OptimizerConfig& cfg, std::uint64_t seed, std::size_t workers)
{
  const int np = cfg.population_size > 0 ? cfg.population_size : std::max(20, 10 * dim);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x9e3779b9u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, np - 1);
  std::uniform_int_distribution<int> pick_dim(0, dim - 1);

  RestartOutcome out;
  std::vector<Eigen::VectorXd> pop(static_cast<std::size_t>(np), Eigen::VectorXd(dim));
  std::vector<double> val(static_cast<std::size_t>(np));
  // Initialization: infeasible members are redrawn a bounded number of times.
  constexpr int kInitAttempts = 30;
  for (auto& p : pop)
    for (int j = 0; j < dim; ++j)
      p(j) = unif(rng);
  parallel_for(pop.size(), workers, [&](std::size_t i) { val[i] = safe_value(f(pop[i])); });
  out.evaluations += np;
  for (int attempt = 0; attempt < kInitAttempts; ++attempt) {
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (val[i] == kNegInf)
        bad.push_back(i);
    if (bad.empty())
      break;
    for (auto i : bad)
      for (int j = 0; j < dim; ++j)
        pop[i](j) = unif(rng);
    parallel_for(bad.size(), workers, [&](std::size_t k) { val[bad[k]] = safe_value(f(pop[bad[k]])); });
    out.evaluations += static_cast<long>(bad.size());
  }

  std::vector<Eigen::VectorXd> trial(pop.size(), Eigen::VectorXd(dim));
  std::vector<double> tval(pop.size());
  double best = *std::max_element(val.begin(), val.end());
  int stale = 0;
  for (int gen = 0; gen < cfg.iterations; ++gen) {
    for (int i = 0; i < np; ++i) {
      int r1, r2, r3;
      do
        r1 = pick(rng);
      while (r1 == i);
      do
        r2 = pick(rng);
      while (r2 == i || r2 == r1);
      do
        r3 = pick(rng);
      while (r3 == i || r3 == r1 || r3 == r2);
      const int jrand = pick_dim(rng);
      auto& t = trial[i];
      for (int j = 0; j < dim; ++j) {
        if (j == jrand || unif(rng) < cfg.crossover) {
          double v = pop[r1](j) + cfg.weight * (pop[r2](j) - pop[r3](j));
          // out-of-box components land halfway between the base and the bound
          if (v < 0.0)
            v = 0.5 * pop[r1](j);
          else if (v > 1.0)
            v = 0.5 * (pop[r1](j) + 1.0);
          t(j) = v;
        } else {
          t(j) = pop[i](j);
        }
      }
    }
    parallel_for(trial.size(), workers, [&](std::size_t i) { tval[i] = safe_value(f(trial[i])); });
    out.evaluations += np;
    for (int i = 0; i < np; ++i) {
      if (tval[i] >= val[i]) {
        pop[i] = trial[i];
        val[i] = tval[i];
      }
    }
    ++out.generations;
    const auto [mn, mx] = std::minmax_element(val.begin(), val.end());
    if (*mx > best + cfg.tolerance * (1.0 + std::abs(best)) || (best == kNegInf && *mx > kNegInf)) {
      stale = 0;
    } else {
      ++stale;
    }
    best = std::max(best, *mx);
    if (std::isfinite(*mn) && *mx - *mn <= cfg.tolerance * (1.0 + std::abs(*mx))) {
      out.converged = true;
      break;
    }
    if (cfg.patience > 0 && stale >= cfg.patience)
      break;
  }
  const auto it = std::max_element(val.begin(), val.end());
  out.value = *it;
  out.z = pop[static_cast<std::size_t>(it - val.begin())];
  return out;
}

} // namespace

OptimizationResult optimize_density(const std::function<double(const Eigen::VectorXd&)>& objective,
                                    const Bounds& bounds, const OptimizerConfig& cfg)
{
  validate(cfg);
  const int dim = bounds.dim();
  if (dim < 1 || bounds.upper.size() != dim)
    throw DomainError("optimize_density: bounds must be non-empty and consistent");
  for (int j = 0; j < dim; ++j)
    if (!(std::isfinite(bounds.lower(j)) && std::isfinite(bounds.upper(j)) &&
          bounds.lower(j) < bounds.upper(j)))
      throw DomainError("optimize_density: bounds must be finite with lower < upper");
  const Eigen::VectorXd width = bounds.upper - bounds.lower;
  auto to_x = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return bounds.lower + width.cwiseProduct(z);
  };
  auto f = [&](const Eigen::VectorXd& z) { return objective(to_x(z)); };
  const std::size_t workers = resolve_workers(cfg.workers);

  OptimizationResult res;
  RestartOutcome best;
  int best_restart = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    const auto o = de_restart(f, dim, cfg, cfg.seed * 1000003ULL + static_cast<std::uint64_t>(r),
                              workers);
    res.diagnostics.restart_values.push_back(o.value);
    res.diagnostics.iterations += o.generations;
    res.diagnostics.evaluations += o.evaluations;
    if (best_restart < 0 || o.value > best.value) {
      best = o;
      best_restart = r;
    }
  }
  res.diagnostics.restarts = cfg.restarts;
  res.diagnostics.converged = best.converged;

  if (cfg.polish && std::isfinite(best.value)) {
    auto neg = [&](const Eigen::VectorXd& z) {
      if ((z.array() < 0.0).any() || (z.array() > 1.0).any())
        return std::numeric_limits<double>::infinity();
      return -f(z);
    };
    Eigen::VectorXd step = Eigen::VectorXd::Constant(dim, 1e-3);
    NelderMeadOptions nm;
    nm.max_evaluations = 400 * dim;
    nm.ftol = 1e-14;
    nm.xtol = 1e-12;
    const auto lr = nelder_mead(neg, best.z, step, nm);
    res.diagnostics.evaluations += lr.evaluations;
    if (std::isfinite(lr.value) && -lr.value > best.value) {
      best.z = lr.x;
      best.value = -lr.value;
    }
  }
  res.x = to_x(best.z);
  res.value = best.value;
  return res;
}

// ---------------------------------------------------------------------------

std::string to_string(Method m)
{
  switch (m) {
  case Method::cm1:
    return "cm1";
  case Method::cm2:
    return "cm2";
  case Method::cm3:
    return "cm3";
  case Method::cm_star:
    return "cm_star";
  case Method::gkk:
    return "gkk";
  }
  return "unknown";
}

Method method_from_string(const std::string& name)
{
  for (auto m : {Method::cm1, Method::cm2, Method::cm3, Method::cm_star, Method::gkk})
    if (to_string(m) == name)
      return m;
  if (name == "cm*" || name == "cmstar")
    return Method::cm_star;
  throw InputError("unknown estimator '" + name + "' (expected cm1, cm2, cm3, cm_star or gkk)");
}

namespace {

void check_problem(const ScenarioProblem& p)
{
  const int d = p.dim();
  if (d < 1)
    throw EstimationError("scenario problem: model has no predictors");
  if (static_cast<int>(p.model.model.marginals.size()) != d + 1)
    throw EstimationError("scenario problem: model has no marginals");
  if (p.bounds.dim() != d)
    throw EstimationError("scenario problem: bounds dimension does not match the model");
  if (!std::isfinite(p.threshold))
    throw EstimationError("scenario problem: threshold must be finite");
  if (!p.fixed_factors.empty() && static_cast<int>(p.fixed_factors.size()) != d)
    throw EstimationError("scenario problem: fixed-factor mask has the wrong length");
}

// Optimization over the free coordinates; fixed factors sit at their
// marginal modes.
struct Reduced {
  std::vector<int> free;
  Eigen::VectorXd base;
  Bounds bounds;

  Eigen::VectorXd full(const Eigen::VectorXd& z) const
  {
    Eigen::VectorXd x = base;
    for (std::size_t i = 0; i < free.size(); ++i)
      x(free[i]) = z(static_cast<Eigen::Index>(i));
    return x;
  }
};

Reduced reduce(const ScenarioProblem& p)
{
  Reduced r;
  const int d = p.dim();
  r.base = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < d; ++j) {
    if (!p.fixed_factors.empty() && p.fixed_factors[j])
      r.base(j) = p.model.model.marginals[j].mode();
    else
      r.free.push_back(j);
  }
  const auto m = static_cast<Eigen::Index>(r.free.size());
  r.bounds.lower.resize(m);
  r.bounds.upper.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    r.bounds.lower(i) = p.bounds.lower(r.free[i]);
    r.bounds.upper(i) = p.bounds.upper(r.free[i]);
  }
  return r;
}

ScenarioEstimate run_search(const ScenarioProblem& p, Method method,
                            const std::function<double(const Eigen::VectorXd&)>& objective,
                            const OptimizerConfig& cfg)
{
  const auto red = reduce(p);
  ScenarioEstimate est;
  est.method = method;
  est.threshold = p.threshold;
  if (red.free.empty()) {
    est.m_hat = red.base;
    est.objective_value = objective(est.m_hat);
  } else {
    const auto r = optimize_density([&](const Eigen::VectorXd& z) { return objective(red.full(z)); },
                                    red.bounds, cfg);
    est.m_hat = red.full(r.x);
    est.objective_value = r.value;
    est.diagnostics = r.diagnostics;
  }
  return est;
}

double predict_or_nan(const Eigen::VectorXd& x, const LeafConstrainedVine& v)
{
  try {
    return vine_regression_predict(x, v);
  } catch (const PredictionError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

Eigen::VectorXd predictor_pits(const Eigen::VectorXd& x, const LeafConstrainedVine& v)
{
  Eigen::VectorXd u(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j)
    u(j) = v.model.marginals[j].pit(x(j));
  return u;
}

// Constrained estimators: maximize log f_X on {g(x) >= l}. `slack(x)` is
// g(x) - l on a monotone scale (>= 0 means feasible).
ScenarioEstimate constrained_estimate(const ScenarioProblem& p, Method method,
                                      const std::function<double(const Eigen::VectorXd&)>& slack,
                                      const OptimizerConfig& cfg)
{
  check_problem(p);
  const auto& v = p.model;
  const auto red = reduce(p);
  ScenarioEstimate est;
  est.method = method;
  est.threshold = p.threshold;
  if (red.free.empty()) {
    est.m_hat = red.base;
    if (!(slack(est.m_hat) >= 0.0))
      throw EstimationError("threshold unattainable in search box");
    est.objective_value = predictor_log_density(est.m_hat, v);
  } else {
    const auto r = maximize_constrained(
        [&](const Eigen::VectorXd& z) { return predictor_log_density(red.full(z), v); },
        [&](const Eigen::VectorXd& z) { return slack(red.full(z)); }, red.bounds, cfg);
    est.m_hat = red.full(r.x);
    est.objective_value = r.value;
    est.diagnostics = r.diagnostics;
  }
  est.fitted_loss = predict_or_nan(est.m_hat, v);
  return est;
}

} // namespace

OptimizationResult maximize_constrained(const std::function<double(const Eigen::VectorXd&)>& logf,
                                        const std::function<double(const Eigen::VectorXd&)>& slack,
                                        const Bounds& bounds, const OptimizerConfig& cfg)
{
  OptimizerConfig mode_cfg = cfg;
  mode_cfg.restarts = std::max(1, cfg.restarts / 2);
  mode_cfg.seed = cfg.seed + 7919;
  const auto mode = optimize_density(logf, bounds, mode_cfg);
  if (slack(mode.x) >= 0.0)
    return mode;

  auto objective = [&](const Eigen::VectorXd& x) {
    if (!(slack(x) >= 0.0))
      return kNegInf;
    return logf(x);
  };
  auto res = optimize_density(objective, bounds, cfg);
  res.diagnostics.evaluations += mode.diagnostics.evaluations;
  if (!std::isfinite(res.value))
    throw EstimationError("threshold unattainable in search box");

  // Move along the segment towards the unconstrained mode until the
  // constraint becomes active; keep the feasible end of the bracket.
  Eigen::VectorXd lo = res.x, hi = mode.x;
  for (int it = 0; it < 200 && (hi - lo).norm() > 1e-15 * (1.0 + lo.norm()); ++it) {
    const Eigen::VectorXd mid = 0.5 * (lo + hi);
    if (slack(mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double on_boundary = logf(lo);
  if (on_boundary >= res.value - 1e-9 * (1.0 + std::abs(res.value))) {
    res.x = lo;
    res.value = on_boundary;
  }
  return res;
}

Eigen::VectorXd unconditional_mode(const ScenarioProblem& p, const OptimizerConfig& cfg)
{
  check_problem(p);
  OptimizerConfig c = cfg;
  c.restarts = std::max(1, cfg.restarts / 2);
  c.seed = cfg.seed + 7919;
  const auto est = run_search(
      p, Method::cm2, [&](const Eigen::VectorXd& x) { return predictor_log_density(x, p.model); },
      c);
  return est.m_hat;
}

ScenarioEstimate estimate_cm1(const ScenarioProblem& p, const OptimizerConfig& cfg)
{
  check_problem(p);
  const int d = p.dim();
  auto objective = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd xl(d + 1);
    xl.head(d) = x;
    xl(d) = p.threshold;
    return rvine_log_density(xl, p.model.model);
  };
  auto est = run_search(p, Method::cm1, objective, cfg);
  est.fitted_loss = predict_or_nan(est.m_hat, p.model);
  return est;
}

ScenarioEstimate estimate_cm2(const ScenarioProblem& p, const OptimizerConfig& cfg)
{
  check_problem(p);
  const auto& v = p.model;
  const double ul = v.model.marginals[v.predictors()].cdf(p.threshold);
  // ghat(x) >= l  <=>  median PIT >= F_L(l), since the quantile is increasing
  auto slack = [&](const Eigen::VectorXd& x) {
    return conditional_median_uniform(predictor_pits(x, v), v) - ul;
  };
  return constrained_estimate(p, Method::cm2, slack, cfg);
}

ScenarioEstimate estimate_cm3(const ScenarioProblem& p, const OptimizerConfig& cfg)
{
  check_problem(p);
  const auto& v = p.model;
  const double ul = v.model.marginals[v.predictors()].pit(p.threshold);
  auto objective = [&](const Eigen::VectorXd& x) {
    const double lf = predictor_log_density(x, v);
    if (!std::isfinite(lf))
      return kNegInf;
    const double c = conditional_cdf_uniform(ul, predictor_pits(x, v), v);
    return lf + std::log1p(-c);
  };
  auto est = run_search(p, Method::cm3, objective, cfg);
  est.fitted_loss = predict_or_nan(est.m_hat, v);
  return est;
}

ScenarioEstimate estimate_cm_star(const ScenarioProblem& p,
                                  const std::function<double(const Eigen::VectorXd&)>& g,
                                  const OptimizerConfig& cfg)
{
  if (!g)
    throw EstimationError("cm_star: the true loss map is required");
  const double l = p.threshold;
  return constrained_estimate(p, Method::cm_star,
                              [&](const Eigen::VectorXd& x) { return g(x) - l; }, cfg);
}

ScenarioEstimate estimate_gkk(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                              double threshold)
{
  if (x.rows() != loss.size())
    throw EstimationError("gkk: factor and loss lengths differ");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.cols());
  int count = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (loss(i) >= threshold) {
      sum += x.row(i).transpose();
      ++count;
    }
  }
  if (count < 20)
    throw EstimationError("gkk: only " + std::to_string(count) +
                          " exceedances of the threshold (need at least 20)");
  ScenarioEstimate est;
  est.method = Method::gkk;
  est.threshold = threshold;
  est.m_hat = sum / count;
  est.fitted_loss = std::numeric_limits<double>::quiet_NaN();
  est.objective_value = count;
  est.diagnostics.converged = true;
  return est;
}

double fitted_loss_at(const Eigen::VectorXd& x, const LeafConstrainedVine& v)
{
  return vine_regression_predict(x, v);
}

std::vector<bool> independent_factors(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                                      double level)
{
  std::vector<bool> out(static_cast<std::size_t>(x.cols()));
  const std::vector<double> l(loss.data(), loss.data() + loss.size());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const std::vector<double> c(x.col(j).data(), x.col(j).data() + x.rows());
    out[j] = tau_independence_pvalue(empirical_tau(c, l), c.size()) > level;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

std::string to_string(MarginalKind k)
{
  return k == MarginalKind::skew_t ? "skew_t" : "hybrid";
}

MarginalKind marginal_kind_from_string(const std::string& name)
{
  if (name == "skew_t" || name == "skewt" || name == "skew-t")
    return MarginalKind::skew_t;
  if (name == "hybrid" || name == "gpd")
    return MarginalKind::hybrid;
  throw InputError("unknown marginal kind '" + name + "' (expected skew_t or hybrid)");
}

MarginalModel fit_marginal(std::span<const double> sample, MarginalKind kind, double q_lo,
                           double q_hi)
{
  if (kind == MarginalKind::skew_t)
    return MarginalModel(fit_skewt(sample).params);
  return MarginalModel(fit_hybrid(sample, q_lo, q_hi));
}

LeafConstrainedVine fit_joint_model(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                                    const PipelineConfig& cfg)
{
  const int d = static_cast<int>(x.cols());
  if (x.rows() != loss.size())
    throw FitError("fit_joint_model: factor and loss lengths differ");
  if (!cfg.marginals.empty() && static_cast<int>(cfg.marginals.size()) != d + 1)
    throw FitError("fit_joint_model: need one marginal kind per factor plus the loss");
  std::vector<MarginalModel> margins(static_cast<std::size_t>(d + 1));
  for (int j = 0; j <= d; ++j) {
    const auto kind = cfg.marginals.empty() ? MarginalKind::skew_t : cfg.marginals[j];
    const auto& col = j < d ? Eigen::VectorXd(x.col(j)) : loss;
    margins[j] = fit_marginal(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                              kind, cfg.hybrid_q_lo, cfg.hybrid_q_hi);
  }
  return fit_vine_with_marginals(x, loss, std::move(margins), cfg);
}

LeafConstrainedVine fit_vine_with_marginals(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                                            std::vector<MarginalModel> margins,
                                            const PipelineConfig& cfg)
{
  const int d = static_cast<int>(x.cols());
  if (x.rows() != loss.size())
    throw FitError("fit_vine_with_marginals: factor and loss lengths differ");
  if (static_cast<int>(margins.size()) != d + 1)
    throw FitError("fit_vine_with_marginals: need one marginal per factor plus the loss");
  Eigen::MatrixXd all(x.rows(), d + 1);
  all.leftCols(d) = x;
  all.col(d) = loss;
  Eigen::MatrixXd u;
  if (cfg.rank_pseudo_obs) {
    u = pseudo_observations(all);
  } else {
    u.resize(all.rows(), all.cols());
    for (Eigen::Index i = 0; i < all.rows(); ++i)
      for (int j = 0; j <= d; ++j)
        u(i, j) = margins[j].pit(all(i, j));
  }
  auto v = build_leaf_constrained(u.leftCols(d), u.col(d), cfg.x_structure, cfg.vine);
  v.model.marginals = std::move(margins);
  return v;
}

ScenarioProblem make_problem(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                             double threshold, const PipelineConfig& cfg)
{
  ScenarioProblem p;
  p.model = fit_joint_model(x, loss, cfg);
  p.threshold = threshold;
  p.bounds = search_bounds(x);
  return p;
}

double empirical_quantile(std::span<const double> sample, double q)
{
  if (sample.empty())
    throw DomainError("empirical_quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0))
    throw DomainError("empirical_quantile: q must lie in [0, 1]");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

ScenarioEstimate run_estimator(Method m, const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                               double threshold, const PipelineConfig& pipeline,
                               const OptimizerConfig& opt,
                               const std::function<double(const Eigen::VectorXd&)>& true_g)
{
  if (m == Method::gkk)
    return estimate_gkk(x, loss, threshold);
  const auto p = make_problem(x, loss, threshold, pipeline);
  switch (m) {
  case Method::cm1:
    return estimate_cm1(p, opt);
  case Method::cm2:
    return estimate_cm2(p, opt);
  case Method::cm3:
    return estimate_cm3(p, opt);
  case Method::cm_star:
    return estimate_cm_star(p, true_g, opt);
  case Method::gkk:
    break;
  }
  return estimate_gkk(x, loss, threshold);
}

} // namespace vinestress

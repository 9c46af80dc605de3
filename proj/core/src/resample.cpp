#include "vinestress/resample.hpp"

#include "vinestress/parallel.hpp"

#include <cmath>
#include <optional>

namespace vinestress {

double default_mean_block(std::size_t n)
{
  return std::cbrt(static_cast<double>(n));
}

double BootstrapPlan::effective_mean_block() const
{
  return mean_block > 0.0 ? mean_block : default_mean_block(n);
}

void validate(const BootstrapPlan& p)
{
  if (p.n < 1)
    throw DomainError("bootstrap: series length must be positive");
  if (!(p.effective_mean_block() >= 1.0))
    throw DomainError("bootstrap: mean block length must be at least 1");
  if (p.replications < 2)
    throw DomainError("bootstrap: at least 2 replications are needed for percentile intervals");
  if (!(p.level > 0.0 && p.level < 1.0))
    throw DomainError("bootstrap: interval level must lie in (0, 1)");
  if (!(p.max_failure_fraction >= 0.0 && p.max_failure_fraction < 1.0))
    throw DomainError("bootstrap: failure fraction must lie in [0, 1)");
}

std::size_t geometric_block_length(double mean_block, std::mt19937_64& rng)
{
  if (!(mean_block >= 1.0))
    throw DomainError("bootstrap: mean block length must be at least 1");
  if (mean_block == 1.0)
    return 1;
  std::geometric_distribution<std::size_t> geo(1.0 / mean_block);
  return 1 + geo(rng);
}

std::vector<std::size_t> stationary_bootstrap_indices(const BootstrapPlan& p, std::mt19937_64& rng,
                                                      std::vector<std::size_t>* blocks)
{
  validate(p);
  const double mean = p.effective_mean_block();
  std::uniform_int_distribution<std::size_t> start(0, p.n - 1);
  std::vector<std::size_t> idx;
  idx.reserve(p.n);
  while (idx.size() < p.n) {
    const std::size_t s = start(rng);
    const std::size_t len = std::min(geometric_block_length(mean, rng), p.n - idx.size());
    for (std::size_t k = 0; k < len; ++k)
      idx.push_back((s + k) % p.n);
    if (blocks)
      blocks->push_back(len);
  }
  return idx;
}

BootstrapResult bootstrap_ci(const Eigen::VectorXd& point, const BootstrapPlan& plan,
                             const Replicate& replicate, std::size_t workers)
{
  validate(plan);
  const auto b_count = static_cast<std::size_t>(plan.replications);
  std::vector<std::optional<Eigen::VectorXd>> out(b_count);
  std::vector<std::string> errors(b_count);
  parallel_for(b_count, resolve_workers(workers), [&](std::size_t b) {
    const std::uint64_t seed = plan.seed + b;
    std::mt19937_64 rng(seed);
    const auto idx = stationary_bootstrap_indices(plan, rng);
    try {
      auto est = replicate(idx, seed);
      if (est.size() != point.size() || !est.allFinite())
        throw EstimationError("non-finite or misshaped replicate estimate");
      out[b] = std::move(est);
    } catch (const Error& e) {
      errors[b] = e.what();
    }
  });

  BootstrapResult r;
  r.level = plan.level;
  r.replications = plan.replications;
  for (std::size_t b = 0; b < b_count; ++b) {
    if (!out[b]) {
      ++r.failures;
      r.failure_messages.push_back("replication " + std::to_string(b) + ": " + errors[b]);
    }
  }
  r.effective = plan.replications - r.failures;
  if (r.failures > plan.max_failure_fraction * plan.replications || r.effective < 2)
    throw BootstrapError("bootstrap: " + std::to_string(r.failures) + " of " +
                         std::to_string(plan.replications) + " replications failed" +
                         (r.failure_messages.empty() ? "" : " (first: " + r.failure_messages[0] + ")"));
  r.draws.resize(r.effective, point.size());
  Eigen::Index row = 0;
  for (const auto& o : out)
    if (o)
      r.draws.row(row++) = o->transpose();
  const double a = 0.5 * (1.0 - plan.level);
  for (Eigen::Index j = 0; j < point.size(); ++j) {
    const std::vector<double> col(r.draws.col(j).data(), r.draws.col(j).data() + r.effective);
    r.components.push_back({empirical_quantile(col, a), point(j), empirical_quantile(col, 1.0 - a)});
  }
  return r;
}

BootstrapResult bootstrap_scenario_ci(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                                      double threshold, const ScenarioBootstrapConfig& cfg,
                                      BootstrapPlan plan)
{
  if (x.rows() != loss.size())
    throw DomainError("bootstrap: factor and loss lengths differ");
  plan.n = static_cast<std::size_t>(x.rows());
  validate(plan);

  PipelineConfig pipeline = cfg.pipeline;
  ScenarioEstimate original;
  if (cfg.method == Method::gkk) {
    original = estimate_gkk(x, loss, threshold);
  } else {
    auto p = make_problem(x, loss, threshold, pipeline);
    if (cfg.freeze_structure)
      pipeline.x_structure = predictor_structure(p.model);
    switch (cfg.method) {
    case Method::cm1:
      original = estimate_cm1(p, cfg.optimizer);
      break;
    case Method::cm2:
      original = estimate_cm2(p, cfg.optimizer);
      break;
    case Method::cm3:
      original = estimate_cm3(p, cfg.optimizer);
      break;
    default:
      throw EstimationError("bootstrap: estimator " + to_string(cfg.method) +
                            " needs the true loss map and cannot be bootstrapped from data");
    }
  }

  const std::size_t workers = resolve_workers(cfg.workers);
  auto replicate = [&](const std::vector<std::size_t>& idx, std::uint64_t seed) {
    Eigen::MatrixXd xb(x.rows(), x.cols());
    Eigen::VectorXd lb(loss.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
      lb(static_cast<Eigen::Index>(i)) = loss(static_cast<Eigen::Index>(idx[i]));
    }
    OptimizerConfig opt = cfg.optimizer;
    opt.seed = seed;
    if (workers > 1)
      opt.workers = 1;
    PipelineConfig pc = pipeline;
    if (workers > 1)
      pc.vine.workers = 1;
    return run_estimator(cfg.method, xb, lb, threshold, pc, opt).m_hat;
  };
  return bootstrap_ci(original.m_hat, plan, replicate, workers);
}

} // namespace vinestress

#include "vinestress/simstudy.hpp"

#include "dist.hpp"
#include "vinestress/errors.hpp"
#include "vinestress/parallel.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace vinestress {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate_t(const BivariateTSpec& s)
{
  const auto d = s.sigma.rows();
  if (d < 1 || s.sigma.cols() != d || s.w.size() != d)
    throw DomainError("t generator: sigma must be square and match the weights");
  if (!(s.nu > 2.0))
    throw DomainError("t generator: nu must exceed 2");
  if (!s.sigma.isApprox(s.sigma.transpose()) ||
      Eigen::LLT<Eigen::MatrixXd>(s.sigma).info() != Eigen::Success)
    throw DomainError("t generator: sigma must be symmetric positive definite");
}

void validate_vine(const MetaVineSpec& s)
{
  require_valid(s.model.structure);
  if (static_cast<int>(s.model.marginals.size()) != s.model.dim())
    throw DomainError("meta-vine generator: one marginal per variable is required");
  if (s.g.size() != s.model.dim())
    throw DomainError("meta-vine generator: g must have one coefficient per variable");
  for (const auto& tree : s.model.copulas)
    for (const auto& c : tree)
      validate(c);
}

} // namespace

void validate(const GeneratorSpec& g)
{
  std::visit(overloaded{[](const BivariateTSpec& s) { validate_t(s); },
                        [](const MetaVineSpec& s) { validate_vine(s); }},
             g);
}

int generator_dim(const GeneratorSpec& g)
{
  return std::visit(overloaded{[](const BivariateTSpec& s) { return static_cast<int>(s.w.size()); },
                               [](const MetaVineSpec& s) { return s.model.dim(); }},
                    g);
}

MetaVineSpec meta_vine_standin()
{
  MetaVineSpec s;
  s.model.structure = cvine_structure({0, 1, 2, 3});
  auto copula_for = [](const VineEdge& e) {
    const auto v = edge_variables(e);
    auto is = [&](std::vector<int> want) { return v == want; };
    if (e.cond.empty()) {
      if (is({0, 1}))
        return BivariateCopula::student_t(0.55, 5.0);
      if (is({0, 2}))
        return BivariateCopula::clayton(1.0);
      return BivariateCopula::frank(0.3);
    }
    if (e.cond.size() == 1)
      return is({0, 1, 2}) ? BivariateCopula::gaussian(0.2) : BivariateCopula::frank(-0.5);
    return BivariateCopula::gaussian(0.1);
  };
  for (const auto& tree : s.model.structure.trees) {
    std::vector<BivariateCopula> cops;
    for (const auto& e : tree)
      cops.push_back(copula_for(e));
    s.model.copulas.push_back(cops);
  }
  s.model.marginals = {MarginalModel(SkewTParams{0.0003, 0.0037, 2.2, 2.8}),
                       MarginalModel(SkewTParams{0.0, 0.0040, 2.5, 2.5}),
                       MarginalModel(SkewTParams{0.0002, 0.0045, 2.0, 2.6}),
                       MarginalModel(SkewTParams{0.0, 0.0030, 3.0, 3.0})};
  s.g = Eigen::Vector4d(-1.944, -0.018, 0.011, 0.011);
  return s;
}

SimSample generate_bivariate_t(const BivariateTSpec& s, std::size_t n, std::mt19937_64& rng)
{
  validate_t(s);
  const auto d = s.sigma.rows();
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(s.sigma).matrixL();
  std::normal_distribution<double> nd;
  std::chi_squared_distribution<double> chi(s.nu);
  SimSample out;
  out.x.resize(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    Eigen::VectorXd z(d);
    for (Eigen::Index j = 0; j < d; ++j)
      z(j) = nd(rng);
    const double scale = std::sqrt(s.nu / chi(rng));
    out.x.row(i) = (l * z).transpose() * scale;
  }
  out.loss = out.x * s.w;
  return out;
}

SimSample generate_meta_vine(const MetaVineSpec& s, std::size_t n, std::mt19937_64& rng)
{
  validate_vine(s);
  SimSample out;
  out.x = rvine_simulate(s.model, n, rng());
  out.loss = out.x * s.g;
  return out;
}

SimSample generate(const GeneratorSpec& g, std::size_t n, std::mt19937_64& rng)
{
  return std::visit(
      overloaded{[&](const BivariateTSpec& s) { return generate_bivariate_t(s, n, rng); },
                 [&](const MetaVineSpec& s) { return generate_meta_vine(s, n, rng); }},
      g);
}

double true_log_density(const GeneratorSpec& g, const Eigen::VectorXd& x)
{
  return std::visit(
      overloaded{[&](const BivariateTSpec& s) {
                   const double d = static_cast<double>(s.w.size());
                   Eigen::LLT<Eigen::MatrixXd> llt(s.sigma);
                   const Eigen::VectorXd z = llt.matrixL().solve(x);
                   const double logdet =
                       2.0 * llt.matrixLLT().diagonal().array().log().sum();
                   return std::lgamma(0.5 * (s.nu + d)) - std::lgamma(0.5 * s.nu) -
                          0.5 * d * std::log(s.nu * std::numbers::pi) - 0.5 * logdet -
                          0.5 * (s.nu + d) * std::log1p(z.squaredNorm() / s.nu);
                 },
                 [&](const MetaVineSpec& s) { return rvine_log_density(x, s.model); }},
      g);
}

double true_loss(const GeneratorSpec& g, const Eigen::VectorXd& x)
{
  return std::visit(overloaded{[&](const BivariateTSpec& s) { return s.w.dot(x); },
                               [&](const MetaVineSpec& s) { return s.g.dot(x); }},
                    g);
}

double population_loss_quantile(const GeneratorSpec& g, double level, std::size_t draws,
                                std::uint64_t seed)
{
  if (!(level > 0.0 && level < 1.0))
    throw DomainError("population quantile: level must lie in (0, 1)");
  validate(g);
  if (const auto* t = std::get_if<BivariateTSpec>(&g))
    return std::sqrt(t->w.dot(t->sigma * t->w)) * dist::t_quantile(level, t->nu);
  std::mt19937_64 rng(seed);
  const auto s = generate(g, draws, rng);
  const std::vector<double> l(s.loss.data(), s.loss.data() + s.loss.size());
  return empirical_quantile(l, level);
}

Eigen::VectorXd elliptical_scenario(const BivariateTSpec& s, double threshold)
{
  validate_t(s);
  const Eigen::VectorXd sw = s.sigma * s.w;
  return sw * threshold / s.w.dot(sw);
}

Bounds population_bounds(const GeneratorSpec& g, std::size_t draws, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  return search_bounds(generate(g, draws, rng).x);
}

Eigen::VectorXd true_scenario(const GeneratorSpec& g, double threshold, const OptimizerConfig& cfg)
{
  validate(g);
  const auto bounds = population_bounds(g);
  const auto r = maximize_constrained([&](const Eigen::VectorXd& x) { return true_log_density(g, x); },
                                      [&](const Eigen::VectorXd& x) { return true_loss(g, x) - threshold; },
                                      bounds, cfg);
  return r.x;
}

// ---------------------------------------------------------------------------

double mpe(std::span<const double> estimates, double theta)
{
  if (estimates.empty())
    return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double e : estimates)
    s += (e - theta) / theta;
  return 100.0 * s / static_cast<double>(estimates.size());
}

double rmspe(std::span<const double> estimates, double theta)
{
  if (estimates.empty())
    return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double e : estimates)
    s += (e - theta) * (e - theta) / (theta * theta);
  return 100.0 * std::sqrt(s / static_cast<double>(estimates.size()));
}

double ml2(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth)
{
  if (estimates.rows() == 0)
    return std::numeric_limits<double>::quiet_NaN();
  return (estimates.rowwise() - truth.transpose()).rowwise().norm().mean();
}

double exceedance_rate(std::span<const double> losses, double threshold)
{
  if (losses.empty())
    return std::numeric_limits<double>::quiet_NaN();
  std::size_t k = 0;
  for (double l : losses)
    k += l >= threshold;
  return 100.0 * static_cast<double>(k) / static_cast<double>(losses.size());
}

// ---------------------------------------------------------------------------

void validate(const StudyConfig& c)
{
  validate(c.generator);
  if (c.replications < 1)
    throw DomainError("study: replications must be positive");
  if (c.n < 30)
    throw DomainError("study: sample size must be at least 30");
  if (!c.threshold && !(c.level > 0.0 && c.level < 1.0))
    throw DomainError("study: quantile level must lie in (0, 1)");
  if (c.methods.empty())
    throw DomainError("study: no estimators requested");
  validate(c.optimizer);
  validate(c.truth_optimizer);
}

const MethodSummary& SimulationReport::get(Method m) const
{
  for (const auto& s : methods)
    if (s.method == m)
      return s;
  throw DomainError("report has no results for " + to_string(m));
}

SimulationReport run_study(const StudyConfig& c)
{
  validate(c);
  const auto t0 = std::chrono::steady_clock::now();
  const int d = generator_dim(c.generator);
  SimulationReport rep;
  rep.n = c.n;
  rep.replications = c.replications;
  rep.threshold = c.threshold ? *c.threshold : population_loss_quantile(c.generator, c.level);
  rep.truth = true_scenario(c.generator, rep.threshold, c.truth_optimizer);

  const auto r_count = static_cast<std::size_t>(c.replications);
  const auto m_count = c.methods.size();
  struct Cell {
    std::optional<Eigen::VectorXd> estimate;
    std::string error;
  };
  std::vector<std::vector<Cell>> cells(r_count, std::vector<Cell>(m_count));
  const std::size_t workers = resolve_workers(c.workers);
  const auto g = [&](const Eigen::VectorXd& x) { return true_loss(c.generator, x); };

  parallel_for(r_count, workers, [&](std::size_t j) {
    std::mt19937_64 rng(c.seed + j);
    const auto sample = generate(c.generator, c.n, rng);
    OptimizerConfig opt = c.optimizer;
    opt.seed = c.optimizer.seed + j;
    PipelineConfig pc = c.pipeline;
    if (workers > 1) {
      opt.workers = 1;
      pc.vine.workers = 1;
    }
    std::optional<ScenarioProblem> problem;
    std::string fit_error;
    for (std::size_t k = 0; k < m_count; ++k) {
      auto& cell = cells[j][k];
      try {
        const Method m = c.methods[k];
        if (m == Method::gkk) {
          cell.estimate = estimate_gkk(sample.x, sample.loss, rep.threshold).m_hat;
          continue;
        }
        if (!problem && fit_error.empty()) {
          try {
            problem = make_problem(sample.x, sample.loss, rep.threshold, pc);
          } catch (const Error& e) {
            fit_error = std::string("fit: ") + e.what();
          }
        }
        if (!problem)
          throw EstimationError(fit_error);
        switch (m) {
        case Method::cm1:
          cell.estimate = estimate_cm1(*problem, opt).m_hat;
          break;
        case Method::cm2:
          cell.estimate = estimate_cm2(*problem, opt).m_hat;
          break;
        case Method::cm3:
          cell.estimate = estimate_cm3(*problem, opt).m_hat;
          break;
        case Method::cm_star:
          cell.estimate = estimate_cm_star(*problem, g, opt).m_hat;
          break;
        case Method::gkk:
          break;
        }
      } catch (const Error& e) {
        cell.error = e.what();
      }
    }
  });

  for (std::size_t k = 0; k < m_count; ++k) {
    MethodSummary s;
    s.method = c.methods[k];
    std::vector<Eigen::VectorXd> ok;
    for (std::size_t j = 0; j < r_count; ++j) {
      if (cells[j][k].estimate) {
        ok.push_back(*cells[j][k].estimate);
      } else {
        ++s.failures;
        s.failure_messages.push_back("replication " + std::to_string(j) + ": " +
                                     cells[j][k].error);
      }
    }
    s.successes = static_cast<int>(ok.size());
    s.estimates.resize(s.successes, d);
    std::vector<double> losses;
    for (int i = 0; i < s.successes; ++i) {
      s.estimates.row(i) = ok[i].transpose();
      losses.push_back(g(ok[i]));
    }
    for (int j = 0; j < d; ++j) {
      const std::vector<double> col(s.estimates.col(j).data(),
                                    s.estimates.col(j).data() + s.successes);
      s.mpe.push_back(mpe(col, rep.truth(j)));
      s.rmspe.push_back(rmspe(col, rep.truth(j)));
    }
    s.ml2 = ml2(s.estimates, rep.truth);
    s.e_r = exceedance_rate(losses, rep.threshold);
    rep.methods.push_back(std::move(s));
  }
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::string format_report_table(const SimulationReport& r)
{
  std::ostringstream os;
  const int d = static_cast<int>(r.truth.size());
  os << "threshold " << std::setprecision(6) << r.threshold << ", true scenario (";
  for (int j = 0; j < d; ++j)
    os << (j ? ", " : "") << std::setprecision(6) << r.truth(j);
  os << "), n = " << r.n << ", r = " << r.replications << "\n";
  os << std::left << std::setw(8) << "method";
  for (int j = 0; j < d; ++j)
    os << std::right << std::setw(11) << ("MPE X" + std::to_string(j + 1));
  for (int j = 0; j < d; ++j)
    os << std::setw(11) << ("RMSPE X" + std::to_string(j + 1));
  os << std::setw(11) << "ML2x100" << std::setw(9) << "E_r" << std::setw(8) << "fail" << "\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& s : r.methods) {
    os << std::left << std::setw(8) << to_string(s.method) << std::right;
    for (double v : s.mpe)
      os << std::setw(11) << v;
    for (double v : s.rmspe)
      os << std::setw(11) << v;
    os << std::setw(11) << 100.0 * s.ml2 << std::setw(9) << std::setprecision(1) << s.e_r
       << std::setw(8) << s.failures << std::setprecision(3) << "\n";
  }
  return os.str();
}

} // namespace vinestress

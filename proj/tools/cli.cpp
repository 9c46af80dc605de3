#include "cli.hpp"

#include <vinestress/config.hpp>
#include <vinestress/dataset.hpp>
#include <vinestress/errors.hpp>
#include <vinestress/plot.hpp>
#include <vinestress/regimes.hpp>
#include <vinestress/resample.hpp>
#include <vinestress/scenario.hpp>
#include <vinestress/serialize.hpp>
#include <vinestress/simstudy.hpp>

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

namespace vinestress::cli {

namespace {

// Per-stage seeds are derived from the single --seed with a splitmix64 step
// so that stages do not share random streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage)
{
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stage + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum Stage : std::uint64_t { kOptimizer = 1, kBootstrap = 2, kGenerate = 3 };

void emit(const std::string& path, const std::string& text, std::ostream& out)
{
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw InputError("cannot write '" + path + "'");
  f << text;
  if (!f)
    throw InputError("failed writing '" + path + "'");
}

std::string fixed(double v, int digits)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width)
{
  if (s.size() < width)
    s.append(width - s.size(), ' ');
  return s;
}

// Command-line defaults for the scenario optimizer; lighter than the library
// defaults, overridable with optimizer.* keys in --config.
OptimizerConfig cli_optimizer()
{
  OptimizerConfig c;
  c.restarts = 4;
  c.iterations = 1500;
  c.patience = 150;
  c.tolerance = 1e-12;
  return c;
}

struct Settings {
  PipelineConfig pipeline;
  OptimizerConfig optimizer = cli_optimizer();
};

Settings load_settings(const std::string& path, int columns, std::uint64_t seed,
                       std::size_t workers)
{
  Settings s;
  if (!path.empty()) {
    const auto kv = KeyValueConfig::load(path);
    s.pipeline = pipeline_from_config(kv, columns);
    s.optimizer = optimizer_from_config(kv, "optimizer", s.optimizer);
    kv.require_all_used();
  }
  s.optimizer.seed = derive_seed(seed, kOptimizer);
  s.optimizer.workers = workers;
  s.pipeline.vine.workers = workers;
  return s;
}

// Threshold from --threshold, else the empirical (1 - p) quantile of losses.
struct ThresholdChoice {
  std::optional<double> level;
  std::optional<double> value;
};

double resolve_threshold(const ThresholdChoice& t, const Dataset& d)
{
  if (t.value)
    return *t.value;
  if (!t.level)
    throw InputError("give --level p or --threshold l");
  if (!(*t.level > 0.0 && *t.level < 1.0))
    throw InputError("--level must lie in (0, 1)");
  return empirical_quantile(std::span<const double>(d.losses.data(), d.size()), 1.0 - *t.level);
}

void add_threshold_options(CLI::App* app, ThresholdChoice& t)
{
  auto* lvl = app->add_option("--level", t.level, "Risk level p; threshold is the (1-p) loss quantile");
  auto* thr = app->add_option("--threshold", t.value, "Absolute loss threshold");
  lvl->excludes(thr);
}

Method parse_data_method(const std::string& name)
{
  const auto m = method_from_string(name);
  if (m == Method::cm_star)
    throw InputError("cm* needs the true loss map and is only available in simulate-study");
  return m;
}

// ---------------------------------------------------------------------------

struct Globals {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::size_t workers = 1;
};

int cmd_ingest(const std::string& rates, const std::string& values, const std::string& output,
               std::ostream& out)
{
  const auto d = ingest(read_csv_table_file(rates), read_csv_table_file(values));
  std::ostringstream os;
  write_dataset(os, d);
  emit(output, os.str(), out);
  return kOk;
}

struct GenerateArgs {
  std::string config;
  int dim = 0;
  double rho = 0.4;
  double nu = 4.0;
  std::size_t n = 3000;
  std::string start = "2010-01-01";
  std::string output;
};

int cmd_generate(const GenerateArgs& a, const Globals& g, std::ostream& out)
{
  GeneratorSpec spec;
  if (!a.config.empty()) {
    auto kv = KeyValueConfig::load(a.config);
    spec = study_from_config(kv).generator;
  } else if (a.dim >= 1) {
    if (!(a.rho > -1.0 / a.dim && a.rho < 1.0) || !(a.nu > 2.0))
      throw InputError("--rho must lie in (-1/d, 1) and --nu above 2");
    BivariateTSpec t;
    t.nu = a.nu;
    t.sigma = Eigen::MatrixXd::Constant(a.dim, a.dim, a.rho);
    t.sigma.diagonal().setOnes();
    t.w = Eigen::VectorXd::Constant(a.dim, 1.0 / a.dim);
    spec = t;
  } else {
    throw InputError("generate needs --config or --dim");
  }
  if (a.n < 2)
    throw InputError("-n must be at least 2");
  int y = 0, m = 0, day = 0;
  if (std::sscanf(a.start.c_str(), "%4d-%2d-%2d", &y, &m, &day) != 3)
    throw InputError("--start must be YYYY-MM-DD");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok())
    throw InputError("--start is not a calendar date");

  std::mt19937_64 rng(derive_seed(g.seed, kGenerate));
  const auto s = generate(spec, a.n, rng);
  Dataset d;
  d.factors = s.x;
  d.losses = s.loss;
  for (Eigen::Index j = 0; j < s.x.cols(); ++j)
    d.names.push_back("x" + std::to_string(j + 1));
  std::chrono::sys_days day0{ymd};
  for (std::size_t i = 0; i < a.n; ++i) {
    const std::chrono::year_month_day t{day0 + std::chrono::days{static_cast<int>(i)}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(t.year()),
                  static_cast<unsigned>(t.month()), static_cast<unsigned>(t.day()));
    d.dates.emplace_back(buf);
  }
  std::ostringstream os;
  write_dataset(os, d);
  emit(a.output, os.str(), out);
  return kOk;
}

int cmd_fit_marginals(const std::string& data, const std::string& spec_path,
                      const std::string& output, std::ostream& out)
{
  const auto d = load_dataset(data);
  MarginalSpec spec;
  if (!spec_path.empty()) {
    const auto kv = KeyValueConfig::load(spec_path);
    spec = marginal_spec_from_config(kv);
    kv.require_all_used();
    for (const auto& [name, kind] : spec.per_column) {
      (void)kind;
      if (name != "loss" && std::find(d.names.begin(), d.names.end(), name) == d.names.end())
        throw InputError(spec_path + ": no column named '" + name + "'");
    }
  }
  MarginalSet set;
  set.names = d.names;
  set.names.push_back("loss");
  for (std::size_t j = 0; j < set.names.size(); ++j) {
    const Eigen::VectorXd col =
        j < d.names.size() ? Eigen::VectorXd(d.factors.col(static_cast<Eigen::Index>(j))) : d.losses;
    set.models.push_back(fit_marginal(std::span<const double>(col.data(), d.size()),
                                      spec.kind_for(set.names[j]), spec.q_lo, spec.q_hi));
  }
  emit(output, dump(json(set)), out);
  return kOk;
}

int cmd_fit_vine(const std::string& data, const std::string& marginals, const std::string& config,
                 const std::string& output, const std::string& listing, const Globals& g,
                 std::ostream& out, std::ostream& err)
{
  const auto d = load_dataset(data);
  const auto set = json_as<MarginalSet>(read_json_file(marginals), marginals);
  if (set.models.size() != static_cast<std::size_t>(d.dim()) + 1)
    throw InputError(marginals + ": expected " + std::to_string(d.dim() + 1) + " marginals, found " +
                     std::to_string(set.models.size()));
  for (int j = 0; j < d.dim(); ++j)
    if (set.names[static_cast<std::size_t>(j)] != d.names[static_cast<std::size_t>(j)])
      throw InputError(marginals + ": column " + std::to_string(j + 1) + " is '" +
                       set.names[static_cast<std::size_t>(j)] + "', data has '" +
                       d.names[static_cast<std::size_t>(j)] + "'");
  const auto s = load_settings(config, d.dim() + 1, g.seed, g.workers);
  const auto v = fit_vine_with_marginals(d.factors, d.losses, set.models, s.pipeline);
  json j;
  j["names"] = set.names;
  j["vine"] = v;
  emit(output, dump(j), out);
  const auto text = tree_listing(v.model, set.names);
  if (!listing.empty())
    emit(listing, text, out);
  else
    (output.empty() || output == "-" ? err : out) << text;
  return kOk;
}

int cmd_dependence(const std::string& data, double q, const std::string& output, std::ostream& out)
{
  const auto d = load_dataset(data);
  if (!(q > 0.5 && q < 1.0))
    throw InputError("--tail-quantile must lie in (0.5, 1)");
  std::size_t width = 6;
  for (const auto& n : d.names)
    width = std::max(width, n.size() + 2);
  std::ostringstream table;
  table << pad("factor", width) << "     tau  lambda_U\n";
  json rows = json::array();
  const std::span<const double> l(d.losses.data(), d.size());
  for (int j = 0; j < d.dim(); ++j) {
    const Eigen::VectorXd c = d.factors.col(j);
    const auto s = dependence_summary(std::span<const double>(c.data(), d.size()), l, q);
    table << pad(d.names[static_cast<std::size_t>(j)], width) << pad(fixed(s.kendall_tau, 4), 8)
          << std::string(s.kendall_tau < 0 ? 1 : 2, ' ') << fixed(s.upper_tail_dep, 4) << "\n";
    json r = s;
    r["factor"] = d.names[static_cast<std::size_t>(j)];
    rows.push_back(r);
  }
  out << table.str();
  if (!output.empty())
    emit(output, dump(json{{"dependence", rows}}), out);
  return kOk;
}

struct ClusterArgs {
  std::string data;
  std::string kernel = "gaussian";
  double bandwidth = 0.0;
  std::string output;
  std::string summary;
};

int cmd_cluster(const ClusterArgs& a, const Globals& g, std::ostream& out, std::ostream& err)
{
  const auto d = load_dataset(a.data);
  KernelSpec k;
  if (a.kernel == "linear")
    k.type = KernelType::linear;
  else if (a.kernel == "gaussian")
    k.type = KernelType::gaussian;
  else
    throw InputError("--kernel must be linear or gaussian");
  k.bandwidth = a.bandwidth;
  MixtureFitOptions opts;
  opts.workers = g.workers;
  const auto r = cluster_regimes(d.factors, d.losses, k, opts);
  std::ostringstream csv;
  write_assignment_csv(csv, r.assignment);
  emit(a.output, csv.str(), out);
  json s = r.fit;
  s["n"] = d.size();
  if (!a.summary.empty())
    emit(a.summary, dump(s), out);
  err << "pi=" << fixed(r.fit.params.pi, 4) << " rho1=" << fixed(r.fit.params.rho1, 4)
      << " rho2=" << fixed(r.fit.params.rho2, 4) << " nu1=" << fixed(r.fit.params.nu1, 2)
      << " nu2=" << fixed(r.fit.params.nu2, 2) << (r.fit.near_boundary ? " (near boundary)" : "")
      << "\n";
  return kOk;
}

struct EstimateArgs {
  std::string data;
  std::string method = "cm3";
  ThresholdChoice threshold;
  std::string config;
  std::string model;
  std::string output;
};

int cmd_estimate(const EstimateArgs& a, const Globals& g, std::ostream& out)
{
  const auto d = load_dataset(a.data);
  const auto m = parse_data_method(a.method);
  const double l = resolve_threshold(a.threshold, d);
  const auto s = load_settings(a.config, d.dim() + 1, g.seed, g.workers);
  ScenarioEstimate e;
  if (m == Method::gkk) {
    e = estimate_gkk(d.factors, d.losses, l);
  } else {
    ScenarioProblem p;
    if (!a.model.empty()) {
      const auto j = read_json_file(a.model);
      p.model = json_as<LeafConstrainedVine>(j.contains("vine") ? j.at("vine") : j, a.model);
      if (p.model.predictors() != d.dim() || p.model.model.marginals.empty())
        throw InputError(a.model + ": model does not match the data dimension or lacks marginals");
    } else {
      p.model = fit_joint_model(d.factors, d.losses, s.pipeline);
    }
    p.threshold = l;
    p.bounds = search_bounds(d.factors);
    switch (m) {
    case Method::cm1: e = estimate_cm1(p, s.optimizer); break;
    case Method::cm2: e = estimate_cm2(p, s.optimizer); break;
    default: e = estimate_cm3(p, s.optimizer); break;
    }
  }
  json j = e;
  if (a.threshold.level)
    j["level"] = *a.threshold.level;
  j["factors"] = d.names;
  j["n"] = d.size();
  emit(a.output, dump(j), out);
  return kOk;
}

struct BootstrapArgs {
  std::string data;
  std::string method = "cm3";
  ThresholdChoice threshold;
  std::string config;
  int replications = 500;
  double block = 0.0;
  double ci_level = 0.95;
  double max_failures = 0.2;
  bool freeze = false;
  std::string output;
};

int cmd_bootstrap(const BootstrapArgs& a, const Globals& g, std::ostream& out)
{
  const auto d = load_dataset(a.data);
  const auto m = parse_data_method(a.method);
  const double l = resolve_threshold(a.threshold, d);
  const auto s = load_settings(a.config, d.dim() + 1, g.seed, g.workers);
  ScenarioBootstrapConfig cfg;
  cfg.method = m;
  cfg.pipeline = s.pipeline;
  cfg.optimizer = s.optimizer;
  cfg.optimizer.workers = 1;
  cfg.freeze_structure = a.freeze;
  cfg.workers = g.workers;
  BootstrapPlan plan;
  plan.n = d.size();
  plan.replications = a.replications;
  plan.mean_block = a.block;
  plan.level = a.ci_level;
  plan.max_failure_fraction = a.max_failures;
  plan.seed = derive_seed(g.seed, kBootstrap);
  try {
    validate(plan);
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
  const auto r = bootstrap_scenario_ci(d.factors, d.losses, l, cfg, plan);

  std::size_t width = 6;
  for (const auto& n : d.names)
    width = std::max(width, n.size() + 2);
  std::ostringstream table;
  table << to_string(m) << " scenario at threshold " << l << ", " << r.effective << "/"
        << r.replications << " replications, " << fixed(100 * r.level, 1) << "% intervals\n";
  table << pad("factor", width) << pad("lower", 16) << pad("estimate", 16) << "upper\n";
  for (std::size_t j = 0; j < r.components.size(); ++j) {
    char row[128];
    std::snprintf(row, sizeof row, "%-15.6g %-15.6g %.6g", r.components[j].lower,
                  r.components[j].point, r.components[j].upper);
    table << pad(d.names[j], width) << row << "\n";
  }
  json j = r;
  j["method"] = to_string(m);
  j["threshold"] = l;
  if (a.threshold.level)
    j["risk_level"] = *a.threshold.level;
  j["mean_block"] = plan.effective_mean_block();
  j["factors"] = d.names;
  if (a.output.empty() || a.output == "-") {
    out << dump(j);
  } else {
    emit(a.output, dump(j), out);
    out << table.str();
  }
  return kOk;
}

struct StudyArgs {
  std::string config;
  std::optional<int> replications;
  std::optional<std::size_t> n;
  std::string output;
};

int cmd_study(const StudyArgs& a, const Globals& g, std::ostream& out)
{
  const auto kv = KeyValueConfig::load(a.config);
  auto c = study_from_config(kv);
  kv.require_all_used();
  if (g.seed_given)
    c.seed = g.seed;
  if (a.replications)
    c.replications = *a.replications;
  if (a.n)
    c.n = *a.n;
  c.workers = g.workers;
  try {
    validate(c);
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
  const auto r = run_study(c);
  out << format_report_table(r);
  if (!a.output.empty())
    emit(a.output, dump(json(r)), out);
  return kOk;
}

struct PlotArgs {
  std::string data;
  std::vector<std::string> estimates;
  ThresholdChoice threshold;
  int columns = 3;
  std::string output;
};

int cmd_plot(const PlotArgs& a, std::ostream& out)
{
  const auto d = load_dataset(a.data);
  ScatterPlotSpec s;
  s.names = d.names;
  s.factors = d.factors;
  s.losses = d.losses;
  s.columns = a.columns;
  for (const auto& path : a.estimates) {
    const auto j = read_json_file(path);
    ScenarioMarker mk;
    try {
      mk.label = j.at("method").get<std::string>();
      const auto& sc = j.at("scenario");
      mk.point.resize(static_cast<Eigen::Index>(sc.size()));
      for (std::size_t i = 0; i < sc.size(); ++i)
        mk.point(static_cast<Eigen::Index>(i)) =
            sc[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : sc[i].get<double>();
      if (!s.threshold && j.contains("threshold") && j["threshold"].is_number())
        s.threshold = j["threshold"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ": not a scenario estimate (" + e.what() + ")");
    }
    s.markers.push_back(std::move(mk));
  }
  if (a.threshold.value || a.threshold.level)
    s.threshold = resolve_threshold(a.threshold, d);
  emit(a.output, scatter_svg(s), out);
  return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Stress scenarios from vine copula models of risk factors and portfolio losses",
               "vinestress"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed from which every random stream derives");
  app.add_option("--workers", g.workers, "Worker threads (0 = all cores); results do not depend on it");

  std::string rates, values, output;
  auto* ingest_cmd = app.add_subcommand("ingest", "Rates and portfolio values to a dataset CSV");
  ingest_cmd->add_option("rates", rates, "CSV: date, one rate column per factor")->required();
  ingest_cmd->add_option("values", values, "CSV: date, portfolio value")->required();
  ingest_cmd->add_option("-o,--output", output, "Dataset CSV (default stdout)");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Synthetic dataset from a study generator");
  gen_cmd->add_option("--config", gen.config, "Study config whose generator is used");
  gen_cmd->add_option("--dim", gen.dim, "Equicorrelated Student t factors with equal loss weights");
  gen_cmd->add_option("--rho", gen.rho, "Correlation for --dim");
  gen_cmd->add_option("--nu", gen.nu, "Degrees of freedom for --dim");
  gen_cmd->add_option("-n", gen.n, "Rows");
  gen_cmd->add_option("--start", gen.start, "First date (YYYY-MM-DD)");
  gen_cmd->add_option("-o,--output", gen.output, "Dataset CSV (default stdout)");

  std::string data, spec, marginals, config, listing;
  auto* fm_cmd = app.add_subcommand("fit-marginals", "Per-column skew-t or hybrid marginals");
  fm_cmd->add_option("data", data, "Dataset CSV")->required();
  fm_cmd->add_option("--spec", spec, "Marginal choices (key = value file)");
  fm_cmd->add_option("-o,--output", output, "Marginals JSON (default stdout)");

  auto* fv_cmd = app.add_subcommand("fit-vine", "Leaf-constrained R-vine given marginals");
  fv_cmd->add_option("data", data, "Dataset CSV")->required();
  fv_cmd->add_option("marginals", marginals, "Marginals JSON from fit-marginals")->required();
  fv_cmd->add_option("--config", config, "pipeline.* settings");
  fv_cmd->add_option("-o,--output", output, "Model JSON (default stdout)");
  fv_cmd->add_option("--listing", listing, "Tree listing file (default: printed)");

  double tail_q = 0.95;
  auto* dep_cmd = app.add_subcommand("dependence", "Kendall tau and upper tail dependence vs loss");
  dep_cmd->add_option("data", data, "Dataset CSV")->required();
  dep_cmd->add_option("--tail-quantile", tail_q, "Quantile for the tail dependence estimate");
  dep_cmd->add_option("-o,--output", output, "Also write JSON here");

  ClusterArgs cl;
  auto* cl_cmd = app.add_subcommand("cluster", "Two-regime t-copula mixture on a kernel-PCA score");
  cl_cmd->add_option("data", cl.data, "Dataset CSV")->required();
  cl_cmd->add_option("--kernel", cl.kernel, "linear | gaussian");
  cl_cmd->add_option("--bandwidth", cl.bandwidth, "Gaussian kernel bandwidth (0 = median distance)");
  cl_cmd->add_option("-o,--output", cl.output, "Assignment CSV (default stdout)");
  cl_cmd->add_option("--summary", cl.summary, "Mixture fit JSON");

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate", "Stress scenario for a loss threshold");
  est_cmd->add_option("data", est.data, "Dataset CSV")->required();
  est_cmd->add_option("--method", est.method, "cm1 | cm2 | cm3 | gkk")->required();
  add_threshold_options(est_cmd, est.threshold);
  est_cmd->add_option("--config", est.config, "pipeline.* and optimizer.* settings");
  est_cmd->add_option("--model", est.model, "Model JSON from fit-vine instead of refitting");
  est_cmd->add_option("-o,--output", est.output, "Estimate JSON (default stdout)");

  BootstrapArgs bs;
  auto* bs_cmd = app.add_subcommand("bootstrap-ci", "Stationary-bootstrap intervals for a scenario");
  bs_cmd->add_option("data", bs.data, "Dataset CSV")->required();
  bs_cmd->add_option("--method", bs.method, "cm1 | cm2 | cm3 | gkk")->required();
  add_threshold_options(bs_cmd, bs.threshold);
  bs_cmd->add_option("-B,--replications", bs.replications, "Bootstrap replications");
  bs_cmd->add_option("--block", bs.block, "Mean block length (0 = n^(1/3))");
  bs_cmd->add_option("--ci-level", bs.ci_level, "Interval coverage");
  bs_cmd->add_option("--max-failures", bs.max_failures, "Tolerated fraction of failed replications");
  bs_cmd->add_flag("--freeze-structure", bs.freeze, "Reuse the fitted predictor-vine structure");
  bs_cmd->add_option("--config", bs.config, "pipeline.* and optimizer.* settings");
  bs_cmd->add_option("-o,--output", bs.output, "Interval JSON; the table is then printed");

  StudyArgs st;
  auto* st_cmd = app.add_subcommand("simulate-study", "Monte Carlo comparison of the estimators");
  st_cmd->add_option("config", st.config, "Study config")->required();
  st_cmd->add_option("--replications", st.replications, "Override the config");
  st_cmd->add_option("-n", st.n, "Override the sample size");
  st_cmd->add_option("-o,--output", st.output, "Report JSON");

  PlotArgs pl;
  auto* pl_cmd = app.add_subcommand("plot", "SVG scatter of each factor against the loss");
  pl_cmd->add_option("data", pl.data, "Dataset CSV")->required();
  pl_cmd->add_option("--estimate", pl.estimates, "Estimate JSON files to mark (repeatable)");
  add_threshold_options(pl_cmd, pl.threshold);
  pl_cmd->add_option("--columns", pl.columns, "Panels per row");
  pl_cmd->add_option("-o,--output", pl.output, "SVG file (default stdout)");

  std::vector<std::string> storage{"vinestress"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage)
    argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUserError;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (*ingest_cmd)
      return cmd_ingest(rates, values, output, out);
    if (*gen_cmd)
      return cmd_generate(gen, g, out);
    if (*fm_cmd)
      return cmd_fit_marginals(data, spec, output, out);
    if (*fv_cmd)
      return cmd_fit_vine(data, marginals, config, output, listing, g, out, err);
    if (*dep_cmd)
      return cmd_dependence(data, tail_q, output, out);
    if (*cl_cmd)
      return cmd_cluster(cl, g, out, err);
    if (*est_cmd)
      return cmd_estimate(est, g, out);
    if (*bs_cmd)
      return cmd_bootstrap(bs, g, out);
    if (*st_cmd)
      return cmd_study(st, g, out);
    if (*pl_cmd)
      return cmd_plot(pl, out);
  } catch (const Error& e) {
    err << "vinestress: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    err << "vinestress: internal error: " << e.what() << "\n";
    return kInternalError;
  }
  err << "vinestress: no subcommand\n";
  return kUserError;
}

} // namespace vinestress::cli

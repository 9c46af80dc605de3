#include "vinestress/config.hpp"

#include "vinestress/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vinestress {

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(s);
  while (std::getline(is, cell, sep))
    out.push_back(trim(cell));
  return out;
}

std::vector<std::string> words(const std::string& s)
{
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w)
    out.push_back(w);
  return out;
}

double to_double(const std::string& s, const std::string& where)
{
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && *first == '+')
    ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw InputError(where + ": '" + s + "' is not a number");
  return v;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source)
{
  KeyValueConfig c;
  c.source_ = source;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(source + ":" + std::to_string(no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty())
      throw InputError(source + ":" + std::to_string(no) + ": empty key");
    c.values_[key] = trim(line.substr(eq + 1));
  }
  return c;
}

KeyValueConfig KeyValueConfig::load(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open config '" + path + "'");
  return parse(in, path);
}

bool KeyValueConfig::has(const std::string& key) const
{
  return values_.count(key) > 0;
}

std::string KeyValueConfig::get_string(const std::string& key) const
{
  const auto it = values_.find(key);
  if (it == values_.end())
    throw InputError(source_ + ": missing key '" + key + "'");
  used_.insert(key);
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const
{
  return has(key) ? get_string(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key) const
{
  return to_double(get_string(key), source_ + ": " + key);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const
{
  return has(key) ? get_double(key) : fallback;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const
{
  if (!has(key))
    return fallback;
  const auto s = get_string(key);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw InputError(source_ + ": " + key + ": '" + s + "' is not an integer");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const
{
  if (!has(key))
    return fallback;
  const auto s = get_string(key);
  if (s == "true" || s == "yes" || s == "1" || s == "on")
    return true;
  if (s == "false" || s == "no" || s == "0" || s == "off")
    return false;
  throw InputError(source_ + ": " + key + ": '" + s + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const
{
  std::vector<double> out;
  for (const auto& c : split(get_string(key), ','))
    out.push_back(to_double(c, source_ + ": " + key));
  return out;
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const
{
  auto out = split(get_string(key), ',');
  std::erase_if(out, [](const std::string& s) { return s.empty(); });
  return out;
}

std::vector<std::string> KeyValueConfig::keys_with_prefix(const std::string& prefix) const
{
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (k.rfind(prefix, 0) == 0)
      out.push_back(k);
  return out;
}

void KeyValueConfig::set(const std::string& key, const std::string& value)
{
  values_[key] = value;
}

void KeyValueConfig::require_all_used() const
{
  std::string unknown;
  for (const auto& [k, v] : values_)
    if (!used_.count(k))
      unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty())
    throw InputError(source_ + ": unknown keys: " + unknown);
}

// ---------------------------------------------------------------------------

OptimizerConfig optimizer_from_config(const KeyValueConfig& kv, const std::string& prefix,
                                      OptimizerConfig c)
{
  const auto k = [&](const char* name) { return prefix + "." + name; };
  c.population_size = static_cast<int>(kv.get_int(k("population"), c.population_size));
  c.iterations = static_cast<int>(kv.get_int(k("iterations"), c.iterations));
  c.restarts = static_cast<int>(kv.get_int(k("restarts"), c.restarts));
  c.seed = static_cast<std::uint64_t>(kv.get_int(k("seed"), static_cast<long>(c.seed)));
  c.weight = kv.get_double(k("weight"), c.weight);
  c.crossover = kv.get_double(k("crossover"), c.crossover);
  c.tolerance = kv.get_double(k("tolerance"), c.tolerance);
  c.patience = static_cast<int>(kv.get_int(k("patience"), c.patience));
  c.polish = kv.get_bool(k("polish"), c.polish);
  c.workers = static_cast<std::size_t>(kv.get_int(k("workers"), static_cast<long>(c.workers)));
  validate(c);
  return c;
}

PipelineConfig pipeline_from_config(const KeyValueConfig& kv, int columns)
{
  PipelineConfig p;
  if (kv.has("pipeline.marginals")) {
    const auto names = kv.get_list("pipeline.marginals");
    if (names.size() == 1) {
      p.marginals.assign(static_cast<std::size_t>(columns), marginal_kind_from_string(names[0]));
    } else if (static_cast<int>(names.size()) == columns) {
      for (const auto& n : names)
        p.marginals.push_back(marginal_kind_from_string(n));
    } else {
      throw InputError(kv.source() + ": pipeline.marginals needs 1 or " +
                       std::to_string(columns) + " entries");
    }
  }
  p.hybrid_q_lo = kv.get_double("pipeline.hybrid_q_lo", p.hybrid_q_lo);
  p.hybrid_q_hi = kv.get_double("pipeline.hybrid_q_hi", p.hybrid_q_hi);
  if (kv.has("pipeline.families")) {
    p.vine.families.clear();
    for (const auto& f : kv.get_list("pipeline.families"))
      p.vine.families.push_back(family_from_string(f));
  }
  if (kv.has("pipeline.criterion")) {
    const auto c = kv.get_string("pipeline.criterion");
    if (c == "aic")
      p.vine.criterion = Criterion::aic;
    else if (c == "bic")
      p.vine.criterion = Criterion::bic;
    else
      throw InputError(kv.source() + ": pipeline.criterion must be aic or bic");
  }
  p.vine.independence_level = kv.get_double("pipeline.independence_level", p.vine.independence_level);
  p.rank_pseudo_obs = kv.get_bool("pipeline.rank_pseudo_obs", p.rank_pseudo_obs);
  return p;
}

MarginalKind MarginalSpec::kind_for(const std::string& column) const
{
  const auto it = per_column.find(column);
  return it == per_column.end() ? default_kind : it->second;
}

MarginalSpec marginal_spec_from_config(const KeyValueConfig& kv)
{
  MarginalSpec s;
  if (kv.has("default"))
    s.default_kind = marginal_kind_from_string(kv.get_string("default"));
  for (const auto& k : kv.keys_with_prefix("marginal."))
    s.per_column[k.substr(9)] = marginal_kind_from_string(kv.get_string(k));
  s.q_lo = kv.get_double("hybrid.q_lo", s.q_lo);
  s.q_hi = kv.get_double("hybrid.q_hi", s.q_hi);
  if (!(0.0 < s.q_lo && s.q_lo < s.q_hi && s.q_hi < 1.0))
    throw InputError(kv.source() + ": need 0 < hybrid.q_lo < hybrid.q_hi < 1");
  return s;
}

namespace {

std::pair<int, int> parse_pair(const std::string& s, const std::string& where)
{
  const auto dash = s.find('-');
  if (dash == std::string::npos)
    throw InputError(where + ": expected 'i-j', got '" + s + "'");
  const double a = to_double(trim(s.substr(0, dash)), where);
  const double b = to_double(trim(s.substr(dash + 1)), where);
  if (a != std::floor(a) || b != std::floor(b) || a < 1 || b < 1)
    throw InputError(where + ": indices are positive integers (1-based)");
  return {static_cast<int>(a) - 1, static_cast<int>(b) - 1};
}

BivariateCopula parse_copula(const std::string& s, const std::string& where)
{
  const auto w = words(s);
  if (w.empty())
    throw InputError(where + ": empty copula specification");
  BivariateCopula c;
  c.family = family_from_string(w[0]);
  std::vector<double> pars;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i].rfind("rot=", 0) == 0)
      c.rotation = static_cast<int>(to_double(w[i].substr(4), where));
    else
      pars.push_back(to_double(w[i], where));
  }
  if (static_cast<int>(pars.size()) != parameter_count(c.family))
    throw InputError(where + ": " + w[0] + " takes " + std::to_string(parameter_count(c.family)) +
                     " parameter(s)");
  for (std::size_t i = 0; i < pars.size(); ++i)
    c.par[i] = pars[i];
  try {
    validate(c);
  } catch (const DomainError& e) {
    throw InputError(where + ": " + e.what());
  }
  return c;
}

} // namespace

MetaVineSpec meta_vine_from_config(const KeyValueConfig& kv)
{
  const int d = static_cast<int>(kv.get_int("vine.dim", 0));
  if (d < 2)
    throw InputError(kv.source() + ": vine.dim must be at least 2");
  MetaVineSpec s;
  const auto type = kv.get_string("vine.type", "cvine");
  if (type == "cvine" || type == "dvine") {
    std::vector<int> order(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      order[j] = j;
    if (kv.has("vine.order")) {
      const auto o = kv.get_doubles("vine.order");
      if (static_cast<int>(o.size()) != d)
        throw InputError(kv.source() + ": vine.order needs " + std::to_string(d) + " entries");
      for (int j = 0; j < d; ++j)
        order[j] = static_cast<int>(o[j]) - 1;
    }
    s.model.structure = type == "cvine" ? cvine_structure(order) : dvine_structure(order);
  } else if (type == "pairs") {
    std::vector<std::vector<std::pair<int, int>>> trees;
    for (int k = 1; k < d; ++k) {
      const auto key = "vine.tree." + std::to_string(k);
      std::vector<std::pair<int, int>> t;
      for (const auto& p : kv.get_list(key))
        t.push_back(parse_pair(p, kv.source() + ": " + key));
      trees.push_back(std::move(t));
    }
    s.model.structure = structure_from_pairs(d, trees);
  } else {
    throw InputError(kv.source() + ": vine.type must be cvine, dvine or pairs");
  }
  require_valid(s.model.structure);

  for (const auto& tree : s.model.structure.trees) {
    std::vector<BivariateCopula> cops;
    for (const auto& e : tree) {
      const auto key1 = "vine.copula." + std::to_string(e.a + 1) + "-" + std::to_string(e.b + 1);
      const auto key2 = "vine.copula." + std::to_string(e.b + 1) + "-" + std::to_string(e.a + 1);
      if (kv.has(key1))
        cops.push_back(parse_copula(kv.get_string(key1), kv.source() + ": " + key1));
      else if (kv.has(key2))
        cops.push_back(parse_copula(kv.get_string(key2), kv.source() + ": " + key2));
      else
        cops.push_back(BivariateCopula::independence());
    }
    s.model.copulas.push_back(std::move(cops));
  }
  for (int j = 0; j < d; ++j) {
    const auto key = "marginal." + std::to_string(j + 1);
    const auto w = words(kv.get_string(key));
    if (w.size() != 5 || w[0] != "skew_t")
      throw InputError(kv.source() + ": " + key + " must read 'skew_t mu sigma alpha beta'");
    SkewTParams p{to_double(w[1], key), to_double(w[2], key), to_double(w[3], key),
                  to_double(w[4], key)};
    try {
      validate(p);
    } catch (const DomainError& e) {
      throw InputError(kv.source() + ": " + key + ": " + e.what());
    }
    s.model.marginals.emplace_back(p);
  }
  const auto g = kv.get_doubles("g");
  if (static_cast<int>(g.size()) != d)
    throw InputError(kv.source() + ": g needs " + std::to_string(d) + " coefficients");
  s.g = Eigen::Map<const Eigen::VectorXd>(g.data(), d);
  return s;
}

namespace {

BivariateTSpec t_from_config(const KeyValueConfig& kv)
{
  BivariateTSpec s;
  s.nu = kv.get_double("t.nu", s.nu);
  if (kv.has("t.sigma")) {
    const auto rows = split(kv.get_string("t.sigma"), ';');
    const auto d = static_cast<Eigen::Index>(rows.size());
    s.sigma.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto cells = split(rows[i], ',');
      if (static_cast<Eigen::Index>(cells.size()) != d)
        throw InputError(kv.source() + ": t.sigma must be square (rows separated by ';')");
      for (Eigen::Index j = 0; j < d; ++j)
        s.sigma(i, j) = to_double(cells[j], kv.source() + ": t.sigma");
    }
  } else if (kv.has("t.equicorrelation")) {
    const auto d = kv.get_int("t.dim", 2);
    const double r = kv.get_double("t.equicorrelation");
    s.sigma = Eigen::MatrixXd::Constant(d, d, r);
    s.sigma.diagonal().setOnes();
  }
  if (kv.has("t.weights")) {
    const auto w = kv.get_doubles("t.weights");
    s.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  } else if (s.sigma.rows() != 2) {
    s.w = Eigen::VectorXd::Constant(s.sigma.rows(), 1.0 / static_cast<double>(s.sigma.rows()));
  }
  try {
    validate(GeneratorSpec(s));
  } catch (const DomainError& e) {
    throw InputError(kv.source() + ": " + e.what());
  }
  return s;
}

} // namespace

StudyConfig study_from_config(const KeyValueConfig& kv)
{
  StudyConfig c;
  const auto gen = kv.get_string("generator", "bivariate_t");
  if (gen == "bivariate_t" || gen == "t")
    c.generator = t_from_config(kv);
  else if (gen == "meta_vine")
    c.generator = meta_vine_from_config(kv);
  else
    throw InputError(kv.source() + ": generator must be bivariate_t or meta_vine");
  c.n = static_cast<std::size_t>(kv.get_int("n", static_cast<long>(c.n)));
  c.replications = static_cast<int>(kv.get_int("replications", c.replications));
  if (kv.has("threshold"))
    c.threshold = kv.get_double("threshold");
  c.level = kv.get_double("level", c.level);
  if (kv.has("methods")) {
    c.methods.clear();
    for (const auto& m : kv.get_list("methods"))
      c.methods.push_back(method_from_string(m));
  }
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long>(c.seed)));
  c.workers = static_cast<std::size_t>(kv.get_int("workers", static_cast<long>(c.workers)));
  c.optimizer = optimizer_from_config(kv, "optimizer", c.optimizer);
  c.truth_optimizer = optimizer_from_config(kv, "truth", c.truth_optimizer);
  c.pipeline = pipeline_from_config(kv, generator_dim(c.generator) + 1);
  try {
    validate(c);
  } catch (const DomainError& e) {
    throw InputError(kv.source() + ": " + e.what());
  }
  return c;
}

} // namespace vinestress

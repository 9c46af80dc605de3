#include "vinestress/serialize.hpp"

#include "vinestress/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace vinestress {

namespace {

json vec(const Eigen::VectorXd& v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(v(i));
  return a;
}

Eigen::VectorXd to_vec(const json& a)
{
  const auto v = a.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat(const Eigen::MatrixXd& m)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    a.push_back(vec(m.row(i).transpose()));
  return a;
}

// NaN and infinities have no JSON literal; they are written as null.
json num(double x)
{
  return std::isfinite(x) ? json(x) : json(nullptr);
}

const char* side_name(TailSide s)
{
  return s == TailSide::lower ? "lower" : "upper";
}

void tail_to_json(json& j, const GpdTail& t)
{
  j = json{{"side", side_name(t.side)},
           {"threshold", t.threshold},
           {"scale", t.scale},
           {"shape", t.shape},
           {"tail_mass", t.tail_mass}};
}

GpdTail tail_from_json(const json& j)
{
  GpdTail t;
  const auto side = j.at("side").get<std::string>();
  if (side != "lower" && side != "upper")
    throw InputError("tail side must be lower or upper");
  t.side = side == "lower" ? TailSide::lower : TailSide::upper;
  t.threshold = j.at("threshold").get<double>();
  t.scale = j.at("scale").get<double>();
  t.shape = j.at("shape").get<double>();
  t.tail_mass = j.at("tail_mass").get<double>();
  return t;
}

} // namespace

void to_json(json& j, const SkewTParams& p)
{
  j = json{{"mu", p.mu}, {"sigma", p.sigma}, {"alpha", p.alpha}, {"beta", p.beta}};
}

void from_json(const json& j, SkewTParams& p)
{
  p.mu = j.at("mu").get<double>();
  p.sigma = j.at("sigma").get<double>();
  p.alpha = j.at("alpha").get<double>();
  p.beta = j.at("beta").get<double>();
  validate(p);
}

void to_json(json& j, const HybridMarginal& h)
{
  json lower, upper;
  tail_to_json(lower, h.lower);
  tail_to_json(upper, h.upper);
  j = json{{"core",
            {{"lower", h.core.lower},
             {"upper", h.core.upper},
             {"bandwidth", h.core.bandwidth},
             {"cdf_nodes", h.core.cdf_nodes},
             {"pdf_nodes", h.core.pdf_nodes}}},
           {"lower_tail", lower},
           {"upper_tail", upper}};
}

void from_json(const json& j, HybridMarginal& h)
{
  const auto& c = j.at("core");
  h.core.lower = c.at("lower").get<double>();
  h.core.upper = c.at("upper").get<double>();
  h.core.bandwidth = c.at("bandwidth").get<double>();
  h.core.cdf_nodes = c.at("cdf_nodes").get<std::vector<double>>();
  h.core.pdf_nodes = c.at("pdf_nodes").get<std::vector<double>>();
  if (h.core.cdf_nodes.size() < 2 || h.core.cdf_nodes.size() != h.core.pdf_nodes.size() ||
      !(h.core.lower < h.core.upper))
    throw InputError("malformed hybrid marginal core");
  h.lower = tail_from_json(j.at("lower_tail"));
  h.upper = tail_from_json(j.at("upper_tail"));
}

void to_json(json& j, const MarginalModel& m)
{
  if (const auto* p = std::get_if<SkewTParams>(&m.variant())) {
    j = json{{"kind", "skew_t"}, {"params", *p}};
  } else {
    j = json{{"kind", "hybrid"}, {"params", std::get<HybridMarginal>(m.variant())}};
  }
}

void from_json(const json& j, MarginalModel& m)
{
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "skew_t")
    m = MarginalModel(j.at("params").get<SkewTParams>());
  else if (kind == "hybrid")
    m = MarginalModel(j.at("params").get<HybridMarginal>());
  else
    throw InputError("unknown marginal kind '" + kind + "'");
}

void to_json(json& j, const BivariateCopula& c)
{
  json par = json::array();
  for (int i = 0; i < parameter_count(c.family); ++i)
    par.push_back(c.par[static_cast<std::size_t>(i)]);
  j = json{{"family", to_string(c.family)},
           {"rotation", c.rotation},
           {"parameters", par},
           {"loglik", c.loglik},
           {"nobs", c.nobs}};
}

void from_json(const json& j, BivariateCopula& c)
{
  c = BivariateCopula{};
  c.family = family_from_string(j.at("family").get<std::string>());
  c.rotation = j.value("rotation", 0);
  const auto par = j.at("parameters").get<std::vector<double>>();
  if (static_cast<int>(par.size()) != parameter_count(c.family))
    throw InputError("copula " + to_string(c.family) + " expects " +
                     std::to_string(parameter_count(c.family)) + " parameters");
  for (std::size_t i = 0; i < par.size(); ++i)
    c.par[i] = par[i];
  c.loglik = j.value("loglik", 0.0);
  c.nobs = j.value("nobs", std::size_t{0});
  validate(c);
}

void to_json(json& j, const RVineStructure& s)
{
  json trees = json::array();
  for (const auto& tree : s.trees) {
    json t = json::array();
    for (const auto& e : tree)
      t.push_back(json{{"a", e.a}, {"b", e.b}, {"cond", e.cond}, {"left", e.left},
                       {"right", e.right}});
    trees.push_back(t);
  }
  j = json{{"dim", s.dim}, {"trees", trees}};
}

void from_json(const json& j, RVineStructure& s)
{
  s = RVineStructure{};
  s.dim = j.at("dim").get<int>();
  for (const auto& t : j.at("trees")) {
    std::vector<VineEdge> tree;
    for (const auto& e : t) {
      VineEdge edge;
      edge.a = e.at("a").get<int>();
      edge.b = e.at("b").get<int>();
      edge.cond = e.at("cond").get<std::vector<int>>();
      edge.left = e.value("left", -1);
      edge.right = e.value("right", -1);
      tree.push_back(std::move(edge));
    }
    s.trees.push_back(std::move(tree));
  }
  const auto problems = validate_structure(s);
  if (!problems.empty())
    throw InputError("invalid vine structure: " + problems.front());
}

void to_json(json& j, const RVineModel& m)
{
  j = json{{"structure", m.structure}, {"copulas", m.copulas}, {"marginals", m.marginals}};
}

void from_json(const json& j, RVineModel& m)
{
  m.structure = j.at("structure").get<RVineStructure>();
  m.copulas = j.at("copulas").get<std::vector<std::vector<BivariateCopula>>>();
  m.marginals = j.value("marginals", std::vector<MarginalModel>{});
  bool shape_ok = m.copulas.size() == m.structure.trees.size();
  for (std::size_t k = 0; shape_ok && k < m.copulas.size(); ++k)
    shape_ok = m.copulas[k].size() == m.structure.trees[k].size();
  if (!shape_ok)
    throw InputError("copula lists do not match the vine structure");
  if (!m.marginals.empty() && static_cast<int>(m.marginals.size()) != m.structure.dim)
    throw InputError("marginal count does not match the vine dimension");
}

void to_json(json& j, const LeafConstrainedVine& v)
{
  j = json{{"model", v.model}, {"y_edges", v.y_edges}};
}

void from_json(const json& j, LeafConstrainedVine& v)
{
  v.model = j.at("model").get<RVineModel>();
  v.y_edges = j.at("y_edges").get<std::vector<int>>();
  const int d = v.model.dim();
  if (d < 2 || static_cast<int>(v.y_edges.size()) != d - 1)
    throw InputError("y_edges must list one edge per tree");
  for (std::size_t k = 0; k < v.y_edges.size(); ++k) {
    const int e = v.y_edges[k];
    if (e < 0 || e >= static_cast<int>(v.model.structure.trees[k].size()))
      throw InputError("y_edges index out of range");
    const auto& edge = v.model.structure.trees[k][static_cast<std::size_t>(e)];
    if (edge.a != d - 1 && edge.b != d - 1)
      throw InputError("y_edges entry does not touch the response variable");
  }
}

void to_json(json& j, const DependenceSummary& d)
{
  j = json{{"kendall_tau", d.kendall_tau},
           {"upper_tail_dependence", d.upper_tail_dep},
           {"tail_quantile", d.tail_quantile_used}};
}

void to_json(json& j, const OptimizerDiagnostics& d)
{
  j = json{{"restarts", d.restarts},
           {"iterations", d.iterations},
           {"evaluations", d.evaluations},
           {"converged", d.converged},
           {"restart_values", json::array()}};
  for (double v : d.restart_values)
    j["restart_values"].push_back(num(v));
}

void to_json(json& j, const ScenarioEstimate& e)
{
  j = json{{"method", to_string(e.method)},
           {"scenario", vec(e.m_hat)},
           {"threshold", e.threshold},
           {"fitted_loss", num(e.fitted_loss)},
           {"objective_value", num(e.objective_value)},
           {"diagnostics", e.diagnostics}};
}

void to_json(json& j, const BootstrapResult& r)
{
  json comps = json::array();
  for (const auto& c : r.components)
    comps.push_back(json{{"lower", num(c.lower)}, {"point", num(c.point)}, {"upper", num(c.upper)}});
  j = json{{"level", r.level},
           {"replications", r.replications},
           {"effective", r.effective},
           {"failures", r.failures},
           {"intervals", comps},
           {"failure_messages", r.failure_messages}};
}

void to_json(json& j, const MixtureParams& p)
{
  j = json{{"pi", p.pi}, {"rho1", p.rho1}, {"rho2", p.rho2}, {"nu1", p.nu1}, {"nu2", p.nu2}};
}

void to_json(json& j, const MixtureFit& f)
{
  j = json{{"params", f.params},
           {"loglik", f.loglik},
           {"iterations", f.iterations},
           {"converged", f.converged},
           {"near_boundary", f.near_boundary}};
}

void to_json(json& j, const SimulationReport& r)
{
  json methods = json::array();
  for (const auto& m : r.methods) {
    json mpe = json::array(), rmspe = json::array();
    for (double v : m.mpe)
      mpe.push_back(num(v));
    for (double v : m.rmspe)
      rmspe.push_back(num(v));
    methods.push_back(json{{"method", to_string(m.method)},
                           {"mpe", mpe},
                           {"rmspe", rmspe},
                           {"ml2", num(m.ml2)},
                           {"exceedance_rate", num(m.e_r)},
                           {"successes", m.successes},
                           {"failures", m.failures},
                           {"failure_messages", m.failure_messages}});
  }
  // Runtime is left out so that reports stay byte-identical across runs.
  j = json{{"truth", vec(r.truth)},
           {"threshold", r.threshold},
           {"n", r.n},
           {"replications", r.replications},
           {"methods", methods}};
}

void to_json(json& j, const MarginalSet& s)
{
  j = json::object();
  json cols = json::array();
  for (std::size_t i = 0; i < s.models.size(); ++i) {
    json c = s.models[i];
    c["name"] = i < s.names.size() ? s.names[i] : "x" + std::to_string(i + 1);
    cols.push_back(c);
  }
  j["columns"] = cols;
}

void from_json(const json& j, MarginalSet& s)
{
  s = MarginalSet{};
  for (const auto& c : j.at("columns")) {
    s.names.push_back(c.at("name").get<std::string>());
    s.models.push_back(c.get<MarginalModel>());
  }
}

json read_json_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string dump(const json& j)
{
  return j.dump(2) + "\n";
}

void write_json_file(const std::string& path, const json& j)
{
  std::ofstream out(path);
  if (!out)
    throw InputError("cannot write '" + path + "'");
  out << dump(j);
}

std::string tree_listing(const RVineModel& m, const std::vector<std::string>& names)
{
  const auto label = [&](int v) {
    return static_cast<std::size_t>(v) < names.size() ? names[static_cast<std::size_t>(v)]
                                                       : std::to_string(v + 1);
  };
  std::ostringstream os;
  for (std::size_t k = 0; k < m.structure.trees.size(); ++k) {
    os << "Tree " << k + 1 << "\n";
    for (std::size_t e = 0; e < m.structure.trees[k].size(); ++e) {
      const auto& edge = m.structure.trees[k][e];
      os << "  " << label(edge.a) << "," << label(edge.b);
      if (!edge.cond.empty()) {
        os << " |";
        for (std::size_t c = 0; c < edge.cond.size(); ++c)
          os << (c ? "," : " ") << label(edge.cond[c]);
      }
      os << "  ";
      if (k < m.copulas.size() && e < m.copulas[k].size())
        os << m.copulas[k][e].str();
      os << "\n";
    }
  }
  return os.str();
}

} // namespace vinestress

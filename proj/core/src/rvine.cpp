#include "vinestress/rvine.hpp"

#include "dist.hpp"
#include "vinestress/errors.hpp"
#include "vinestress/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace vinestress {

std::size_t RVineStructure::edge_count() const
{
  std::size_t n = 0;
  for (const auto& t : trees)
    n += t.size();
  return n;
}

std::vector<int> edge_variables(const VineEdge& e)
{
  std::vector<int> s = e.cond;
  s.push_back(e.a);
  s.push_back(e.b);
  std::sort(s.begin(), s.end());
  return s;
}

namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(static_cast<std::size_t>(n))
  {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x)
  {
    while (parent[x] != x)
      x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b)
  {
    a = find(a);
    b = find(b);
    if (a == b)
      return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

std::vector<int> set_intersection(const std::vector<int>& a, const std::vector<int>& b)
{
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<int> set_difference(const std::vector<int>& a, const std::vector<int>& b)
{
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Edge of tree k built from two edges of tree k - 1, or nullopt when the
// parents violate the proximity condition.
std::optional<VineEdge> join_edges(const std::vector<VineEdge>& prev, int left, int right)
{
  const auto ul = edge_variables(prev[left]);
  const auto ur = edge_variables(prev[right]);
  auto cond = set_intersection(ul, ur);
  const auto da = set_difference(ul, ur);
  const auto db = set_difference(ur, ul);
  if (da.size() != 1 || db.size() != 1)
    return std::nullopt;
  VineEdge e;
  e.a = da[0];
  e.b = db[0];
  e.cond = std::move(cond);
  e.left = left;
  e.right = right;
  return e;
}

std::string edge_label(int tree, int idx, const VineEdge& e)
{
  std::ostringstream os;
  os << "tree " << tree + 1 << " edge " << idx << " [" << e.a << "," << e.b;
  if (!e.cond.empty()) {
    os << "|";
    for (std::size_t i = 0; i < e.cond.size(); ++i)
      os << (i ? "," : "") << e.cond[i];
  }
  os << "]";
  return os.str();
}

} // namespace

std::vector<std::string> validate_structure(const RVineStructure& s)
{
  std::vector<std::string> v;
  const int d = s.dim;
  if (d < 1) {
    v.push_back("dimension must be at least 1");
    return v;
  }
  if (static_cast<int>(s.trees.size()) != d - 1) {
    v.push_back("expected " + std::to_string(d - 1) + " trees, found " +
                std::to_string(s.trees.size()));
    return v;
  }
  for (int k = 0; k < d - 1; ++k) {
    const auto& tree = s.trees[k];
    const int expected = d - 1 - k;
    if (static_cast<int>(tree.size()) != expected) {
      v.push_back("tree " + std::to_string(k + 1) + " must have " + std::to_string(expected) +
                  " edges, found " + std::to_string(tree.size()));
      return v;
    }
    const int nodes = k == 0 ? d : static_cast<int>(s.trees[k - 1].size());
    DisjointSets ds(nodes);
    for (int i = 0; i < expected; ++i) {
      const auto& e = tree[i];
      int n1, n2;
      if (k == 0) {
        n1 = e.a;
        n2 = e.b;
        if (n1 < 0 || n1 >= d || n2 < 0 || n2 >= d || n1 == n2 || !e.cond.empty()) {
          v.push_back(edge_label(k, i, e) + ": first-tree edges join two distinct variables");
          continue;
        }
      } else {
        n1 = e.left;
        n2 = e.right;
        if (n1 < 0 || n1 >= nodes || n2 < 0 || n2 >= nodes || n1 == n2) {
          v.push_back(edge_label(k, i, e) + ": parents must be two distinct edges of tree " +
                      std::to_string(k));
          continue;
        }
        const auto& pl = s.trees[k - 1][n1];
        const auto& pr = s.trees[k - 1][n2];
        bool share;
        if (k == 1) {
          share = pl.a == pr.a || pl.a == pr.b || pl.b == pr.a || pl.b == pr.b;
        } else {
          share = pl.left == pr.left || pl.left == pr.right || pl.right == pr.left ||
                  pl.right == pr.right;
        }
        if (!share) {
          v.push_back(edge_label(k, i, e) + ": proximity condition violated (parent edges " +
                      std::to_string(n1) + " and " + std::to_string(n2) +
                      " share no node)");
          continue;
        }
        const auto joined = join_edges(s.trees[k - 1], n1, n2);
        auto cond = e.cond;
        std::sort(cond.begin(), cond.end());
        if (!joined || joined->a != e.a || joined->b != e.b || joined->cond != cond) {
          v.push_back(edge_label(k, i, e) +
                      ": conditioned/conditioning sets inconsistent with the parents");
          continue;
        }
      }
      if (!ds.unite(n1, n2))
        v.push_back(edge_label(k, i, e) + ": closes a cycle in tree " + std::to_string(k + 1));
    }
  }
  return v;
}

void require_valid(const RVineStructure& s)
{
  const auto v = validate_structure(s);
  if (v.empty())
    return;
  std::string msg = "invalid vine structure:";
  for (const auto& m : v)
    msg += "\n  " + m;
  throw DomainError(msg);
}

boost::multiprecision::cpp_int count_rvine_structures(int d)
{
  if (d < 2)
    throw DomainError("count_rvine_structures: d must be at least 2");
  boost::multiprecision::cpp_int f = 1;
  for (int i = 3; i <= d; ++i)
    f *= i;
  const int e = d >= 3 ? (d - 3) * (d - 2) / 2 : 0;
  return f << e;
}

RVineStructure structure_from_pairs(int dim,
                                    const std::vector<std::vector<std::pair<int, int>>>& trees)
{
  RVineStructure s;
  s.dim = dim;
  for (std::size_t k = 0; k < trees.size(); ++k) {
    std::vector<VineEdge> tree;
    for (std::size_t i = 0; i < trees[k].size(); ++i) {
      const auto [l, r] = trees[k][i];
      if (k == 0) {
        VineEdge e;
        e.a = l;
        e.b = r;
        tree.push_back(e);
      } else {
        const auto& prev = s.trees[k - 1];
        if (l < 0 || r < 0 || l >= static_cast<int>(prev.size()) ||
            r >= static_cast<int>(prev.size()))
          throw DomainError("structure_from_pairs: parent index out of range");
        auto e = join_edges(prev, l, r);
        if (!e)
          throw DomainError("structure_from_pairs: parents " + std::to_string(l) + " and " +
                            std::to_string(r) + " of tree " + std::to_string(k + 1) +
                            " violate the proximity condition");
        tree.push_back(*e);
      }
    }
    s.trees.push_back(std::move(tree));
  }
  return s;
}

RVineStructure cvine_structure(const std::vector<int>& order)
{
  const int d = static_cast<int>(order.size());
  std::vector<std::vector<std::pair<int, int>>> trees;
  if (d >= 2) {
    std::vector<std::pair<int, int>> t0;
    for (int j = 1; j < d; ++j)
      t0.emplace_back(order[0], order[j]);
    trees.push_back(t0);
  }
  for (int k = 1; k < d - 1; ++k) {
    std::vector<std::pair<int, int>> t;
    for (int j = k + 1; j < d; ++j)
      t.emplace_back(0, j - k);
    trees.push_back(t);
  }
  return structure_from_pairs(d, trees);
}

RVineStructure dvine_structure(const std::vector<int>& order)
{
  const int d = static_cast<int>(order.size());
  std::vector<std::vector<std::pair<int, int>>> trees;
  if (d >= 2) {
    std::vector<std::pair<int, int>> t0;
    for (int i = 0; i + 1 < d; ++i)
      t0.emplace_back(order[i], order[i + 1]);
    trees.push_back(t0);
  }
  for (int k = 1; k < d - 1; ++k) {
    std::vector<std::pair<int, int>> t;
    for (int i = 0; i + k + 1 < d; ++i)
      t.emplace_back(i, i + 1);
    trees.push_back(t);
  }
  return structure_from_pairs(d, trees);
}

double RVineModel::loglik() const
{
  double ll = 0.0;
  for (const auto& t : copulas)
    for (const auto& c : t)
      ll += c.loglik;
  return ll;
}

int RVineModel::parameter_count() const
{
  int k = 0;
  for (const auto& t : copulas)
    for (const auto& c : t)
      k += vinestress::parameter_count(c.family);
  return k;
}

// ---------------------------------------------------------------------------
// Flat evaluation plan

namespace {

// Edge inputs refer either to a variable (var >= 0) or to slot `slot` of the
// output pair of an earlier edge (flat index `edge`).
struct Source {
  int var = -1;
  int edge = -1;
  int slot = 0;
};

struct FlatEdge {
  int tree = 0;
  int a = 0, b = 0;
  Source src_a, src_b;
};

struct Plan {
  std::vector<FlatEdge> edges;
  std::vector<std::vector<int>> flat_index; // [tree][edge] -> flat
};

Source parent_source(const RVineStructure& s, const Plan& p, int tree, int parent, int var)
{
  const auto& pe = s.trees[tree - 1][parent];
  Source src;
  src.edge = p.flat_index[tree - 1][parent];
  // out slot 0 = F(a | b, D), slot 1 = F(b | a, D)
  src.slot = pe.a == var ? 0 : 1;
  return src;
}

Plan make_plan(const RVineStructure& s)
{
  Plan p;
  p.flat_index.resize(s.trees.size());
  for (std::size_t k = 0; k < s.trees.size(); ++k) {
    for (std::size_t i = 0; i < s.trees[k].size(); ++i) {
      const auto& e = s.trees[k][i];
      FlatEdge f;
      f.tree = static_cast<int>(k);
      f.a = e.a;
      f.b = e.b;
      if (k == 0) {
        f.src_a.var = e.a;
        f.src_b.var = e.b;
      } else {
        f.src_a = parent_source(s, p, static_cast<int>(k), e.left, e.a);
        f.src_b = parent_source(s, p, static_cast<int>(k), e.right, e.b);
      }
      p.flat_index[k].push_back(static_cast<int>(p.edges.size()));
      p.edges.push_back(f);
    }
  }
  return p;
}

inline double read_source(const Source& s, const double* u, const std::vector<double>& out)
{
  return s.var >= 0 ? u[s.var] : out[2 * s.edge + s.slot];
}

inline double clamp_vine(double x)
{
  return std::clamp(x, kVineClamp, 1.0 - kVineClamp);
}

std::vector<const BivariateCopula*> flat_copulas(const RVineModel& m)
{
  std::vector<const BivariateCopula*> c;
  for (const auto& t : m.copulas)
    for (const auto& e : t)
      c.push_back(&e);
  return c;
}

void check_model(const RVineModel& m)
{
  if (m.copulas.size() != m.structure.trees.size())
    throw DomainError("vine model: copula list does not match the structure");
  for (std::size_t k = 0; k < m.copulas.size(); ++k)
    if (m.copulas[k].size() != m.structure.trees[k].size())
      throw DomainError("vine model: copula list does not match tree " + std::to_string(k + 1));
}

// Log copula density; optionally restricted to edges for which keep(flat) is true.
template <class Keep>
double plan_log_density(const Plan& p, const std::vector<const BivariateCopula*>& cops,
                        const double* u, std::vector<double>& out, Keep keep)
{
  double ll = 0.0;
  out.assign(2 * p.edges.size(), 0.5);
  for (std::size_t i = 0; i < p.edges.size(); ++i) {
    if (!keep(i))
      continue;
    const auto& e = p.edges[i];
    const double ua = read_source(e.src_a, u, out);
    const double ub = read_source(e.src_b, u, out);
    const auto pv = bicop_evaluate(ua, ub, *cops[i]);
    ll += pv.log_density;
    out[2 * i] = clamp_vine(pv.h2);
    out[2 * i + 1] = clamp_vine(pv.h1);
  }
  return ll;
}

} // namespace

double rvine_copula_log_density(const Eigen::VectorXd& u, const RVineModel& m)
{
  check_model(m);
  if (u.size() != m.dim())
    throw DomainError("rvine density: point has the wrong dimension");
  const auto plan = make_plan(m.structure);
  const auto cops = flat_copulas(m);
  std::vector<double> out;
  Eigen::VectorXd uc = u.unaryExpr([](double x) { return clamp_vine(x); });
  return plan_log_density(plan, cops, uc.data(), out, [](std::size_t) { return true; });
}

double rvine_log_density(const Eigen::VectorXd& x, const RVineModel& m)
{
  if (static_cast<int>(m.marginals.size()) != m.dim())
    throw DomainError("rvine density: model has no marginals");
  if (x.size() != m.dim())
    throw DomainError("rvine density: point has the wrong dimension");
  Eigen::VectorXd u(x.size());
  double ll = 0.0;
  for (int j = 0; j < m.dim(); ++j) {
    ll += m.marginals[j].log_pdf(x(j));
    u(j) = m.marginals[j].pit(x(j));
  }
  if (!std::isfinite(ll))
    return -std::numeric_limits<double>::infinity();
  return ll + rvine_copula_log_density(u, m);
}

double rvine_density(const Eigen::VectorXd& x, const RVineModel& m)
{
  return std::exp(rvine_log_density(x, m));
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct EdgeData {
  std::vector<double> out_a; // F(a | b, D)
  std::vector<double> out_b; // F(b | a, D)
};

void check_uniform_data(const Eigen::MatrixXd& u)
{
  if (u.cols() < 2)
    throw FitError("vine fit: need at least two variables");
  if (u.rows() < 30)
    throw FitError("vine fit: need at least 30 observations");
  if (!((u.array() > 0.0).all() && (u.array() < 1.0).all()))
    throw FitError("vine fit: pseudo-observations must lie in (0, 1)");
}

std::vector<double> column(const Eigen::MatrixXd& u, int j)
{
  return std::vector<double>(u.col(j).data(), u.col(j).data() + u.rows());
}

const std::vector<double>& input_column(const RVineStructure& s, int tree, const VineEdge& e,
                                        bool side_a, const Eigen::MatrixXd& u,
                                        const std::vector<std::vector<EdgeData>>& data,
                                        std::vector<double>& scratch)
{
  const int var = side_a ? e.a : e.b;
  if (tree == 0) {
    scratch = column(u, var);
    return scratch;
  }
  const int parent = side_a ? e.left : e.right;
  const auto& pe = s.trees[tree - 1][parent];
  const auto& pd = data[tree - 1][parent];
  return pe.a == var ? pd.out_a : pd.out_b;
}

EdgeData transform(const std::vector<double>& ua, const std::vector<double>& ub,
                   const BivariateCopula& c)
{
  EdgeData d;
  d.out_a.resize(ua.size());
  d.out_b.resize(ua.size());
  for (std::size_t i = 0; i < ua.size(); ++i) {
    const auto pv = bicop_evaluate(ua[i], ub[i], c);
    d.out_a[i] = clamp_vine(pv.h2);
    d.out_b[i] = clamp_vine(pv.h1);
  }
  return d;
}

BivariateCopula select_edge(const std::vector<double>& ua, const std::vector<double>& ub,
                            const VineFitOptions& opts)
{
  SelectOptions so;
  so.criterion = opts.criterion;
  so.independence_level = opts.independence_level;
  return select_bicop(ua, ub, opts.families, so);
}

struct FitResult {
  RVineModel model;
  std::vector<std::vector<EdgeData>> data;
};

FitResult fit_internal(const Eigen::MatrixXd& u, const std::optional<RVineStructure>& fixed,
                       const VineFitOptions& opts)
{
  check_uniform_data(u);
  const int d = static_cast<int>(u.cols());
  if (fixed) {
    if (fixed->dim != d)
      throw FitError("vine fit: structure dimension does not match the data");
    require_valid(*fixed);
  }
  FitResult r;
  r.model.structure.dim = d;
  const std::size_t workers = resolve_workers(opts.workers);

  for (int k = 0; k < d - 1; ++k) {
    std::vector<VineEdge> tree;
    if (fixed) {
      tree = fixed->trees[k];
    } else {
      std::vector<WeightedPair> cand;
      if (k == 0) {
        for (int i = 0; i < d; ++i)
          for (int j = i + 1; j < d; ++j)
            cand.push_back({std::abs(empirical_tau(column(u, i), column(u, j))), i, j});
      } else {
        const auto& prev = r.model.structure.trees[k - 1];
        const int m = static_cast<int>(prev.size());
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < m; ++i)
          for (int j = i + 1; j < m; ++j)
            if (join_edges(prev, i, j))
              pairs.emplace_back(i, j);
        std::vector<double> w(pairs.size());
        parallel_for(pairs.size(), workers, [&](std::size_t p) {
          const auto e = *join_edges(prev, pairs[p].first, pairs[p].second);
          std::vector<double> sa, sb;
          const auto& ua = input_column(r.model.structure, k, e, true, u, r.data, sa);
          const auto& ub = input_column(r.model.structure, k, e, false, u, r.data, sb);
          w[p] = std::abs(empirical_tau(ua, ub));
        });
        for (std::size_t p = 0; p < pairs.size(); ++p)
          cand.push_back({w[p], pairs[p].first, pairs[p].second});
      }
      const int nodes = k == 0 ? d : d - k;
      const auto chosen = maximum_spanning_tree(nodes, std::move(cand));
      for (const auto& [i, j] : chosen) {
        if (k == 0) {
          VineEdge e;
          e.a = i;
          e.b = j;
          tree.push_back(e);
        } else {
          tree.push_back(*join_edges(r.model.structure.trees[k - 1], i, j));
        }
      }
    }
    r.model.structure.trees.push_back(tree);

    std::vector<BivariateCopula> cops(tree.size());
    std::vector<EdgeData> data(tree.size());
    parallel_for(tree.size(), workers, [&](std::size_t i) {
      std::vector<double> sa, sb;
      const auto& ua = input_column(r.model.structure, k, tree[i], true, u, r.data, sa);
      const auto& ub = input_column(r.model.structure, k, tree[i], false, u, r.data, sb);
      cops[i] = select_edge(ua, ub, opts);
      if (k + 1 < d - 1)
        data[i] = transform(ua, ub, cops[i]);
    });
    r.model.copulas.push_back(std::move(cops));
    r.data.push_back(std::move(data));
  }
  return r;
}

} // namespace

std::vector<std::pair<int, int>> maximum_spanning_tree(int nodes,
                                                       std::vector<WeightedPair> candidates)
{
  std::sort(candidates.begin(), candidates.end(), [](const auto& x, const auto& y) {
    if (x.weight != y.weight)
      return x.weight > y.weight;
    return std::make_pair(x.i, x.j) < std::make_pair(y.i, y.j);
  });
  DisjointSets ds(nodes);
  std::vector<std::pair<int, int>> chosen;
  for (const auto& c : candidates) {
    if (c.i < 0 || c.j < 0 || c.i >= nodes || c.j >= nodes)
      throw DomainError("maximum_spanning_tree: node index out of range");
    if (static_cast<int>(chosen.size()) == nodes - 1)
      break;
    if (ds.unite(c.i, c.j))
      chosen.emplace_back(std::min(c.i, c.j), std::max(c.i, c.j));
  }
  if (static_cast<int>(chosen.size()) != nodes - 1)
    throw FitError("maximum_spanning_tree: candidate graph is disconnected");
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

RVineStructure select_structure(const Eigen::MatrixXd& u, const VineFitOptions& opts)
{
  if (u.cols() == 1) {
    RVineStructure s;
    s.dim = 1;
    return s;
  }
  return fit_internal(u, std::nullopt, opts).model.structure;
}

RVineModel fit_rvine(const Eigen::MatrixXd& u, const std::optional<RVineStructure>& structure,
                     const VineFitOptions& opts)
{
  return fit_internal(u, structure, opts).model;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

struct SampleStep {
  int var = 0;
  // chain[k] = (tree k, index) of the edge joining var to an earlier variable
  std::vector<int> chain;
};

std::vector<SampleStep> sampling_plan(const RVineStructure& s)
{
  const int d = s.dim;
  std::vector<std::vector<bool>> active(s.trees.size());
  for (std::size_t k = 0; k < s.trees.size(); ++k)
    active[k].assign(s.trees[k].size(), true);
  std::vector<bool> var_left(static_cast<std::size_t>(d), true);
  std::vector<SampleStep> reversed;

  for (int m = d; m >= 2; --m) {
    const int top = m - 2;
    int top_edge = -1;
    for (std::size_t i = 0; i < s.trees[top].size(); ++i)
      if (active[top][i])
        top_edge = static_cast<int>(i);
    if (top_edge < 0)
      throw DomainError("sampling order: structure is not a regular vine");
    bool done = false;
    for (int var : {s.trees[top][top_edge].a, s.trees[top][top_edge].b}) {
      SampleStep step;
      step.var = var;
      bool ok = true;
      for (int k = 0; k <= top && ok; ++k) {
        int found = -1, count = 0;
        for (std::size_t i = 0; i < s.trees[k].size(); ++i) {
          if (!active[k][i])
            continue;
          const auto& e = s.trees[k][i];
          if (e.a == var || e.b == var) {
            found = static_cast<int>(i);
            ++count;
          }
        }
        ok = count == 1;
        step.chain.push_back(found);
      }
      if (!ok)
        continue;
      for (int k = 0; k <= top; ++k)
        active[k][step.chain[k]] = false;
      var_left[var] = false;
      reversed.push_back(step);
      done = true;
      break;
    }
    if (!done)
      throw DomainError("sampling order: structure is not a regular vine");
  }
  SampleStep first;
  first.var = static_cast<int>(std::find(var_left.begin(), var_left.end(), true) - var_left.begin());
  reversed.push_back(first);
  std::reverse(reversed.begin(), reversed.end());
  return reversed;
}

} // namespace

std::vector<int> sampling_order(const RVineStructure& s)
{
  require_valid(s);
  std::vector<int> order;
  for (const auto& st : sampling_plan(s))
    order.push_back(st.var);
  return order;
}

Eigen::MatrixXd rvine_simulate_uniform(const RVineModel& m, std::size_t n, std::uint64_t seed)
{
  check_model(m);
  require_valid(m.structure);
  const int d = m.dim();
  const auto steps = sampling_plan(m.structure);
  const auto plan = make_plan(m.structure);
  const auto cops = flat_copulas(m);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  std::vector<double> u(static_cast<std::size_t>(d)), vals(2 * plan.edges.size(), 0.5);
  std::vector<double> w(static_cast<std::size_t>(d));

  for (std::size_t row = 0; row < n; ++row) {
    for (int j = 0; j < d; ++j)
      w[j] = clamp_vine(unif(rng));
    for (std::size_t j = 0; j < steps.size(); ++j) {
      const auto& st = steps[j];
      double p = w[j];
      for (int k = static_cast<int>(st.chain.size()) - 1; k >= 0; --k) {
        const int f = plan.flat_index[k][st.chain[k]];
        const auto& e = plan.edges[f];
        if (e.b == st.var)
          p = bicop_hinv1(p, read_source(e.src_a, u.data(), vals), *cops[f]);
        else
          p = bicop_hinv2(p, read_source(e.src_b, u.data(), vals), *cops[f]);
        p = clamp_vine(p);
      }
      u[st.var] = p;
      for (std::size_t k = 0; k < st.chain.size(); ++k) {
        const int f = plan.flat_index[k][st.chain[k]];
        const auto& e = plan.edges[f];
        const double ua = read_source(e.src_a, u.data(), vals);
        const double ub = read_source(e.src_b, u.data(), vals);
        vals[2 * f] = clamp_vine(bicop_hfunc2(ua, ub, *cops[f]));
        vals[2 * f + 1] = clamp_vine(bicop_hfunc1(ua, ub, *cops[f]));
      }
    }
    for (int j = 0; j < d; ++j)
      out(static_cast<Eigen::Index>(row), j) = u[j];
  }
  return out;
}

Eigen::MatrixXd rvine_simulate(const RVineModel& m, std::size_t n, std::uint64_t seed)
{
  if (static_cast<int>(m.marginals.size()) != m.dim())
    throw DomainError("rvine_simulate: model has no marginals");
  Eigen::MatrixXd x = rvine_simulate_uniform(m, n, seed);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int j = 0; j < m.dim(); ++j)
      x(i, j) = m.marginals[j].quantile(x(i, j));
  return x;
}

// ---------------------------------------------------------------------------
// Leaf-constrained vine

LeafConstrainedVine build_leaf_constrained(const Eigen::MatrixXd& ux, const Eigen::VectorXd& uy,
                                           const std::optional<RVineStructure>& x_structure,
                                           const VineFitOptions& opts)
{
  const int d = static_cast<int>(ux.cols());
  if (d < 1)
    throw FitError("leaf-constrained vine: need at least one predictor");
  if (uy.size() != ux.rows())
    throw FitError("leaf-constrained vine: predictor and response lengths differ");
  Eigen::MatrixXd all(ux.rows(), d + 1);
  all.leftCols(d) = ux;
  all.col(d) = uy;
  check_uniform_data(all);

  FitResult xfit;
  if (d >= 2) {
    xfit = fit_internal(ux, x_structure, opts);
  } else {
    xfit.model.structure.dim = 1;
  }
  // The predictor vine also needs conditional pseudo-observations of its last
  // tree, which fit_internal skips.
  if (d >= 2) {
    const int k = d - 2;
    auto& tree = xfit.model.structure.trees[k];
    xfit.data[k].resize(tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
      std::vector<double> sa, sb;
      const auto& ua = input_column(xfit.model.structure, k, tree[i], true, ux, xfit.data, sa);
      const auto& ub = input_column(xfit.model.structure, k, tree[i], false, ux, xfit.data, sb);
      xfit.data[k][i] = transform(ua, ub, xfit.model.copulas[k][i]);
    }
  }

  LeafConstrainedVine v;
  auto& s = v.model.structure;
  s.dim = d + 1;
  s.trees = xfit.model.structure.trees;
  s.trees.resize(static_cast<std::size_t>(d));
  v.model.copulas = xfit.model.copulas;
  v.model.copulas.resize(static_cast<std::size_t>(d));

  auto normal_scores = [](const std::vector<double>& x) {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      z[i] = dist::normal_quantile(clamp_vine(x[i]));
    return z;
  };
  auto abs_corr = [](const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    return saa > 0 && sbb > 0 ? std::abs(sab / std::sqrt(saa * sbb)) : 0.0;
  };

  std::vector<double> y_in(uy.data(), uy.data() + uy.size()); // F(Y | D_k)
  int prev_partner_edge = -1; // X-edge joined by the previous Y-edge (tree k - 1)
  int partner_var = -1;
  for (int k = 0; k < d; ++k) {
    VineEdge ye;
    std::vector<double> xa;
    if (k == 0) {
      const auto zy = normal_scores(y_in);
      double best = -1;
      for (int j = 0; j < d; ++j) {
        const double c = abs_corr(normal_scores(column(ux, j)), zy);
        if (c > best) {
          best = c;
          partner_var = j;
        }
      }
      ye.a = partner_var;
      ye.b = d;
      xa = column(ux, partner_var);
    } else {
      const auto& prev_x = s.trees[k - 1];
      const int y_prev = static_cast<int>(prev_x.size()) - 1; // Y-edge is last
      const auto zy = normal_scores(y_in);
      double best = -1;
      int best_edge = -1;
      std::vector<double> best_in;
      for (int i = 0; i < y_prev; ++i) {
        const auto& e = prev_x[i];
        const bool feasible = k == 1 ? (e.a == partner_var || e.b == partner_var)
                                     : (e.left == prev_partner_edge || e.right == prev_partner_edge);
        if (!feasible)
          continue;
        auto cand = join_edges(prev_x, i, y_prev);
        if (!cand)
          continue;
        const auto& ed = xfit.data[k - 1][i];
        const auto& in = e.a == cand->a ? ed.out_a : ed.out_b;
        const double c = abs_corr(normal_scores(in), zy);
        if (c > best) {
          best = c;
          best_edge = i;
          best_in = in;
        }
      }
      if (best_edge < 0)
        throw FitError("leaf-constrained vine: no proximity-feasible node in tree " +
                       std::to_string(k + 1));
      ye = *join_edges(prev_x, best_edge, y_prev);
      prev_partner_edge = best_edge;
      xa = std::move(best_in);
    }
    const auto cop = select_edge(xa, y_in, opts);
    s.trees[k].push_back(ye);
    v.model.copulas[k].push_back(cop);
    v.y_edges.push_back(static_cast<int>(s.trees[k].size()) - 1);
    if (k + 1 < d) {
      std::vector<double> next(y_in.size());
      for (std::size_t i = 0; i < next.size(); ++i)
        next[i] = clamp_vine(bicop_hfunc1(xa[i], y_in[i], cop));
      y_in = std::move(next);
    }
  }
  require_valid(s);
  return v;
}

namespace {

// Inputs F(a_k | D_k) on the predictor side of every Y-edge.
std::vector<double> y_chain_inputs(const Eigen::VectorXd& ux, const LeafConstrainedVine& v)
{
  const int d = v.predictors();
  if (ux.size() != d)
    throw DomainError("vine regression: predictor vector has the wrong dimension");
  check_model(v.model);
  const auto plan = make_plan(v.model.structure);
  const auto cops = flat_copulas(v.model);
  std::vector<double> u(static_cast<std::size_t>(d + 1), 0.5);
  for (int j = 0; j < d; ++j)
    u[j] = clamp_vine(ux(j));
  std::vector<bool> is_y(plan.edges.size(), false);
  for (int k = 0; k < d; ++k)
    is_y[plan.flat_index[k][v.y_edges[k]]] = true;
  std::vector<double> out;
  plan_log_density(plan, cops, u.data(), out, [&](std::size_t i) { return !is_y[i]; });
  std::vector<double> xa(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    const auto& e = plan.edges[plan.flat_index[k][v.y_edges[k]]];
    xa[k] = read_source(e.src_a, u.data(), out);
  }
  return xa;
}

const BivariateCopula& y_copula(const LeafConstrainedVine& v, int k)
{
  return v.model.copulas[k][v.y_edges[k]];
}

} // namespace

double conditional_cdf_uniform(double uy, const Eigen::VectorXd& ux, const LeafConstrainedVine& v)
{
  const auto xa = y_chain_inputs(ux, v);
  double w = clamp_vine(uy);
  for (int k = 0; k < v.predictors(); ++k)
    w = clamp_vine(bicop_hfunc1(xa[k], w, y_copula(v, k)));
  return w;
}

double conditional_cdf(double y, const Eigen::VectorXd& x, const LeafConstrainedVine& v)
{
  const int d = v.predictors();
  if (static_cast<int>(v.model.marginals.size()) != d + 1)
    throw DomainError("conditional_cdf: model has no marginals");
  Eigen::VectorXd ux(d);
  for (int j = 0; j < d; ++j)
    ux(j) = v.model.marginals[j].pit(x(j));
  const double uy = v.model.marginals[d].cdf(y);
  if (uy <= 0.0)
    return 0.0;
  if (uy >= 1.0)
    return 1.0;
  return conditional_cdf_uniform(uy, ux, v);
}

double conditional_median_uniform(const Eigen::VectorXd& ux, const LeafConstrainedVine& v)
{
  const auto xa = y_chain_inputs(ux, v);
  double w = 0.5;
  for (int k = v.predictors() - 1; k >= 0; --k)
    w = bicop_hinv1(w, xa[k], y_copula(v, k));
  return w;
}

double vine_regression_predict(const Eigen::VectorXd& x, const LeafConstrainedVine& v)
{
  const int d = v.predictors();
  if (static_cast<int>(v.model.marginals.size()) != d + 1)
    throw DomainError("vine_regression_predict: model has no marginals");
  Eigen::VectorXd ux(d);
  for (int j = 0; j < d; ++j)
    ux(j) = v.model.marginals[j].pit(x(j));
  const double w = conditional_median_uniform(ux, v);
  if (!(w >= 1e-6 && w <= 1.0 - 1e-6)) {
    std::ostringstream os;
    os << "vine_regression_predict: conditional median PIT " << w
       << " outside [1e-6, 1 - 1e-6]";
    throw PredictionError(os.str());
  }
  return v.model.marginals[d].quantile(w);
}

double predictor_log_density(const Eigen::VectorXd& x, const LeafConstrainedVine& v)
{
  const int d = v.predictors();
  if (static_cast<int>(v.model.marginals.size()) != d + 1)
    throw DomainError("predictor_log_density: model has no marginals");
  if (x.size() != d)
    throw DomainError("predictor_log_density: point has the wrong dimension");
  std::vector<double> u(static_cast<std::size_t>(d + 1), 0.5);
  double ll = 0.0;
  for (int j = 0; j < d; ++j) {
    ll += v.model.marginals[j].log_pdf(x(j));
    u[j] = v.model.marginals[j].pit(x(j));
  }
  if (!std::isfinite(ll))
    return -std::numeric_limits<double>::infinity();
  const auto plan = make_plan(v.model.structure);
  const auto cops = flat_copulas(v.model);
  std::vector<bool> is_y(plan.edges.size(), false);
  for (int k = 0; k < d; ++k)
    is_y[plan.flat_index[k][v.y_edges[k]]] = true;
  std::vector<double> out;
  return ll + plan_log_density(plan, cops, u.data(), out, [&](std::size_t i) { return !is_y[i]; });
}

RVineStructure predictor_structure(const LeafConstrainedVine& v)
{
  const auto& full = v.model.structure;
  const int d = v.predictors();
  if (static_cast<int>(v.y_edges.size()) != d)
    throw DomainError("predictor_structure: one Y edge per tree expected");
  RVineStructure s;
  s.dim = d;
  for (int k = 0; k + 1 < d; ++k) {
    const int removed = v.y_edges[k];
    const int removed_below = k > 0 ? v.y_edges[k - 1] : -1;
    auto shift = [&](int i) { return removed_below >= 0 && i > removed_below ? i - 1 : i; };
    std::vector<VineEdge> tree;
    for (int e = 0; e < static_cast<int>(full.trees[k].size()); ++e) {
      if (e == removed)
        continue;
      VineEdge edge = full.trees[k][e];
      if (k > 0) {
        if (edge.left == removed_below || edge.right == removed_below)
          throw DomainError("predictor_structure: predictor edge depends on a Y edge");
        edge.left = shift(edge.left);
        edge.right = shift(edge.right);
      }
      tree.push_back(edge);
    }
    s.trees.push_back(std::move(tree));
  }
  require_valid(s);
  return s;
}

} // namespace vinestress

#pragma once

#include "vinestress/bicop.hpp"
#include "vinestress/univariate.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vinestress {

//! One edge [a, b | cond] of a vine tree.
//!
//! In the first tree `a` and `b` are variables and the parents are unused.
//! In tree k >= 1 the edge joins edges `left` and `right` of tree k - 1;
//! `a` comes from the left parent and `b` from the right one.
struct VineEdge {
  int a = 0;
  int b = 0;
  std::vector<int> cond;
  int left = -1;
  int right = -1;
};

struct RVineStructure {
  int dim = 0;
  //! trees[k] holds the dim - 1 - k edges of tree k (0-based).
  std::vector<std::vector<VineEdge>> trees;

  std::size_t edge_count() const;
};

//! Sorted set {a, b} u cond of an edge.
std::vector<int> edge_variables(const VineEdge& e);

//! Every violated regular-vine condition, one message per offending edge.
//! Empty when the structure is valid.
std::vector<std::string> validate_structure(const RVineStructure& s);
//! Throws DomainError listing the violations.
void require_valid(const RVineStructure& s);

//! Number of labelled regular-vine structures on d variables:
//! d!/2 * 2^((d-3)(d-2)/2).
boost::multiprecision::cpp_int count_rvine_structures(int d);

//! Builds the edge lists of a canonical vine over the given variable order.
RVineStructure cvine_structure(const std::vector<int>& order);
RVineStructure dvine_structure(const std::vector<int>& order);
//! Assembles a structure from tree-wise parent pairs (tree 0: variable pairs).
//! Conditioned and conditioning sets are derived from the parents.
RVineStructure structure_from_pairs(int dim,
                                    const std::vector<std::vector<std::pair<int, int>>>& trees);

//! Conditional pseudo-observations are clamped to this distance from {0, 1}.
inline constexpr double kVineClamp = 1e-10;

struct VineFitOptions {
  std::vector<Family> families = default_families();
  Criterion criterion = Criterion::bic;
  double independence_level = 0.05;
  //! Worker threads for per-edge fits within a tree (0 = all cores).
  std::size_t workers = 1;
};

//! Pair copulas attached to a structure, optionally with marginals.
struct RVineModel {
  RVineStructure structure;
  //! copulas[k][e] belongs to structure.trees[k][e].
  std::vector<std::vector<BivariateCopula>> copulas;
  //! Either empty (copula on the unit cube) or one per variable.
  std::vector<MarginalModel> marginals;

  int dim() const { return structure.dim; }
  double loglik() const;
  int parameter_count() const;
};

struct WeightedPair {
  double weight = 0.0;
  int i = 0;
  int j = 0;
};

//! Kruskal maximum spanning tree over candidate pairs (i < j). Exact weight
//! ties go to the lexicographically smallest (i, j). Returns the chosen
//! pairs sorted; throws FitError if the candidates do not connect all nodes.
std::vector<std::pair<int, int>> maximum_spanning_tree(int nodes,
                                                       std::vector<WeightedPair> candidates);

//! Maximum spanning trees on |Kendall tau|, built tree by tree from
//! conditional pseudo-observations of fitted lower trees.
RVineStructure select_structure(const Eigen::MatrixXd& u, const VineFitOptions& opts = {});

//! Sequential fit: family selection per edge, then h-transforms to the next
//! tree. Selects the structure first when none is given.
RVineModel fit_rvine(const Eigen::MatrixXd& u, const std::optional<RVineStructure>& structure,
                     const VineFitOptions& opts = {});

//! Log copula density of the vine at a point of the unit cube.
double rvine_copula_log_density(const Eigen::VectorXd& u, const RVineModel& m);
//! Joint density on the original scale (requires marginals).
double rvine_log_density(const Eigen::VectorXd& x, const RVineModel& m);
double rvine_density(const Eigen::VectorXd& x, const RVineModel& m);

//! Variables in an order in which they can be sampled sequentially.
std::vector<int> sampling_order(const RVineStructure& s);

//! n x d uniforms by inverse-Rosenblatt sampling.
Eigen::MatrixXd rvine_simulate_uniform(const RVineModel& m, std::size_t n, std::uint64_t seed);
//! n x d sample on the original scale (requires marginals).
Eigen::MatrixXd rvine_simulate(const RVineModel& m, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Vine regression with the response as a leaf in every tree

//! Vine over (X_0, ..., X_{d-1}, Y) with Y = variable d. In every tree the
//! edge containing Y is y_edges[k]; Y is its `b` variable.
struct LeafConstrainedVine {
  RVineModel model;
  std::vector<int> y_edges;

  int predictors() const { return model.dim() - 1; }
  int response() const { return model.dim() - 1; }
};

//! Fits the predictor vine (selecting its structure unless given), then
//! attaches Y tree by tree to the proximity-feasible node with the largest
//! absolute normal-score correlation.
LeafConstrainedVine build_leaf_constrained(const Eigen::MatrixXd& ux, const Eigen::VectorXd& uy,
                                           const std::optional<RVineStructure>& x_structure,
                                           const VineFitOptions& opts = {});

//! Structure of the predictor sub-vine (Y edges removed, parents reindexed).
RVineStructure predictor_structure(const LeafConstrainedVine& v);

//! F(Y <= y | X = x) on the copula scale: uy is the PIT of y, ux of x.
double conditional_cdf_uniform(double uy, const Eigen::VectorXd& ux,
                               const LeafConstrainedVine& v);
//! F(Y <= y | X = x) on the original scale (requires marginals).
double conditional_cdf(double y, const Eigen::VectorXd& x, const LeafConstrainedVine& v);

//! PIT value of the conditional median of Y given X on the copula scale.
double conditional_median_uniform(const Eigen::VectorXd& ux, const LeafConstrainedVine& v);

//! Conditional median of Y given X = x (requires marginals). Throws
//! PredictionError when the median lies outside the response quantile range
//! [1e-6, 1 - 1e-6].
double vine_regression_predict(const Eigen::VectorXd& x, const LeafConstrainedVine& v);

//! log f_X(x) from the predictor sub-vine (requires marginals).
double predictor_log_density(const Eigen::VectorXd& x, const LeafConstrainedVine& v);

} // namespace vinestress

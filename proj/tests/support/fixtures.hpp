#pragma once

#include "oracles.hpp"

#include <vinestress/rvine.hpp>

#include <numeric>

namespace fixture {

inline vinestress::RVineModel gaussian_vine(const vinestress::RVineStructure& s,
                                            const Eigen::MatrixXd& sigma)
{
  vinestress::RVineModel m;
  m.structure = s;
  for (const auto& tree : s.trees) {
    std::vector<vinestress::BivariateCopula> cops;
    for (const auto& e : tree)
      cops.push_back(vinestress::BivariateCopula::gaussian(
          oracle::partial_correlation(sigma, e.a, e.b, e.cond)));
    m.copulas.push_back(cops);
  }
  return m;
}

// Leaf-constrained Gaussian vine over (X_0..X_{d-1}, Y) with a D-vine order
// X_0 - ... - X_{d-1} - Y.
inline vinestress::LeafConstrainedVine gaussian_dvine_regression(const Eigen::MatrixXd& sigma)
{
  const int d = static_cast<int>(sigma.rows()) - 1;
  std::vector<int> order(d + 1);
  std::iota(order.begin(), order.end(), 0);
  vinestress::LeafConstrainedVine v;
  v.model = gaussian_vine(vinestress::dvine_structure(order), sigma);
  for (int k = 0; k < d; ++k)
    v.y_edges.push_back(d - 1 - k);
  return v;
}

} // namespace fixture

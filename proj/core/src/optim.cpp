#include "vinestress/optim.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace vinestress {

namespace {

double sanitize(double v)
{
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

} // namespace

LocalResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                        const NelderMeadOptions& opts)
{
  const auto n = start.size();
  std::vector<Eigen::VectorXd> simplex(n + 1, start);
  std::vector<double> values(n + 1);
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return sanitize(f(x));
  };

  values[0] = eval(start);
  for (Eigen::Index i = 0; i < n; ++i) {
    simplex[i + 1](i) += step(i);
    values[i + 1] = eval(simplex[i + 1]);
  }

  std::vector<std::size_t> order(n + 1);
  bool converged = false;
  while (evals < opts.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second = order[n - 1];

    double diameter = 0.0;
    for (const auto& p : simplex)
      diameter = std::max(diameter, (p - simplex[best]).lpNorm<Eigen::Infinity>());
    const double spread = values[worst] - values[best];
    if (std::isfinite(spread) &&
        spread <= opts.ftol * (std::abs(values[best]) + opts.ftol) &&
        diameter <= std::max(opts.xtol, opts.xtol * simplex[best].norm())) {
      converged = true;
      break;
    }
    if (diameter <= 1e-15 * (1.0 + simplex[best].norm())) {
      converged = std::isfinite(values[best]);
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i)
      if (i != worst)
        centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    // contraction (outside if the reflection improved on the worst point)
    const bool outside = fr < values[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    // shrink towards the best vertex
    for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i) {
      if (i == best)
        continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = eval(simplex[i]);
    }
  }

  const auto best =
      static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  return {simplex[best], values[best], evals, converged};
}

std::pair<double, double> brent_minimize(const std::function<double(double)>& f,
                                         double lower, double upper, int bits, int max_iter)
{
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
  auto g = [&](double x) { return sanitize(f(x)); };
  return boost::math::tools::brent_find_minima(g, lower, upper, bits, iters);
}

} // namespace vinestress

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace vinestress {

struct ScenarioMarker {
  std::string label;
  //! One coordinate per factor.
  Eigen::VectorXd point;
};

struct ScatterPlotSpec {
  std::vector<std::string> names;
  Eigen::MatrixXd factors;
  Eigen::VectorXd losses;
  std::vector<ScenarioMarker> markers;
  //! Horizontal rule at this loss level; markers sit on it.
  std::optional<double> threshold;
  int panel_width = 320;
  int panel_height = 240;
  int columns = 3;
};

//! One scatter panel of loss against each factor. Returns a standalone SVG
//! document; points beyond the data range are clipped to the panel.
std::string scatter_svg(const ScatterPlotSpec& spec);

} // namespace vinestress

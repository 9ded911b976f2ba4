#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pnlab {

struct PlotSeries {
  std::string label;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  bool markers = false;  // draw points instead of a polyline
};

/// Line plot with axes, ticks and a legend. Output depends only on the input.
std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title,
                       const std::string& x_label = "x [cm]", const std::string& y_label = "phi_0");

void write_svg(const std::filesystem::path& path, const std::vector<PlotSeries>& series, const std::string& title);

}  // namespace pnlab

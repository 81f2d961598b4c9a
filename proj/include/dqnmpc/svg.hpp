#pragma once

/**
 * @file
 * @brief Self-contained SVG line/scatter and box plots.
 */

#include <string>
#include <vector>

namespace dqnmpc::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color{"#1f77b4"};
  bool line{true};  ///< false draws markers only
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_y{false};
  int width{640};
  int height{420};
};

std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series);

struct BoxGroup {
  std::string label;
  std::vector<double> values;
  std::string color{"#1f77b4"};
};

/// Box (quartiles, 1.5 IQR whiskers) with the raw points jittered deterministically beside it.
std::string box_plot(const PlotSpec& spec, const std::vector<BoxGroup>& groups);

}  // namespace dqnmpc::svg

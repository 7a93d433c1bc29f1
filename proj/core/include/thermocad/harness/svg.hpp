#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace thermocad::harness::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Standalone SVG document with axes, tick labels and a legend.
std::string line_chart(std::string_view title, std::string_view x_label, std::string_view y_label,
                       const std::vector<Series>& series);

/// One box (quartiles, whiskers at min and max) per named sample.
std::string box_plot(std::string_view title, std::string_view y_label,
                     const std::vector<std::pair<std::string, std::vector<double>>>& groups);

std::string escape(std::string_view text);

}  // namespace thermocad::harness::svg

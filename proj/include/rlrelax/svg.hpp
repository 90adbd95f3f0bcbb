#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rlrelax {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal line chart: axes with min/max tick labels and one polyline per
/// series. Non-finite points are skipped.
std::string line_plot_svg(const std::vector<Series>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label);

void write_line_plot(const std::filesystem::path& path, const std::vector<Series>& series,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label);

}  // namespace rlrelax

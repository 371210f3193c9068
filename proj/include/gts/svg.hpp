#pragma once

#include <string>
#include <vector>

namespace gts::svg {

struct LineSeries {
  std::string name;
  std::vector<double> x, y;
};

// Minimal self-contained SVG line chart with axes, ticks and a legend.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<LineSeries>& series);

}  // namespace gts::svg

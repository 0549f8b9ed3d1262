#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gsda {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 720;
  int height = 420;
};

/// Static polyline chart. With log_y, non-positive values are skipped.
void write_line_chart(std::ostream& out, const std::vector<Series>& series, const ChartOptions& options);

}  // namespace gsda

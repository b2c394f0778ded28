#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace minto::plots {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> low;   // optional band; empty or same length as y
  std::vector<double> high;
};

struct Bar {
  std::string label;
  double value = 0.0;
  double low = 0.0;
  double high = 0.0;
};

/// Self-contained SVG documents (no scripts, no external references).
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);
std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars);

std::string xml_escape(const std::string& text);

/// Reads out_dir/aggregate/*.csv and writes SVGs into out_dir/plots. Missing
/// files or columns skip the affected plot with a warning on `log`. Returns
/// the number of SVG files written.
int emit_plots(const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace minto::plots

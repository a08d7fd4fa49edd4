#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace rulkit {

/// One named polyline for the chart renderer.
struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

/// Writes a minimal static line chart (axes, bounds labels, legend) as an
/// SVG document. Intended for prediction-versus-truth series; anything more
/// elaborate belongs in an external plotting tool fed by the CSV output.
void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::vector<ChartSeries>& series);

}  // namespace rulkit

#include "rulkit/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "rulkit/error.hpp"

namespace rulkit {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::vector<ChartSeries>& series) {
  const double width = 720, height = 420;
  const double left = 60, right = 20, top = 40, bottom = 40;

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        x_min = x_max = x;
        y_min = y_max = y;
        first = false;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;

  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return top + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";

  // axes
  svg += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) +
         "\" y2=\"" + num(top + plot_h) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(left) + "\" y1=\"" + num(top + plot_h) + "\" x2=\"" +
         num(left + plot_w) + "\" y2=\"" + num(top + plot_h) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + 6) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(y_max) +
         "</text>\n";
  svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + plot_h) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(y_min) +
         "</text>\n";
  svg += "<text x=\"" + num(left) + "\" y=\"" + num(height - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + num(x_min) +
         "</text>\n";
  svg += "<text x=\"" + num(left + plot_w) + "\" y=\"" + num(height - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + num(x_max) +
         "</text>\n";

  std::size_t color = 0;
  double legend_y = top + 8;
  for (const auto& s : series) {
    const char* stroke = kPalette[color % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (s.points.size() == 1) {
      svg += "<circle cx=\"" + num(sx(s.points[0].first)) + "\" cy=\"" +
             num(sy(s.points[0].second)) + "\" r=\"4\" fill=\"" + stroke + "\"/>\n";
    } else if (!s.points.empty()) {
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(stroke) +
             "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) svg += num(sx(x)) + "," + num(sy(y)) + " ";
      svg += "\"/>\n";
    }
    svg += "<rect x=\"" + num(left + plot_w - 150) + "\" y=\"" + num(legend_y - 9) +
           "\" width=\"10\" height=\"10\" fill=\"" + stroke + "\"/>\n";
    svg += "<text x=\"" + num(left + plot_w - 136) + "\" y=\"" + num(legend_y) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + s.name + "</text>\n";
    legend_y += 16;
    ++color;
  }
  svg += "</svg>\n";

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  file << svg;
}

}  // namespace rulkit

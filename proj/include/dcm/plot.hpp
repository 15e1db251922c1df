#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dcm {

enum class PlotKind { msd, activation, trajectory, density };

PlotKind parse_plot_kind(const std::string& text);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool step = false;  // draw as a left-continuous step function
};

struct PlotLayout {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::optional<std::pair<double, double>> y_range;
  bool equal_aspect = false;
};

/// Self-contained SVG line chart with axes, ticks and a legend.
std::string render_svg(const std::vector<PlotSeries>& series, const PlotLayout& layout);

/// Reads each CSV, checks its columns against the kind and writes one SVG.
/// An empty body or a schema mismatch throws ValidationError before any file
/// is created.
void plot(PlotKind kind, const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out);

}  // namespace dcm

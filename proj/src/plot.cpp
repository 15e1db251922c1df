#include "dcm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "dcm/errors.hpp"
#include "dcm/output.hpp"

namespace dcm {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 880.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 250.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(x) < 1e-12 ? 0.0 : x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double d = std::max(1.0, std::abs(lo)) * 0.5;
    return {lo - d, hi + d};
  }
  return {lo, hi};
}

}  // namespace

PlotKind parse_plot_kind(const std::string& text) {
  if (text == "msd") return PlotKind::msd;
  if (text == "activation") return PlotKind::activation;
  if (text == "trajectory") return PlotKind::trajectory;
  if (text == "density") return PlotKind::density;
  throw ValidationError("plot kind \"" + text + "\" is not one of msd, activation, trajectory, density");
}

std::string render_svg(const std::vector<PlotSeries>& series, const PlotLayout& layout) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      xlo = std::min(xlo, s.x[k]);
      xhi = std::max(xhi, s.x[k]);
      ylo = std::min(ylo, s.y[k]);
      yhi = std::max(yhi, s.y[k]);
    }
  if (!std::isfinite(xlo)) throw ValidationError("plot: no finite data points");
  if (layout.y_range) std::tie(ylo, yhi) = *layout.y_range;
  std::tie(xlo, xhi) = padded(xlo, xhi);
  std::tie(ylo, yhi) = padded(ylo, yhi);

  double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  if (layout.equal_aspect) {
    const double scale = std::min(pw / (xhi - xlo), ph / (yhi - ylo));
    const double cx = 0.5 * (xlo + xhi), cy = 0.5 * (ylo + yhi);
    xlo = cx - 0.5 * pw / scale;
    xhi = cx + 0.5 * pw / scale;
    ylo = cy - 0.5 * ph / scale;
    yhi = cy + 0.5 * ph / scale;
  }
  auto px = [&](double x) { return kLeft + (x - xlo) / (xhi - xlo) * pw; };
  auto py = [&](double y) { return kTop + (yhi - y) / (yhi - ylo) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
                    fmt(kHeight) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(layout.title) + "</text>\n";

  // grid and ticks
  const double xs = nice_step(xhi - xlo, 6), ys = nice_step(yhi - ylo, 6);
  for (double x = std::ceil(xlo / xs) * xs; x <= xhi + 1e-9 * xs; x += xs) {
    svg += "<line x1=\"" + fmt(px(x)) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(px(x)) + "\" y2=\"" +
           fmt(kTop + ph) + "\" stroke=\"#e5e5e5\"/>\n";
    svg += "<text x=\"" + fmt(px(x)) + "\" y=\"" + fmt(kTop + ph + 18) + "\" text-anchor=\"middle\">" + tick_label(x) +
           "</text>\n";
  }
  for (double y = std::ceil(ylo / ys) * ys; y <= yhi + 1e-9 * ys; y += ys) {
    svg += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(py(y)) + "\" x2=\"" + fmt(kLeft + pw) + "\" y2=\"" +
           fmt(py(y)) + "\" stroke=\"#e5e5e5\"/>\n";
    svg += "<text x=\"" + fmt(kLeft - 8) + "\" y=\"" + fmt(py(y) + 4) + "\" text-anchor=\"end\">" + tick_label(y) +
           "</text>\n";
  }
  svg += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 18) + "\" text-anchor=\"middle\">" +
         escape(layout.x_label) + "</text>\n";
  svg += "<text transform=\"translate(22," + fmt(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(layout.y_label) + "</text>\n";

  // series
  svg += "<g clip-path=\"url(#plot-area)\">\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    std::string pts;
    for (std::size_t k = 0; k < ser.x.size(); ++k) {
      if (!std::isfinite(ser.x[k]) || !std::isfinite(ser.y[k])) continue;
      if (ser.step && k > 0) pts += fmt(px(ser.x[k])) + "," + fmt(py(ser.y[k - 1])) + " ";
      pts += fmt(px(ser.x[k])) + "," + fmt(py(ser.y[k])) + " ";
    }
    if (!pts.empty()) pts.pop_back();
    svg += "<polyline fill=\"none\" stroke-width=\"1.6\" stroke=\"" + std::string(kPalette[s % 10]) +
           "\" points=\"" + pts + "\"/>\n";
  }
  svg += "</g>\n";
  svg += "<defs><clipPath id=\"plot-area\"><rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" +
         fmt(pw) + "\" height=\"" + fmt(ph) + "\"/></clipPath></defs>\n";

  // legend
  const double lx = kLeft + pw + 14;
  for (std::size_t s = 0; s < series.size() && s < 24; ++s) {
    const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
    svg += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(lx + 22) + "\" y2=\"" + fmt(ly) +
           "\" stroke-width=\"2\" stroke=\"" + std::string(kPalette[s % 10]) + "\"/>\n";
    std::string text = series[s].label;
    if (text.size() > 30) text = text.substr(0, 29) + "~";
    svg += "<text x=\"" + fmt(lx + 28) + "\" y=\"" + fmt(ly + 4) + "\">" + escape(text) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void plot(PlotKind kind, const std::vector<fs::path>& inputs, const fs::path& out) {
  if (inputs.empty()) throw ValidationError("plot: no input files");
  std::vector<PlotSeries> series;
  PlotLayout layout;
  const bool multi = inputs.size() > 1;

  for (const auto& in : inputs) {
    const CsvTable t = read_csv(in);
    if (t.rows.empty()) throw ValidationError(in.string() + ": empty csv body");
    std::string name = in.parent_path().filename().string();
    if (name.empty()) name = in.stem().string();
    switch (kind) {
      case PlotKind::msd:
      case PlotKind::activation: {
        const char* col = kind == PlotKind::msd ? "msd" : "activation";
        const std::size_t ct = t.column("t"), cy = t.column(col);
        PlotSeries s{name, {}, {}, kind == PlotKind::activation};
        for (const auto& r : t.rows) {
          s.x.push_back(r[ct]);
          s.y.push_back(r[cy]);
        }
        series.push_back(std::move(s));
        if (kind == PlotKind::msd && t.has_column("exact")) {
          const std::size_t ce = t.column("exact");
          PlotSeries e{name + " (reference)", {}, {}, false};
          for (const auto& r : t.rows) {
            e.x.push_back(r[ct]);
            e.y.push_back(r[ce]);
          }
          series.push_back(std::move(e));
        }
        layout.title = kind == PlotKind::msd ? "Mean squared displacement" : "Fraction of active contacts";
        layout.x_label = "t";
        layout.y_label = col;
        if (kind == PlotKind::activation) layout.y_range = std::pair{0.0, 1.0};
        break;
      }
      case PlotKind::trajectory: {
        const std::size_t cp = t.column("particle"), cx = t.column("x"), cy = t.column("y");
        t.column("t");
        std::map<long, PlotSeries> per;
        for (const auto& r : t.rows) {
          const long id = std::lround(r[cp]);
          auto& s = per[id];
          if (s.label.empty()) s.label = (multi ? name + " " : std::string()) + "particle " + std::to_string(id);
          s.x.push_back(r[cx]);
          s.y.push_back(r[cy]);
        }
        for (auto& [id, s] : per) series.push_back(std::move(s));
        layout.title = "Particle trajectories";
        layout.x_label = "x";
        layout.y_label = "y";
        layout.equal_aspect = true;
        break;
      }
      case PlotKind::density: {
        const std::size_t ca = t.column("a_l");
        bool any = false;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
          if (t.columns[c].rfind("R_", 0) != 0) continue;
          any = true;
          PlotSeries s{(multi ? name + " " : std::string()) + t.columns[c], {}, {}, false};
          for (const auto& r : t.rows) {
            s.x.push_back(r[ca]);
            s.y.push_back(r[c]);
          }
          series.push_back(std::move(s));
        }
        if (!any) throw ValidationError(in.string() + ": no R_<i> density columns");
        layout.title = "Bond age density";
        layout.x_label = "age";
        layout.y_label = "density";
        break;
      }
    }
  }
  write_text(out, render_svg(series, layout));
}

}  // namespace dcm

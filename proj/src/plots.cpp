#include "psybayes/plots.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "psybayes/compare.hpp"
#include "psybayes/diagnostics.hpp"
#include "psybayes/dists.hpp"
#include "psybayes/error.hpp"
#include "psybayes/io.hpp"

namespace psybayes {

namespace {

constexpr std::size_t kGrid = 200;
constexpr int kBins = 30;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr const char* kDataColor = "#3a7bd5";

const char* palette(std::size_t i) { return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))]; }

std::string escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string hex_color(const std::array<double, 3>& rgb) {
  auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0))); };
  return fmt::format("#{:02x}{:02x}{:02x}", c(rgb[0]), c(rgb[1]), c(rgb[2]));
}

struct Box {
  double x0, y0, x1, y1;  // pixel rectangle of the plotting area
};

struct Scale {
  double lo, hi;
  double p0, p1;
  double operator()(double v) const { return hi == lo ? 0.5 * (p0 + p1) : p0 + (v - lo) / (hi - lo) * (p1 - p0); }
};

void extend(double& lo, double& hi, double v) {
  if (!std::isfinite(v)) return;
  lo = std::min(lo, v);
  hi = std::max(hi, v);
}

void render_cartesian(std::string& out, const Panel& panel, const Box& box) {
  const double inf = std::numeric_limits<double>::infinity();
  double xlo = inf, xhi = -inf, ylo = inf, yhi = -inf;
  for (const auto& l : panel.layers) {
    for (double v : l.x) extend(xlo, xhi, v);
    if (l.kind == LayerKind::histogram) extend(ylo, yhi, 0.0);
    for (double v : l.y) extend(ylo, yhi, v);
  }
  if (!(xlo <= xhi)) xlo = 0, xhi = 1;
  if (!(ylo <= yhi)) ylo = 0, yhi = 1;
  if (xlo == xhi) xlo -= 0.5, xhi += 0.5;
  if (ylo == yhi) ylo -= 0.5, yhi += 0.5;
  const double pad = 0.05 * (yhi - ylo);
  yhi += pad;
  const Scale sx{xlo, xhi, box.x0, box.x1};
  const Scale sy{ylo, yhi, box.y1, box.y0};

  out += fmt::format(R"(<rect class="frame" x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="none" stroke="#999999"/>)"
                     "\n",
                     box.x0, box.y0, box.x1 - box.x0, box.y1 - box.y0);
  out += fmt::format(R"(<text class="tick" x="{:.2f}" y="{:.2f}" font-size="9" text-anchor="start">{:.4g}</text>)"
                     "\n",
                     box.x0, box.y1 + 11, xlo);
  out += fmt::format(R"(<text class="tick" x="{:.2f}" y="{:.2f}" font-size="9" text-anchor="end">{:.4g}</text>)"
                     "\n",
                     box.x1, box.y1 + 11, xhi);
  out += fmt::format(R"(<text class="tick" x="{:.2f}" y="{:.2f}" font-size="9" text-anchor="end">{:.4g}</text>)"
                     "\n",
                     box.x0 - 3, box.y1, ylo);
  out += fmt::format(R"(<text class="tick" x="{:.2f}" y="{:.2f}" font-size="9" text-anchor="end">{:.4g}</text>)"
                     "\n",
                     box.x0 - 3, box.y0 + 8, yhi);

  for (const auto& l : panel.layers) {
    const std::string dash = l.dashed ? R"( stroke-dasharray="6,4")" : "";
    out += fmt::format(R"(<g class="layer {}" data-kind="{}">)"
                       "\n",
                       escape(l.role), layer_kind_name(l.kind));
    switch (l.kind) {
      case LayerKind::histogram:
        for (std::size_t i = 0; i + 1 < l.x.size() && i < l.y.size(); ++i) {
          const double top = sy(l.y[i]);
          out += fmt::format(
              R"(<rect class="bar" x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="{}" fill-opacity="{:.2f}"/>)"
              "\n",
              sx(l.x[i]), top, std::max(0.0, sx(l.x[i + 1]) - sx(l.x[i])), std::max(0.0, sy(ylo) - top), l.color,
              l.opacity);
        }
        break;
      case LayerKind::line: {
        std::string pts;
        for (std::size_t i = 0; i < l.x.size(); ++i) {
          if (i) pts += ' ';
          pts += fmt::format("{:.2f},{:.2f}", sx(l.x[i]), sy(l.y[i]));
        }
        out += fmt::format(
            R"(<polyline class="{}" points="{}" fill="none" stroke="{}" stroke-width="1" stroke-opacity="{:.2f}"{}/>)"
            "\n",
            escape(l.role), pts, l.color, l.opacity, dash);
        break;
      }
      case LayerKind::band: {
        const double b0 = l.y.size() == 2 ? sy(l.y[1]) : box.y0;
        const double b1 = l.y.size() == 2 ? sy(l.y[0]) : box.y1;
        out += fmt::format(
            R"(<rect class="band {}" data-lo="{:.17g}" data-hi="{:.17g}" x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="{}" fill-opacity="{:.2f}"/>)"
            "\n",
            escape(l.role), l.x[0], l.x[1], sx(l.x[0]), b0, std::max(0.0, sx(l.x[1]) - sx(l.x[0])), b1 - b0, l.color,
            l.opacity);
        break;
      }
      case LayerKind::vline:
        out += fmt::format(
            R"(<line class="vline {}" data-x="{:.17g}" x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="{}"{}/>)"
            "\n",
            escape(l.role), l.x[0], sx(l.x[0]), box.y0, sx(l.x[0]), box.y1, l.color, dash);
        break;
      case LayerKind::point:
        for (std::size_t i = 0; i < l.x.size(); ++i) {
          out += fmt::format(R"(<circle class="point" cx="{:.2f}" cy="{:.2f}" r="2" fill="{}" fill-opacity="{:.2f}"/>)"
                             "\n",
                             sx(l.x[i]), sy(l.y[i]), l.color, l.opacity);
        }
        break;
      default: fail(ErrorKind::argument, "polar layer in a cartesian panel");
    }
    out += "</g>\n";
  }
}

void render_polar(std::string& out, const Panel& panel, const Box& box) {
  const double cx = 0.5 * (box.x0 + box.x1);
  const double cy = 0.5 * (box.y0 + box.y1);
  const double radius = 0.48 * std::min(box.x1 - box.x0, box.y1 - box.y0);
  auto px = [&](double theta, double r) { return cx + r * radius * std::cos(theta); };
  auto py = [&](double theta, double r) { return cy - r * radius * std::sin(theta); };

  out += fmt::format(R"(<circle class="wheel" cx="{:.2f}" cy="{:.2f}" r="{:.2f}" fill="none" stroke="#999999"/>)"
                     "\n",
                     cx, cy, radius);
  for (const auto& l : panel.layers) {
    const std::string dash = l.dashed ? R"( stroke-dasharray="6,4")" : "";
    out += fmt::format(R"(<g class="layer {}" data-kind="{}">)"
                       "\n",
                       escape(l.role), layer_kind_name(l.kind));
    switch (l.kind) {
      case LayerKind::polar_band: {
        const double lo = l.x[0], hi = l.x[1];
        const double r0 = l.y.size() == 2 ? l.y[0] : 0.0, r1 = l.y.size() == 2 ? l.y[1] : 1.0;
        constexpr int steps = 64;
        std::string pts;
        for (int i = 0; i <= steps; ++i) {
          const double t = lo + (hi - lo) * i / steps;
          pts += fmt::format("{:.2f},{:.2f} ", px(t, r1), py(t, r1));
        }
        for (int i = steps; i >= 0; --i) {
          const double t = lo + (hi - lo) * i / steps;
          pts += fmt::format("{:.2f},{:.2f}{}", px(t, r0), py(t, r0), i ? " " : "");
        }
        out += fmt::format(
            R"(<polygon class="polar-band {}" data-lo="{:.17g}" data-hi="{:.17g}" points="{}" fill="{}" fill-opacity="{:.2f}"/>)"
            "\n",
            escape(l.role), lo, hi, pts, l.color, l.opacity);
        break;
      }
      case LayerKind::polar_line: {
        const double t = l.x[0];
        const double r0 = l.y.size() == 2 ? l.y[0] : 0.0, r1 = l.y.size() == 2 ? l.y[1] : 1.0;
        out += fmt::format(
            R"(<line class="polar-line {}" data-angle="{:.17g}" x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="{}" stroke-width="2"{}/>)"
            "\n",
            escape(l.role), t, px(t, r0), py(t, r0), px(t, r1), py(t, r1), l.color, dash);
        break;
      }
      case LayerKind::polar_point:
        for (std::size_t i = 0; i < l.x.size(); ++i) {
          out += fmt::format(
              R"(<circle class="point" cx="{:.2f}" cy="{:.2f}" r="3" fill="{}" fill-opacity="{:.2f}" stroke="#333333"/>)"
              "\n",
              px(l.x[i], l.y[i]), py(l.x[i], l.y[i]), l.color, l.opacity);
        }
        break;
      default: fail(ErrorKind::argument, "cartesian layer in a polar panel");
    }
    out += "</g>\n";
  }
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::histogram: return "histogram";
    case LayerKind::line: return "line";
    case LayerKind::band: return "band";
    case LayerKind::vline: return "vline";
    case LayerKind::point: return "point";
    case LayerKind::polar_band: return "polar-band";
    case LayerKind::polar_line: return "polar-line";
    case LayerKind::polar_point: return "polar-point";
  }
  return "";
}

std::size_t Panel::count(std::string_view role) const {
  return static_cast<std::size_t>(
      std::count_if(layers.begin(), layers.end(), [&](const Layer& l) { return l.role == role; }));
}

std::string render_svg(const PlotSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1 || spec.panels.size() > static_cast<std::size_t>(spec.rows * spec.cols))
    fail(ErrorKind::argument, "plot layout does not fit its panels");
  for (const auto& p : spec.panels) {
    for (const auto& l : p.layers) {
      for (double v : l.x) {
        if (!std::isfinite(v)) fail(ErrorKind::argument, fmt::format("non-finite coordinate in layer '{}'", l.role));
      }
      for (double v : l.y) {
        if (!std::isfinite(v)) fail(ErrorKind::argument, fmt::format("non-finite coordinate in layer '{}'", l.role));
      }
    }
  }
  std::string out;
  out += R"(<?xml version="1.0" encoding="UTF-8"?>)"
         "\n";
  out += fmt::format(
      R"(<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}">)"
      "\n",
      spec.width, spec.height, spec.width, spec.height);
  out += R"(<rect width="100%" height="100%" fill="#ffffff"/>)"
         "\n";
  const double top = spec.title.empty() ? 0.0 : 24.0;
  if (!spec.title.empty())
    out += fmt::format(R"(<text class="plot-title" x="{:.2f}" y="17" font-size="14" text-anchor="middle">{}</text>)"
                       "\n",
                       spec.width / 2, escape(spec.title));
  const double pw = spec.width / spec.cols;
  const double ph = (spec.height - top) / spec.rows;
  for (std::size_t k = 0; k < spec.panels.size(); ++k) {
    const auto& panel = spec.panels[k];
    const double ox = static_cast<double>(k % static_cast<std::size_t>(spec.cols)) * pw;
    const double oy = top + static_cast<double>(k / static_cast<std::size_t>(spec.cols)) * ph;
    const Box box{ox + 45, oy + 22, ox + pw - 10, oy + ph - 30};
    out += fmt::format(R"(<g class="panel{}" data-index="{}">)"
                       "\n",
                       panel.polar ? " polar" : "", k);
    if (!panel.title.empty())
      out += fmt::format(R"(<text class="title" x="{:.2f}" y="{:.2f}" font-size="11" text-anchor="middle">{}</text>)"
                         "\n",
                         0.5 * (box.x0 + box.x1), oy + 14, escape(panel.title));
    if (!panel.xlabel.empty())
      out += fmt::format(R"(<text class="xlabel" x="{:.2f}" y="{:.2f}" font-size="10" text-anchor="middle">{}</text>)"
                         "\n",
                         0.5 * (box.x0 + box.x1), box.y1 + 24, escape(panel.xlabel));
    if (!panel.ylabel.empty())
      out += fmt::format(
          R"svg(<text class="ylabel" x="{:.2f}" y="{:.2f}" font-size="10" text-anchor="middle" transform="rotate(-90 {:.2f} {:.2f})">{}</text>)svg"
          "\n",
          ox + 12, 0.5 * (box.y0 + box.y1), ox + 12, 0.5 * (box.y0 + box.y1), escape(panel.ylabel));
    if (panel.polar) {
      render_polar(out, panel, box);
    } else {
      render_cartesian(out, panel, box);
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

void write_plot(const PlotSpec& spec, const std::string& path) { write_file_atomic(path, render_svg(spec)); }

// Densities ---------------------------------------------------------------------

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

double silverman_bandwidth(const std::vector<double>& draws) {
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  const double sd = sd_of(sorted);
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = sd;
  if (iqr > 0) spread = std::min(sd, iqr / 1.34);
  double h = 0.9 * spread * std::pow(static_cast<double>(sorted.size()), -0.2);
  if (!(h > 0)) h = 1e-3 * std::max(1.0, std::abs(mean_of(sorted)));
  return h;
}

std::vector<double> kde(const std::vector<double>& draws, const std::vector<double>& grid) {
  if (draws.empty()) fail(ErrorKind::data, "density estimate needs draws");
  const double h = silverman_bandwidth(draws);
  const double norm = 1.0 / (static_cast<double>(draws.size()) * h * std::sqrt(dists::kTwoPi));
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double d : draws) {
      const double z = (grid[g] - d) / h;
      s += std::exp(-0.5 * z * z);
    }
    out[g] = s * norm;
  }
  return out;
}

namespace {

std::pair<double, double> range_of(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

Layer histogram(const std::vector<double>& values, std::string role, std::string color) {
  auto [lo, hi] = range_of(values);
  if (lo == hi) lo -= 0.5, hi += 0.5;
  Layer l{LayerKind::histogram, std::move(role), linspace(lo, hi, kBins + 1), std::vector<double>(kBins, 0.0),
          std::move(color), false, 0.6};
  const double width = (hi - lo) / kBins;
  for (double v : values) {
    auto b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, kBins - 1);
    l.y[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto& y : l.y) y /= static_cast<double>(values.size()) * width;
  return l;
}

Layer curve(std::vector<double> x, std::vector<double> y, std::string role, std::string color) {
  return {LayerKind::line, std::move(role), std::move(x), std::move(y), std::move(color), false, 1.0};
}

Layer density_curve(const std::vector<double>& draws, double lo, double hi, std::string role, std::string color) {
  auto grid = linspace(lo, hi, kGrid);
  auto y = kde(draws, grid);
  return curve(std::move(grid), std::move(y), std::move(role), std::move(color));
}

double posterior_mean(const Fit& fit, const std::string& name) {
  const auto& info = fit.param(name);
  const auto draws = fit.draws.pooled(name);
  return info.constraint.kind == ConstraintKind::circular ? circular_mean(draws) : mean_of(draws);
}

std::vector<std::size_t> main_params(const Fit& fit) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fit.params.size(); ++i) {
    const auto& p = fit.params[i];
    if (!p.derived && p.level == Level::group) out.push_back(i);
  }
  return out;
}

void grid_layout(PlotSpec& spec, std::size_t panels, double cell_w = 260, double cell_h = 200) {
  const auto cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(panels))));
  const int rows = static_cast<int>((panels + static_cast<std::size_t>(cols) - 1) / static_cast<std::size_t>(cols));
  spec.cols = std::max(cols, 1);
  spec.rows = std::max(rows, 1);
  spec.width = cell_w * spec.cols;
  spec.height = cell_h * spec.rows + (spec.title.empty() ? 0 : 24);
}

std::vector<int> subject_column(const Fit& fit) {
  std::vector<int> out;
  for (double v : fit.data.column("s")) out.push_back(static_cast<int>(v));
  return out;
}

std::vector<double> select(const std::vector<double>& v, const std::vector<int>& s, int subject) {
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (s[i] == subject) out.push_back(v[i]);
  }
  return out;
}

std::string idx(const char* name, int i) { return fmt::format("{}[{}]", name, i); }

Panel fitted_panel(const std::vector<double>& data, const std::function<double(double)>& density, double lo,
                   double hi, std::string title, std::string xlabel) {
  Panel p;
  p.title = std::move(title);
  p.xlabel = std::move(xlabel);
  p.ylabel = "density";
  p.layers.push_back(histogram(data, "data", kDataColor));
  auto grid = linspace(lo, hi, kGrid);
  std::vector<double> y;
  for (double g : grid) {
    const double v = density(g);
    y.push_back(std::isfinite(v) ? v : 0.0);
  }
  p.layers.push_back(curve(std::move(grid), std::move(y), "fitted", "#000000"));
  return p;
}

Panel line_panel(const std::vector<double>& x, const std::vector<double>& y, double a, double b, std::string title) {
  Panel p;
  p.title = std::move(title);
  p.xlabel = "x";
  p.ylabel = "y";
  p.layers.push_back({LayerKind::point, "data", x, y, kDataColor, false, 0.7});
  auto [lo, hi] = range_of(x);
  p.layers.push_back(curve({lo, hi}, {a + b * lo, a + b * hi}, "fitted", "#000000"));
  return p;
}

void require_color(const Fit& fit) {
  if (fit.kind != ModelKind::color)
    fail(ErrorKind::unsupported, fmt::format("HSV plots need a color fit, got {}", model_kind_name(fit.kind)));
}

std::size_t series_index(const std::vector<NamedSeries>& series, const std::string& par) {
  if (par.empty()) return 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].name == par) return i;
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  fail(ErrorKind::argument, fmt::format("unknown quantity '{}' (have: {})", par, fmt::join(names, ", ")));
}

void check_fits(const std::vector<const Fit*>& fits, std::size_t min) {
  if (fits.size() < min) fail(ErrorKind::comparison, fmt::format("need at least {} fits", min));
  for (const Fit* f : fits) {
    if (f->kind != fits.front()->kind) fail(ErrorKind::comparison, "cannot plot fits of different models together");
  }
}

PlotSpec overlay_plot(const std::vector<std::vector<NamedSeries>>& per_fit, const std::string& par,
                      const std::string& title) {
  const std::size_t k = series_index(per_fit.front(), par);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& f : per_fit) {
    const auto [a, b] = range_of(f[k].draws);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  const double pad = 0.05 * std::max(hi - lo, 1e-9);
  PlotSpec spec;
  spec.title = title;
  spec.width = 640;
  spec.height = 440;
  Panel p;
  p.xlabel = per_fit.front()[k].name;
  p.ylabel = "density";
  for (std::size_t i = 0; i < per_fit.size(); ++i) {
    Layer l = density_curve(per_fit[i][k].draws, lo - pad, hi + pad, "density", palette(i));
    p.layers.push_back(std::move(l));
  }
  spec.panels.push_back(std::move(p));
  return spec;
}

Panel difference_panel(const std::vector<double>& a, const std::vector<double>& b, bool circular,
                       std::optional<double> rope, std::string title) {
  std::vector<double> d(std::min(a.size(), b.size()));
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = difference(a[i], b[i], circular);
  Panel p;
  p.title = std::move(title);
  p.xlabel = "difference";
  p.ylabel = "density";
  Layer h = histogram(d, "difference", "#7f7f7f");
  const double peak = *std::max_element(h.y.begin(), h.y.end());
  if (rope) p.layers.push_back({LayerKind::band, "rope", {-*rope, *rope}, {}, "#bbbbbb", false, 0.4});
  p.layers.push_back(std::move(h));
  const Interval iv = hdi(d);
  p.layers.push_back({LayerKind::band, "hdi", {iv.lo, iv.hi}, {0.0, 0.04 * peak}, "#000000", false, 1.0});
  p.layers.push_back({LayerKind::vline, "mean", {mean_of(d)}, {}, "#d62728", false, 1.0});
  return p;
}

PlotSpec difference_plot(const std::vector<std::vector<NamedSeries>>& per_fit, std::optional<double> rope,
                         std::uint64_t seed, const std::string& par, const std::string& title) {
  if (rope && !(*rope >= 0)) fail(ErrorKind::argument, "rope must be non-negative");
  const std::size_t k = series_index(per_fit.front(), par);
  std::vector<std::vector<double>> raw;
  for (const auto& f : per_fit) raw.push_back(f[k].draws);
  const auto aligned = align_series(std::move(raw), mix_seed(seed, k));
  const bool circular = per_fit.front()[k].circular;
  PlotSpec spec;
  spec.title = title;
  const std::size_t n = aligned.size();
  if (n == 2) {
    spec.width = 640;
    spec.height = 440;
    spec.panels.push_back(difference_panel(aligned[0], aligned[1], circular, rope, "Group 1 - Group 2"));
    return spec;
  }
  spec.rows = spec.cols = static_cast<int>(n);
  spec.width = 220.0 * static_cast<double>(n);
  spec.height = 180.0 * static_cast<double>(n) + 24;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        Panel p;
        p.title = fmt::format("Group {}", i + 1);
        p.xlabel = per_fit.front()[k].name;
        const auto [lo, hi] = range_of(aligned[i]);
        p.layers.push_back(density_curve(aligned[i], lo, hi, "density", palette(i)));
        spec.panels.push_back(std::move(p));
      } else {
        spec.panels.push_back(
            difference_panel(aligned[i], aligned[j], circular, rope, fmt::format("Group {} - Group {}", i + 1, j + 1)));
      }
    }
  }
  return spec;
}

std::vector<std::vector<NamedSeries>> means_of(const std::vector<const Fit*>& fits) {
  std::vector<std::vector<NamedSeries>> out;
  for (const Fit* f : fits) out.push_back(mean_draws(*f));
  return out;
}

std::vector<std::vector<NamedSeries>> predictive_of(const std::vector<const Fit*>& fits, std::uint64_t seed,
                                                    std::optional<double> x) {
  std::vector<std::vector<NamedSeries>> out;
  for (std::size_t i = 0; i < fits.size(); ++i) out.push_back(predictive_draws(*fits[i], mix_seed(seed, 1000 + i), x));
  return out;
}

Panel wheel(const std::string& title) {
  Panel p;
  p.title = title;
  p.polar = true;
  return p;
}

std::string mean_color(const Fit& fit) {
  return hex_color(hsv_to_rgb(posterior_mean(fit, "mu_h"), posterior_mean(fit, "mu_s"), posterior_mean(fit, "mu_v")));
}

}  // namespace

PlotSpec trace_plot(const Fit& fit) {
  const auto& d = fit.draws;
  PlotSpec spec;
  spec.title = "trace";
  const auto params = main_params(fit);
  grid_layout(spec, params.size(), 300, 200);
  std::vector<double> iters(static_cast<std::size_t>(d.iterations()));
  for (std::size_t i = 0; i < iters.size(); ++i) iters[i] = static_cast<double>(i + 1);
  for (std::size_t k : params) {
    Panel p;
    p.title = fit.params[k].name;
    p.xlabel = "iteration";
    if (d.warmup > 0)
      p.layers.push_back({LayerKind::band, "warmup", {1.0, static_cast<double>(d.warmup)}, {}, "#cccccc", false, 0.5});
    for (int c = 0; c < d.chains; ++c)
      p.layers.push_back(curve(iters, d.chain(c, k, true), "chain", palette(static_cast<std::size_t>(c))));
    spec.panels.push_back(std::move(p));
  }
  return spec;
}

PlotSpec fit_plot(const Fit& fit, bool subjects) {
  if (subjects && !fit.hierarchical())
    fail(ErrorKind::unsupported, fmt::format("subject-level plots are not available for {} fits",
                                             model_kind_name(fit.kind)));
  PlotSpec spec;
  spec.title = subjects ? "fit per subject" : "fit";
  auto m = [&](const std::string& name) { return posterior_mean(fit, name); };
  const int n_subjects = fit.subjects();

  switch (fit.kind) {
    case ModelKind::ttest: {
      const auto& y = fit.data.column("y");
      const double nu = m("nu"), mu = m("mu"), sigma = m("sigma");
      const auto [lo, hi] = range_of(y);
      spec.panels.push_back(fitted_panel(
          y, [&](double v) { return std::exp(dists::scaled_t_logpdf(v, nu, mu, sigma)); }, lo, hi, "", "y"));
      break;
    }
    case ModelKind::reaction_time: {
      const auto& t = fit.data.column("t");
      if (!subjects) {
        const double mu = m("mu_m"), sigma = m("mu_s"), lambda = m("mu_l");
        const auto [lo, hi] = range_of(t);
        spec.panels.push_back(fitted_panel(
            t, [&](double v) { return std::exp(dists::emg_logpdf(v, mu, sigma, lambda)); }, lo, hi, "", "rt"));
      } else {
        const auto s = subject_column(fit);
        for (int i = 1; i <= n_subjects; ++i) {
          const auto ti = select(t, s, i);
          const double mu = m(idx("mu", i)), sigma = m(idx("sigma", i)), lambda = m(idx("lambda", i));
          const auto [lo, hi] = range_of(ti);
          spec.panels.push_back(fitted_panel(
              ti, [&](double v) { return std::exp(dists::emg_logpdf(v, mu, sigma, lambda)); }, lo, hi,
              fmt::format("subject {}", i), "rt"));
        }
      }
      break;
    }
    case ModelKind::success_rate: {
      const auto& r = fit.data.column("r");
      const auto s = subject_column(fit);
      if (!subjects) {
        std::vector<double> rates;
        for (int i = 1; i <= n_subjects; ++i) rates.push_back(mean_of(select(r, s, i)));
        const double p = m("p"), tau = m("tau");
        spec.panels.push_back(fitted_panel(
            rates, [&](double v) { return std::exp(dists::beta_logpdf(v, p * tau, (1 - p) * tau)); }, 0.001, 0.999, "",
            "success rate"));
      } else {
        for (int i = 1; i <= n_subjects; ++i) {
          const auto ri = select(r, s, i);
          const double k = std::accumulate(ri.begin(), ri.end(), 0.0);
          const double pi = m(idx("p", i));
          Panel p;
          p.title = fmt::format("subject {}", i);
          p.xlabel = "result";
          p.ylabel = "probability";
          const double rate = k / static_cast<double>(ri.size());
          p.layers.push_back({LayerKind::histogram, "data", {-0.5, 0.5, 1.5}, {1.0 - rate, rate}, kDataColor, false, 0.6});
          p.layers.push_back(curve({0.0, 1.0}, {1.0 - pi, pi}, "fitted", "#000000"));
          spec.panels.push_back(std::move(p));
        }
      }
      break;
    }
    case ModelKind::linear: {
      const auto& x = fit.data.column("x");
      const auto& y = fit.data.column("y");
      if (!subjects) {
        spec.panels.push_back(line_panel(x, y, m("mu_a"), m("mu_b"), ""));
      } else {
        const auto s = subject_column(fit);
        for (int i = 1; i <= n_subjects; ++i)
          spec.panels.push_back(line_panel(select(x, s, i), select(y, s, i), m(idx("alpha", i)), m(idx("beta", i)),
                                           fmt::format("subject {}", i)));
      }
      break;
    }
    case ModelKind::color: {
      for (const char* c : {"r", "g", "b", "h", "s", "v"}) {
        const std::string comp(c);
        const auto& data = fit.data.column(comp);
        if (comp == "h") {
          const double mu = m("mu_h"), kappa = m("kappa_h");
          spec.panels.push_back(fitted_panel(
              data, [&](double v) { return std::exp(dists::vonmises_logpdf(v, mu, kappa)); }, 0.0, dists::kTwoPi, "h",
              "hue"));
        } else {
          const double hi = (comp == "s" || comp == "v") ? 1.0 : 255.0;
          const double mu = m("mu_" + comp), sigma = m("sigma_" + comp);
          spec.panels.push_back(fitted_panel(
              data, [&](double v) { return std::exp(dists::truncnorm_logpdf(v, mu, sigma, 0.0, hi)); }, 0.0, hi, comp,
              comp));
        }
      }
      break;
    }
  }
  grid_layout(spec, spec.panels.size());
  if (spec.panels.size() == 1) spec.width = 640, spec.height = 440;
  return spec;
}

PlotSpec means_plot(const std::vector<const Fit*>& fits, const std::string& par) {
  check_fits(fits, 1);
  return overlay_plot(means_of(fits), par, "means");
}

PlotSpec means_difference_plot(const std::vector<const Fit*>& fits, std::optional<double> rope, std::uint64_t seed,
                               const std::string& par) {
  check_fits(fits, 2);
  return difference_plot(means_of(fits), rope, seed, par, "difference of means");
}

PlotSpec distributions_plot(const std::vector<const Fit*>& fits, std::uint64_t seed, const std::string& par,
                            std::optional<double> x) {
  check_fits(fits, 1);
  return overlay_plot(predictive_of(fits, seed, x), par, "distributions");
}

PlotSpec distributions_difference_plot(const std::vector<const Fit*>& fits, std::optional<double> rope,
                                       std::uint64_t seed, const std::string& par, std::optional<double> x) {
  check_fits(fits, 2);
  return difference_plot(predictive_of(fits, seed, x), rope, seed, par, "difference of distributions");
}

PlotSpec fit_hsv_plot(const Fit& fit) {
  require_color(fit);
  PlotSpec spec;
  spec.title = "fit";
  spec.width = spec.height = 520;
  Panel p = wheel("");
  const auto mu_h = fit.draws.pooled("mu_h");
  const Interval iv = circular_hdi(mu_h);
  const std::string color = mean_color(fit);
  p.layers.push_back({LayerKind::polar_band, "hdi", {iv.lo, iv.hi}, {0.0, 1.0}, color, false, 0.35});
  p.layers.push_back({LayerKind::polar_point, "data", fit.data.column("h"), fit.data.column("s"), "#ffffff", false, 0.8});
  p.layers.push_back({LayerKind::polar_line, "mean", {circular_mean(mu_h)}, {0.0, 1.0}, "#000000", false, 1.0});
  spec.panels.push_back(std::move(p));
  return spec;
}

PlotSpec means_hsv_plot(const Fit& fit) {
  require_color(fit);
  PlotSpec spec;
  spec.title = "means";
  spec.width = spec.height = 520;
  Panel p = wheel("");
  const auto mu_h = fit.draws.pooled("mu_h");
  const Interval iv = circular_hdi(mu_h);
  p.layers.push_back({LayerKind::polar_band, "hdi", {iv.lo, iv.hi}, {0.0, 1.0}, mean_color(fit), false, 0.6});
  p.layers.push_back({LayerKind::polar_line, "mean", {circular_mean(mu_h)}, {0.0, 1.0}, "#000000", false, 1.0});
  spec.panels.push_back(std::move(p));
  return spec;
}

PlotSpec distributions_hsv_plot(const Fit& fit, const std::vector<HsvPoint>& points, const std::vector<HsvPoint>& lines,
                                std::uint64_t seed) {
  require_color(fit);
  PlotSpec spec;
  spec.title = "distributions";
  spec.width = spec.height = 520;
  Panel p = wheel("");
  const auto pred = predictive_draws(fit, mix_seed(seed, 1000));
  const auto& hue = pred[3].draws;
  const Interval iv = circular_hdi(hue);
  p.layers.push_back({LayerKind::polar_band, "hdi", {iv.lo, iv.hi}, {0.0, 1.0}, mean_color(fit), false, 0.6});
  p.layers.push_back({LayerKind::polar_line, "mean", {circular_mean(fit.draws.pooled("mu_h"))}, {0.0, 1.0}, "#000000",
                      false, 1.0});
  for (const auto& pt : points) {
    p.layers.push_back({LayerKind::polar_point, "annotation", {pt[0]}, {pt[1]},
                        hex_color(hsv_to_rgb(pt[0], pt[1], pt[2])), false, 1.0});
  }
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& ln = lines[k];
    p.layers.push_back({LayerKind::polar_line, "annotation", {ln[0]}, {0.0, 1.0},
                        hex_color(hsv_to_rgb(ln[0], ln[1], ln[2])), k > 0, 1.0});
  }
  spec.panels.push_back(std::move(p));
  return spec;
}

}  // namespace psybayes

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psybayes/models.hpp"

namespace psybayes {

enum class LayerKind { histogram, line, band, vline, point, polar_band, polar_line, polar_point };

std::string_view layer_kind_name(LayerKind kind);

/// Coordinates by kind:
///   histogram    x = bin edges (n+1), y = heights (n)
///   line, point  x, y pairs
///   band         x = {lo, hi}; y = {lo, hi} or empty for the full height
///   vline        x = {position}
///   polar_band   x = {angle lo, angle hi}, y = {inner, outer radius}
///   polar_line   x = {angle}, y = {from radius, to radius}
///   polar_point  x = angles, y = radii
struct Layer {
  LayerKind kind = LayerKind::line;
  std::string role;  // emitted as a class, e.g. "chain", "fitted", "hdi"
  std::vector<double> x, y;
  std::string color = "#000000";
  bool dashed = false;
  double opacity = 1.0;
};

struct Panel {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool polar = false;
  std::vector<Layer> layers;

  std::size_t count(std::string_view role) const;
};

struct PlotSpec {
  double width = 800;
  double height = 600;
  std::string title;
  int rows = 1;
  int cols = 1;
  std::vector<Panel> panels;
};

/// Standalone SVG 1.1 document.
std::string render_svg(const PlotSpec& spec);
void write_plot(const PlotSpec& spec, const std::string& path);

/// Gaussian KDE with Silverman's bandwidth evaluated on `grid`.
std::vector<double> kde(const std::vector<double>& draws, const std::vector<double>& grid);
double silverman_bandwidth(const std::vector<double>& draws);
std::vector<double> linspace(double lo, double hi, std::size_t n);

// Figure builders. ----------------------------------------------------------------

PlotSpec trace_plot(const Fit& fit);
PlotSpec fit_plot(const Fit& fit, bool subjects);
/// `par` picks the compared quantity for fits exposing several (linear,
/// color); empty selects the first.
PlotSpec means_plot(const std::vector<const Fit*>& fits, const std::string& par = "");
PlotSpec means_difference_plot(const std::vector<const Fit*>& fits, std::optional<double> rope, std::uint64_t seed,
                               const std::string& par = "");
PlotSpec distributions_plot(const std::vector<const Fit*>& fits, std::uint64_t seed, const std::string& par = "",
                            std::optional<double> x = {});
PlotSpec distributions_difference_plot(const std::vector<const Fit*>& fits, std::optional<double> rope,
                                       std::uint64_t seed, const std::string& par = "",
                                       std::optional<double> x = {});

using HsvPoint = std::array<double, 3>;  // hue (radians), saturation, value

PlotSpec fit_hsv_plot(const Fit& fit);
PlotSpec means_hsv_plot(const Fit& fit);
PlotSpec distributions_hsv_plot(const Fit& fit, const std::vector<HsvPoint>& points,
                                const std::vector<HsvPoint>& lines, std::uint64_t seed);

}  // namespace psybayes

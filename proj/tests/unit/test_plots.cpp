#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "psybayes/compare.hpp"
#include "psybayes/diagnostics.hpp"
#include "psybayes/dists.hpp"
#include "psybayes/plots.hpp"
#include "support.hpp"

using namespace psybayes;
using psytest::expect_error;
namespace pt = boost::property_tree;

namespace {

SamplerConfig quick(std::uint64_t seed, int iter = 400, int warmup = 200) {
  SamplerConfig c;
  c.seed = seed;
  c.iter = iter;
  c.warmup = warmup;
  return c;
}

const Fit& rt_fit() {
  static const Fit fit = [] {
    Rng rng(31);
    std::vector<double> t;
    std::vector<int> s;
    for (int i = 1; i <= 3; ++i)
      for (int k = 0; k < 30; ++k) {
        t.push_back(dists::sample_emg(0.5, 0.05, 10, rng));
        s.push_back(i);
      }
    return fit_reaction_time(t, s, {}, quick(5));
  }();
  return fit;
}

const Fit& red_fit() {
  static const Fit fit = [] {
    std::vector<std::array<double, 3>> rows;
    Rng rng(7);
    for (int i = 0; i < 25; ++i)
      rows.push_back({std::clamp(250 + 3 * rng.normal(), 0.0, 255.0), std::clamp(5 + 3 * rng.normal(), 0.0, 255.0),
                      std::clamp(5 + 3 * rng.normal(), 0.0, 255.0)});
    return fit_color(rows, false, {}, quick(6));
  }();
  return fit;
}

Fit ttest_fit(double shift, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) y.push_back(shift + rng.normal());
  return fit_ttest(y, {}, quick(seed));
}

pt::ptree parse(const std::string& svg) {
  std::istringstream in(svg);
  pt::ptree tree;
  pt::read_xml(in, tree);
  return tree;
}

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

const Layer* find_layer(const Panel& p, const std::string& role, LayerKind kind) {
  for (const auto& l : p.layers)
    if (l.role == role && l.kind == kind) return &l;
  return nullptr;
}

double arc(double a, double b) { return std::abs(std::remainder(a - b, dists::kTwoPi)); }

}  // namespace

TEST_CASE("rendered documents are well-formed svg") {
  const auto& fit = rt_fit();
  for (const auto& spec : {trace_plot(fit), fit_plot(fit, false), fit_plot(fit, true)}) {
    const auto svg = render_svg(spec);
    pt::ptree tree;
    REQUIRE_NOTHROW(tree = parse(svg));
    REQUIRE(tree.size() == 1);
    CHECK(tree.begin()->first == "svg");
    CHECK(tree.get<std::string>("svg.<xmlattr>.xmlns") == "http://www.w3.org/2000/svg");
  }
  REQUIRE_NOTHROW(parse(render_svg(fit_hsv_plot(red_fit()))));
}

TEST_CASE("trace plot has one line per chain and a warmup band") {
  const auto& fit = rt_fit();
  const auto spec = trace_plot(fit);
  REQUIRE(!spec.panels.empty());
  for (const auto& p : spec.panels) {
    CHECK(p.count("chain") == 4);
    const auto* band = find_layer(p, "warmup", LayerKind::band);
    REQUIRE(band);
    CHECK(band->x[0] == 1.0);
    CHECK(band->x[1] == 200.0);
    for (const auto& l : p.layers)
      if (l.role == "chain") CHECK(l.x.size() == 400);
  }
  const auto svg = render_svg(spec);
  CHECK(occurrences(svg, R"(<polyline class="chain")") == 4 * spec.panels.size());
  CHECK(occurrences(svg, R"(class="band warmup")") == spec.panels.size());
}

TEST_CASE("reaction-time fit plots") {
  const auto& fit = rt_fit();
  const auto group = fit_plot(fit, false);
  REQUIRE(group.panels.size() == 1);
  CHECK(group.panels[0].count("fitted") == 1);
  CHECK(occurrences(render_svg(group), R"(<polyline class="fitted")") == 1);

  // The fitted curve at the data median is a positive density.
  auto t = fit.data.column("t");
  std::sort(t.begin(), t.end());
  const double median = quantile_sorted(t, 0.5);
  const auto* curve = find_layer(group.panels[0], "fitted", LayerKind::line);
  REQUIRE(curve);
  const auto it = std::lower_bound(curve->x.begin(), curve->x.end(), median);
  REQUIRE(it != curve->x.end());
  const double y = curve->y[static_cast<std::size_t>(it - curve->x.begin())];
  CHECK(std::isfinite(y));
  CHECK(y > 0);

  const auto per = fit_plot(fit, true);
  CHECK(per.panels.size() == 3);
  for (const auto& p : per.panels) CHECK(p.count("fitted") == 1);
}

TEST_CASE("subject-level plots need a hierarchical fit") {
  const auto tt = ttest_fit(0, 41);
  expect_error(ErrorKind::unsupported, [&] { fit_plot(tt, true); });
  expect_error(ErrorKind::unsupported, [&] { fit_plot(red_fit(), true); });
  CHECK(fit_plot(red_fit(), false).panels.size() == 6);
}

TEST_CASE("difference plot annotations agree with compare") {
  const auto a = ttest_fit(0, 42), b = ttest_fit(0.5, 43);
  const std::vector<const Fit*> fits{&a, &b};
  const std::uint64_t seed = 99;
  const auto spec = means_difference_plot(fits, 0.01, seed);
  REQUIRE(spec.panels.size() == 1);
  const auto& p = spec.panels[0];
  const auto* rope = find_layer(p, "rope", LayerKind::band);
  const auto* band = find_layer(p, "hdi", LayerKind::band);
  REQUIRE(rope);
  REQUIRE(band);
  CHECK(rope->x[0] == -0.01);
  CHECK(rope->x[1] == 0.01);

  const auto cmp = compare_means(fits, 0.01, seed);
  std::size_t k = 0;
  while (cmp[k].name != "mu") ++k;
  const auto& r = cmp[k].pairs.at(0).result;
  CHECK(band->x[0] == r.hdi.lo);
  CHECK(band->x[1] == r.hdi.hi);

  // Same numbers survive into the document.
  const auto svg = render_svg(spec);
  CHECK(svg.find(fmt::format(R"(data-lo="{:.17g}")", r.hdi.lo)) != std::string::npos);
  CHECK(svg.find(fmt::format(R"(data-hi="{:.17g}")", r.hdi.hi)) != std::string::npos);

  const auto none = means_difference_plot(fits, std::nullopt, seed);
  CHECK(find_layer(none.panels[0], "rope", LayerKind::band) == nullptr);
  expect_error(ErrorKind::argument, [&] { means_difference_plot(fits, -1.0, seed); });
}

TEST_CASE("four fits give a four by four grid") {
  std::vector<Fit> owned;
  for (int i = 0; i < 4; ++i) owned.push_back(ttest_fit(0.3 * i, 50 + static_cast<std::uint64_t>(i)));
  std::vector<const Fit*> fits;
  for (const auto& f : owned) fits.push_back(&f);
  const auto spec = means_difference_plot(fits, std::nullopt, 3);
  CHECK(spec.rows == 4);
  CHECK(spec.cols == 4);
  REQUIRE(spec.panels.size() == 16);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const auto& p = spec.panels[i * 4 + j];
      if (i == j) CHECK(p.count("density") == 1);
      else CHECK(p.count("difference") == 1);
    }
  CHECK(occurrences(render_svg(spec), R"(<g class="panel)") == 16);
  const auto dist = distributions_difference_plot(fits, 0.1, 3);
  CHECK(dist.panels.size() == 16);
}

TEST_CASE("hsv plots") {
  const auto& fit = red_fit();
  const auto spec = fit_hsv_plot(fit);
  REQUIRE(spec.panels.size() == 1);
  const auto& p = spec.panels[0];
  CHECK(p.polar);
  const auto* mean = find_layer(p, "mean", LayerKind::polar_line);
  REQUIRE(mean);
  CHECK(arc(mean->x[0], 0.0) < 0.05);
  const auto* band = find_layer(p, "hdi", LayerKind::polar_band);
  REQUIRE(band);
  CHECK(band->x[1] - band->x[0] >= 0);
  CHECK(band->x[1] - band->x[0] <= dists::kTwoPi);
  const auto iv = circular_hdi(fit.draws.pooled("mu_h"));
  CHECK(band->x[0] == iv.lo);
  CHECK(band->x[1] == iv.hi);

  const auto means = means_hsv_plot(fit);
  CHECK(means.panels[0].count("hdi") == 1);

  const std::vector<HsvPoint> points{{0.1, 0.9, 0.9}};
  const std::vector<HsvPoint> lines{{0.0, 1.0, 1.0}, {2.0, 1.0, 1.0}};
  const auto dist = distributions_hsv_plot(fit, points, lines, 17);
  const auto& dp = dist.panels[0];
  std::size_t annotation_lines = 0, dashed = 0;
  for (const auto& l : dp.layers)
    if (l.role == "annotation" && l.kind == LayerKind::polar_line) {
      ++annotation_lines;
      dashed += l.dashed;
    }
  CHECK(annotation_lines == 2);
  CHECK(dashed == 1);
  const auto* dband = find_layer(dp, "hdi", LayerKind::polar_band);
  REQUIRE(dband);
  CHECK(dband->x[1] - dband->x[0] <= dists::kTwoPi);
  const auto svg = render_svg(dist);
  CHECK(occurrences(svg, R"(class="polar-line annotation")") == 2);
  CHECK(occurrences(svg, "stroke-dasharray") == 1);

  const auto tt = ttest_fit(0, 44);
  expect_error(ErrorKind::unsupported, [&] { fit_hsv_plot(tt); });
  expect_error(ErrorKind::unsupported, [&] { means_hsv_plot(tt); });
  expect_error(ErrorKind::unsupported, [&] { distributions_hsv_plot(tt, {}, {}, 1); });
}

TEST_CASE("rendering is deterministic") {
  const auto a = ttest_fit(0, 45), b = ttest_fit(1, 46);
  const std::vector<const Fit*> fits{&a, &b};
  CHECK(render_svg(means_difference_plot(fits, 0.1, 8)) == render_svg(means_difference_plot(fits, 0.1, 8)));
  CHECK(render_svg(distributions_plot(fits, 8)) == render_svg(distributions_plot(fits, 8)));
  CHECK(render_svg(trace_plot(rt_fit())) == render_svg(trace_plot(rt_fit())));
}

TEST_CASE("kde and helpers") {
  const auto g = linspace(-1, 1, 5);
  CHECK(g == std::vector<double>{-1, -0.5, 0, 0.5, 1});
  std::vector<double> d;
  Rng rng(3);
  for (int i = 0; i < 20000; ++i) d.push_back(rng.normal());
  const double bw = silverman_bandwidth(d);
  CHECK(bw == doctest::Approx(0.9 * std::pow(20000.0, -0.2)).epsilon(0.05));
  const auto grid = linspace(-6, 6, 1201);
  const auto dens = kde(d, grid);
  double mass = 0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) mass += 0.5 * (dens[i] + dens[i + 1]) * (grid[i + 1] - grid[i]);
  CHECK(mass == doctest::Approx(1).epsilon(1e-3));
  CHECK(dens[600] == doctest::Approx(1 / std::sqrt(2 * M_PI)).epsilon(0.03));
}

TEST_CASE("write_plot reports io errors") {
  const auto spec = trace_plot(rt_fit());
  expect_error(ErrorKind::io, [&] { write_plot(spec, "/nonexistent-dir/x/plot.svg"); });
}

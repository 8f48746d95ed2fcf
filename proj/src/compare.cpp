#include "psybayes/compare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "psybayes/dists.hpp"
#include "psybayes/error.hpp"

namespace psybayes {

namespace {

NamedSeries series(const Fit& fit, const std::string& label, const std::string& param) {
  return {label, fit.draws.pooled(param), fit.param(param).constraint.kind == ConstraintKind::circular};
}

const std::vector<std::string>& color_components() {
  static const std::vector<std::string> names{"r", "g", "b", "h", "s", "v"};
  return names;
}

double mc_se(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

}  // namespace

std::vector<NamedSeries> mean_draws(const Fit& fit) {
  switch (fit.kind) {
    case ModelKind::ttest: return {series(fit, "mu", "mu")};
    case ModelKind::reaction_time: return {series(fit, "rt", "rt")};
    case ModelKind::success_rate: return {series(fit, "p", "p")};
    case ModelKind::linear: return {series(fit, "intercept", "mu_a"), series(fit, "slope", "mu_b")};
    case ModelKind::color: {
      std::vector<NamedSeries> out;
      for (const auto& c : color_components()) out.push_back(series(fit, c, "mu_" + c));
      return out;
    }
  }
  return {};
}

std::vector<NamedSeries> predictive_draws(const Fit& fit, std::uint64_t seed, std::optional<double> x) {
  Rng rng(seed);
  const auto& d = fit.draws;
  auto col = [&](const char* name) { return d.pooled(name); };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<NamedSeries> out;
  switch (fit.kind) {
    case ModelKind::ttest: {
      const auto nu = col("nu"), mu = col("mu"), sigma = col("sigma");
      NamedSeries s{"y", {}, false};
      for (std::size_t i = 0; i < mu.size(); ++i) s.draws.push_back(dists::sample_scaled_t(nu[i], mu[i], sigma[i], rng));
      out.push_back(std::move(s));
      break;
    }
    case ModelKind::reaction_time: {
      const auto mu_m = col("mu_m"), sigma_m = col("sigma_m"), mu_s = col("mu_s"), sigma_s = col("sigma_s"),
                 mu_l = col("mu_l"), sigma_l = col("sigma_l");
      NamedSeries s{"rt", {}, false};
      for (std::size_t i = 0; i < mu_m.size(); ++i) {
        const double mu = dists::sample_normal(mu_m[i], sigma_m[i], rng);
        const double sigma = dists::sample_truncnorm(mu_s[i], sigma_s[i], 0.0, inf, rng);
        const double lambda = dists::sample_truncnorm(mu_l[i], sigma_l[i], 0.0, inf, rng);
        s.draws.push_back(dists::sample_emg(mu, sigma, lambda, rng));
      }
      out.push_back(std::move(s));
      break;
    }
    case ModelKind::success_rate: {
      const auto p = col("p"), tau = col("tau");
      NamedSeries s{"success", {}, false};
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = dists::sample_beta(p[i] * tau[i], (1.0 - p[i]) * tau[i], rng);
        s.draws.push_back(rng.uniform() < pi ? 1.0 : 0.0);
      }
      out.push_back(std::move(s));
      break;
    }
    case ModelKind::linear: {
      if (!x) fail(ErrorKind::argument, "predictive draws of a linear fit need a predictor value x");
      const double xv = *x;
      const auto mu_a = col("mu_a"), sigma_a = col("sigma_a"), mu_b = col("mu_b"), sigma_b = col("sigma_b"),
                 mu_s = col("mu_s"), sigma_s = col("sigma_s");
      NamedSeries s{"y", {}, false};
      for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double a = dists::sample_normal(mu_a[i], sigma_a[i], rng);
        const double b = dists::sample_normal(mu_b[i], sigma_b[i], rng);
        const double sd = dists::sample_truncnorm(mu_s[i], sigma_s[i], 0.0, inf, rng);
        s.draws.push_back(dists::sample_normal(a + b * xv, sd, rng));
      }
      out.push_back(std::move(s));
      break;
    }
    case ModelKind::color: {
      for (const auto& c : color_components()) {
        NamedSeries s{c, {}, c == "h"};
        if (c == "h") {
          const auto mu = col("mu_h"), kappa = col("kappa_h");
          for (std::size_t i = 0; i < mu.size(); ++i) s.draws.push_back(dists::sample_vonmises(mu[i], kappa[i], rng));
        } else {
          const double hi = (c == "s" || c == "v") ? 1.0 : 255.0;
          const auto mu = d.pooled("mu_" + c), sigma = d.pooled("sigma_" + c);
          for (std::size_t i = 0; i < mu.size(); ++i)
            s.draws.push_back(dists::sample_truncnorm(mu[i], sigma[i], 0.0, hi, rng));
        }
        out.push_back(std::move(s));
      }
      break;
    }
  }
  return out;
}

void shuffle(std::vector<double>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.bounded(i));
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<std::vector<double>> align_series(std::vector<std::vector<double>> series, std::uint64_t seed) {
  std::size_t n = series.empty() ? 0 : series.front().size();
  for (std::size_t i = 0; i < series.size(); ++i) {
    Rng rng = Rng::substream(seed, i);
    shuffle(series[i], rng);
    n = std::min(n, series[i].size());
  }
  for (auto& s : series) s.resize(n);
  return series;
}

double difference(double a, double b, bool circular) {
  if (!circular) return a - b;
  double d = std::remainder(a - b, dists::kTwoPi);
  if (d <= -M_PI) d += dists::kTwoPi;
  return d;
}

ComparisonResult compare_pair(const std::vector<double>& a, const std::vector<double>& b, std::optional<double> rope,
                              bool circular) {
  if (rope && !(*rope >= 0)) fail(ErrorKind::argument, "rope must be non-negative");
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) fail(ErrorKind::comparison, "need at least 2 paired draws");
  std::vector<double> d(n);
  std::size_t lt = 0, gt = 0;
  const double r = rope.value_or(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = difference(a[i], b[i], circular);
    if (d[i] < -r) {
      ++lt;
    } else if (d[i] > r) {
      ++gt;
    }
  }
  ComparisonResult out;
  out.n = n;
  out.rope = rope;
  const double nd = static_cast<double>(n);
  const std::size_t eq = n - lt - gt;
  if (rope) {
    out.p_smaller = static_cast<double>(lt) / nd;
    out.p_greater = static_cast<double>(gt) / nd;
    out.p_equal = 1.0 - (out.p_smaller + out.p_greater);
  } else {
    out.p_smaller = (static_cast<double>(lt) + 0.5 * static_cast<double>(eq)) / nd;
    out.p_greater = 1.0 - out.p_smaller;
    out.p_equal = 0.0;
  }
  out.se_smaller = mc_se(out.p_smaller, n);
  out.se_greater = mc_se(out.p_greater, n);
  out.se_equal = mc_se(out.p_equal, n);
  out.hdi = hdi(std::move(d));
  return out;
}

std::vector<double> pair_difference(std::vector<double> a, std::vector<double> b, std::uint64_t seed, bool circular) {
  auto aligned = align_series({std::move(a), std::move(b)}, seed);
  std::vector<double> d(aligned[0].size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = difference(aligned[0][i], aligned[1][i], circular);
  return d;
}

RolesTable roles_probabilities(const std::vector<std::vector<double>>& aligned, double rope) {
  if (!(rope >= 0)) fail(ErrorKind::argument, "rope must be non-negative");
  const std::size_t k = aligned.size();
  if (k < 2) fail(ErrorKind::comparison, "roles need at least 2 groups");
  std::size_t n = aligned.front().size();
  for (const auto& s : aligned) n = std::min(n, s.size());
  if (n == 0) fail(ErrorKind::comparison, "roles need draws");
  // integer counts; tie[g][m] counts draws where g shares the extreme with m - 1 others
  std::vector<std::size_t> top_alone(k, 0), bottom_alone(k, 0);
  std::vector<std::vector<std::size_t>> top_tie(k, std::vector<std::size_t>(k + 1, 0)), bottom_tie = top_tie;
  std::vector<std::size_t> top, bottom;
  for (std::size_t j = 0; j < n; ++j) {
    double hi = aligned[0][j], lo = aligned[0][j];
    for (std::size_t g = 1; g < k; ++g) {
      hi = std::max(hi, aligned[g][j]);
      lo = std::min(lo, aligned[g][j]);
    }
    top.clear();
    bottom.clear();
    for (std::size_t g = 0; g < k; ++g) {
      if (hi - aligned[g][j] <= rope) top.push_back(g);
      if (aligned[g][j] - lo <= rope) bottom.push_back(g);
    }
    if (top.size() == 1) {
      ++top_alone[top[0]];
    } else {
      for (auto g : top) ++top_tie[g][top.size()];
    }
    if (bottom.size() == 1) {
      ++bottom_alone[bottom[0]];
    } else {
      for (auto g : bottom) ++bottom_tie[g][bottom.size()];
    }
  }
  const double nd = static_cast<double>(n);
  auto shared = [&](const std::vector<std::size_t>& c) {
    double v = 0.0;
    for (std::size_t m = 2; m <= k; ++m) v += static_cast<double>(c[m]) / static_cast<double>(m);
    return v / nd;
  };
  RolesTable t;
  for (std::size_t g = 0; g < k; ++g) {
    t.largest.push_back(static_cast<double>(top_alone[g]) / nd);
    t.smallest.push_back(static_cast<double>(bottom_alone[g]) / nd);
    t.equal_largest.push_back(shared(top_tie[g]));
    t.equal_smallest.push_back(shared(bottom_tie[g]));
  }
  return t;
}

std::vector<SeriesComparison> compare_series(const std::vector<std::vector<NamedSeries>>& per_fit,
                                             std::optional<double> rope, std::uint64_t seed) {
  if (per_fit.size() < 2) fail(ErrorKind::comparison, "need at least 2 fits to compare");
  if (rope && !(*rope >= 0)) fail(ErrorKind::argument, "rope must be non-negative");
  const std::size_t ns = per_fit.front().size();
  for (const auto& f : per_fit) {
    if (f.size() != ns) fail(ErrorKind::comparison, "fits expose different quantities");
  }
  std::vector<SeriesComparison> out;
  for (std::size_t k = 0; k < ns; ++k) {
    std::vector<std::vector<double>> raw;
    for (const auto& f : per_fit) raw.push_back(f[k].draws);
    const auto aligned = align_series(std::move(raw), mix_seed(seed, k));
    SeriesComparison sc;
    sc.name = per_fit.front()[k].name;
    sc.circular = per_fit.front()[k].circular;
    for (std::size_t i = 0; i < aligned.size(); ++i) {
      for (std::size_t j = i + 1; j < aligned.size(); ++j) {
        sc.pairs.push_back({static_cast<int>(i), static_cast<int>(j),
                            compare_pair(aligned[i], aligned[j], rope, sc.circular)});
      }
    }
    if (aligned.size() > 2 && !sc.circular) sc.roles = roles_probabilities(aligned, rope.value_or(0.0));
    out.push_back(std::move(sc));
  }
  return out;
}

namespace {

void check_fits(const std::vector<const Fit*>& fits) {
  if (fits.size() < 2) fail(ErrorKind::comparison, "need at least 2 fits to compare");
  for (const Fit* f : fits) {
    if (f->kind != fits.front()->kind)
      fail(ErrorKind::comparison, fmt::format("cannot compare a {} fit with a {} fit", model_kind_name(f->kind),
                                              model_kind_name(fits.front()->kind)));
  }
}

}  // namespace

std::vector<SeriesComparison> compare_means(const std::vector<const Fit*>& fits, std::optional<double> rope,
                                            std::uint64_t seed) {
  check_fits(fits);
  std::vector<std::vector<NamedSeries>> per_fit;
  for (const Fit* f : fits) per_fit.push_back(mean_draws(*f));
  return compare_series(per_fit, rope, seed);
}

std::vector<SeriesComparison> compare_distributions(const std::vector<const Fit*>& fits, std::optional<double> rope,
                                                    std::uint64_t seed, std::optional<double> x) {
  check_fits(fits);
  std::vector<std::vector<NamedSeries>> per_fit;
  for (std::size_t i = 0; i < fits.size(); ++i) per_fit.push_back(predictive_draws(*fits[i], mix_seed(seed, 1000 + i), x));
  return compare_series(per_fit, rope, seed);
}

namespace {

std::string heading(const std::string& name) {
  std::string s = name;
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

std::string format_comparison(const std::vector<SeriesComparison>& comparisons, ModelKind kind) {
  std::string out;
  const bool named = comparisons.size() > 1 || kind == ModelKind::linear || kind == ModelKind::color;
  for (const auto& sc : comparisons) {
    if (named) out += fmt::format("---------- {} ----------\n", heading(sc.name));
    for (const auto& pr : sc.pairs) {
      const auto& r = pr.result;
      const int a = pr.a + 1, b = pr.b + 1;
      if (!named) {
        out += fmt::format("---------- Group {} vs Group {} ----------\n", a, b);
      } else if (sc.pairs.size() > 1) {
        out += fmt::format("Group {} vs Group {}\n", a, b);
      }
      out += "Probabilities:\n";
      out += fmt::format("  - Group {} < Group {}: {:.2f} +/- {:.5f}\n", a, b, r.p_smaller, r.se_smaller);
      out += fmt::format("  - Group {} > Group {}: {:.2f} +/- {:.5f}\n", a, b, r.p_greater, r.se_greater);
      if (r.rope) out += fmt::format("  - Equal: {:.2f} +/- {:.5f}\n", r.p_equal, r.se_equal);
      out += "95% HDI:\n";
      out += fmt::format("  - Group {} - Group {}: [{:.2f}, {:.2f}]\n", a, b, r.hdi.lo, r.hdi.hi);
      out += "\n";
    }
    if (sc.roles) {
      const auto& t = *sc.roles;
      out += "-----------------------------------------\n";
      out += "Probabilities that a certain group is\nsmallest/largest or equal to all others:\n\n";
      out += fmt::format("{:<10}{:>9}{:>9}{:>7}\n", "", "largest", "smallest", "equal");
      for (std::size_t g = 0; g < t.largest.size(); ++g) {
        out += fmt::format("{:<10}{:>9.2f}{:>9.2f}{:>7.2f}\n", fmt::format("Group {}", g + 1), t.largest[g],
                           t.smallest[g], t.equal_largest[g] + t.equal_smallest[g]);
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace psybayes

#include "psybayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "psybayes/dists.hpp"
#include "psybayes/error.hpp"

namespace psybayes {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_chains(const ChainDraws& chains) {
  if (chains.empty()) fail(ErrorKind::argument, "no chains");
  for (const auto& c : chains) {
    if (c.size() < 4) fail(ErrorKind::argument, "need at least 4 draws per chain");
    if (c.size() != chains.front().size()) fail(ErrorKind::argument, "chains differ in length");
  }
}

double variance(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt(variance(v, mean_of(v)));
}

Diagnostic split_rhat(const ChainDraws& chains) {
  check_chains(chains);
  const std::size_t len = chains.front().size();
  const std::size_t half = len / 2;
  std::vector<std::vector<double>> parts;
  for (const auto& c : chains) {
    parts.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    parts.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  const double n = static_cast<double>(half);
  std::vector<double> means;
  double w = 0.0;
  for (const auto& p : parts) {
    const double m = mean_of(p);
    means.push_back(m);
    w += variance(p, m);
  }
  w /= static_cast<double>(parts.size());
  if (!(w > 0)) return {kNaN, true, false};
  const double b = n * variance(means, mean_of(means));
  const double var_plus = (n - 1.0) / n * w + b / n;
  return {std::sqrt(var_plus / w), false, false};
}

Diagnostic ess(const ChainDraws& chains) {
  check_chains(chains);
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  const double nd = static_cast<double>(n);

  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    vars[c] = variance(chains[c], means[c]);
  }
  const double mean_var = mean_of(vars);
  if (!(mean_var > 0)) return {kNaN, true, false};
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += variance(means, mean_of(means));

  // Chain-averaged autocovariance at one lag (1/n normalization).
  auto acov = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& x = chains[c];
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - means[c]) * (x[i + lag] - means[c]);
      total += s / nd;
    }
    return total / static_cast<double>(m);
  };

  std::vector<double> rho(n + 2, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - acov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 1;
  while (t + 5 < n && rho_even + rho_odd > 0) {
    rho_even = 1.0 - (mean_var - acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (rho_even > 0) rho[max_t + 1] = rho_even;

  // Initial monotone sequence.
  for (std::size_t k = 1; k + 3 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = 0.5 * (rho[k - 1] + rho[k]);
      rho[k + 2] = rho[k + 1];
    }
  }

  const double total = static_cast<double>(m) * nd;
  double tau = -1.0;
  for (std::size_t k = 0; k <= max_t; ++k) tau += 2.0 * rho[k];
  tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  Diagnostic out{total / tau, false, false};
  if (out.value > kEssCap * total) {
    out.value = kEssCap * total;
    out.capped = true;
  }
  return out;
}

Interval hdi(std::vector<double> draws, double prob) {
  if (!(prob > 0 && prob <= 1)) fail(ErrorKind::argument, "HDI probability must lie in (0, 1]");
  if (draws.size() < 2) fail(ErrorKind::data, "HDI needs at least 2 draws");
  for (double v : draws) {
    if (!std::isfinite(v)) fail(ErrorKind::data, "HDI draws must be finite");
  }
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  auto k = static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n) - 1e-9));
  k = std::min(std::max<std::size_t>(k, 1), n - 1);
  std::size_t best = 0;
  double width = draws[k] - draws[0];
  for (std::size_t i = 1; i + k < n; ++i) {
    const double w = draws[i + k] - draws[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {draws[best], draws[best + k]};
}

double circular_mean(const std::vector<double>& angles) {
  double s = 0.0, c = 0.0;
  for (double a : angles) {
    s += std::sin(a);
    c += std::cos(a);
  }
  return dists::wrap_angle(std::atan2(s, c));
}

Interval circular_hdi(const std::vector<double>& angles, double prob) {
  const double center = circular_mean(angles);
  std::vector<double> rotated;
  rotated.reserve(angles.size());
  for (double a : angles) rotated.push_back(dists::wrap_angle(a - center + M_PI));
  const Interval r = hdi(std::move(rotated), prob);
  return {r.lo + center - M_PI, r.hi + center - M_PI};
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return kNaN;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SummaryRow summarize_chains(const std::string& name, const ChainDraws& chains_in, bool circular) {
  SummaryRow row;
  row.name = name;
  ChainDraws chains = chains_in;
  double center = 0.0;
  if (circular) {
    std::vector<double> all;
    for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
    center = circular_mean(all);
    for (auto& c : chains) {
      for (auto& v : c) v = std::remainder(v - center, dists::kTwoPi);
    }
  }
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  row.mean = mean_of(pooled);
  row.sd = sd_of(pooled);
  std::sort(pooled.begin(), pooled.end());
  const double qs[5] = {0.025, 0.25, 0.5, 0.75, 0.975};
  for (int i = 0; i < 5; ++i) row.quantiles[static_cast<std::size_t>(i)] = quantile_sorted(pooled, qs[i]) + center;
  if (circular) row.mean = dists::wrap_angle(row.mean + center);

  if (chains.front().size() >= 4) {
    const Diagnostic r = split_rhat(chains);
    const Diagnostic e = ess(chains);
    row.rhat = r.value;
    row.n_eff = e.value;
    row.constant = r.constant || e.constant;
    row.ess_capped = e.capped;
  } else {
    row.rhat = kNaN;
    row.n_eff = kNaN;
  }
  row.se_mean = row.constant ? 0.0 : row.sd / std::sqrt(row.n_eff);
  if (row.constant) row.sd = 0.0;
  return row;
}

std::vector<SummaryRow> summarize(const Fit& fit, Execution execution) {
  const std::size_t n = fit.params.size();
  std::vector<SummaryRow> rows(n);
  auto one = [&](std::size_t i) {
    const auto& p = fit.params[i];
    rows[i] = summarize_chains(p.name, fit.draws.per_chain(fit.draws.index(p.name)),
                               p.constraint.kind == ConstraintKind::circular);
  };
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::size_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) one(i);
  }
  return rows;
}

namespace {

std::string num(double v, int digits = 2) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  std::string s = fmt::format("{:.{}f}", v, digits);
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace

std::string print_fit(const Fit& fit) {
  const auto rows = summarize(fit);
  std::string out;
  out += fmt::format("Inference for model: {}.\n", model_kind_name(fit.kind));
  out += fmt::format("{} chains, each with iter={}; warmup={}; thin=1;\n", fit.config.chains, fit.config.iter,
                     fit.config.warmup);
  out += fmt::format("post-warmup draws per chain={}, total post-warmup draws={}.\n\n", fit.draws.samples,
                     fit.draws.samples * fit.draws.chains);
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  width += 2;
  out += fmt::format("{:<{}}{:>8}{:>8}{:>8}{:>9}{:>9}{:>9}{:>9}{:>9}{:>7}{:>6}\n", "", width, "mean", "se_mean",
                     "sd", "2.5%", "25%", "50%", "75%", "97.5%", "n_eff", "Rhat");
  for (const auto& r : rows) {
    out += fmt::format("{:<{}}{:>8}{:>8}{:>8}{:>9}{:>9}{:>9}{:>9}{:>9}{:>7}{:>6}\n", r.name, width, num(r.mean),
                       num(r.se_mean), num(r.sd), num(r.quantiles[0]), num(r.quantiles[1]), num(r.quantiles[2]),
                       num(r.quantiles[3]), num(r.quantiles[4]), num(r.n_eff, 0), num(r.rhat));
  }
  const int div = fit.draws.divergences();
  if (div > 0) out += fmt::format("\n{} divergent transitions after warmup.\n", div);
  return out;
}

namespace {

struct SummaryItem {
  const char* label;
  const char* param;
};

std::vector<SummaryItem> summary_items(ModelKind kind) {
  switch (kind) {
    case ModelKind::ttest: return {{"mu", "mu"}, {"sigma", "sigma"}, {"nu", "nu"}};
    case ModelKind::reaction_time:
      return {{"rt", "rt"}, {"mu", "mu_m"}, {"sigma", "mu_s"}, {"lambda", "mu_l"}};
    case ModelKind::success_rate: return {{"success rate", "p"}, {"tau", "tau"}};
    case ModelKind::linear: return {{"intercept (alpha)", "mu_a"}, {"slope (beta)", "mu_b"}, {"sigma", "mu_s"}};
    case ModelKind::color:
      return {{"r", "mu_r"}, {"g", "mu_g"}, {"b", "mu_b"}, {"h", "mu_h"}, {"s", "mu_s"}, {"v", "mu_v"}};
  }
  return {};
}

}  // namespace

std::string summary_text(const Fit& fit) {
  std::string out;
  for (const auto& item : summary_items(fit.kind)) {
    const auto& info = fit.param(item.param);
    const bool circular = info.constraint.kind == ConstraintKind::circular;
    const auto chains = fit.draws.per_chain(fit.draws.index(item.param));
    const SummaryRow row = summarize_chains(item.param, chains, circular);
    const auto pooled = fit.draws.pooled(item.param);
    const Interval iv = circular ? circular_hdi(pooled) : hdi(pooled);
    out += fmt::format("{:<20}{} +/- {}, 95% HDI: [{}, {}]\n", std::string(item.label) + ":", num(row.mean),
                       num(row.se_mean, 5), num(iv.lo), num(iv.hi));
  }
  return out;
}

ConvergenceReport convergence(const Fit& fit) {
  ConvergenceReport report;
  for (const auto& row : summarize(fit)) {
    if (std::isnan(row.rhat)) continue;
    if (row.rhat > report.max_rhat) {
      report.max_rhat = row.rhat;
      report.worst = row.name;
    }
  }
  report.divergences = fit.draws.divergences();
  report.saturated = fit.draws.saturated_treedepth(fit.config.max_treedepth);
  return report;
}

std::string diagnose_text(const Fit& fit) {
  const auto rows = summarize(fit);
  const auto report = convergence(fit);
  std::string out;
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  width += 2;
  out += fmt::format("{:<{}}{:>8}{:>8}  {}\n", "", width, "n_eff", "Rhat", "status");
  for (const auto& r : rows) {
    std::string status = "ok";
    if (r.constant) {
      status = "constant";
    } else if (r.rhat > 1.1) {
      status = "not converged";
    } else if (r.rhat > 1.01) {
      status = "check";
    }
    if (r.ess_capped) status += " (n_eff capped)";
    out += fmt::format("{:<{}}{:>8}{:>8}  {}\n", r.name, width, num(r.n_eff, 0), num(r.rhat, 3), status);
  }
  out += fmt::format("\nmax Rhat: {} ({})\n", num(report.max_rhat, 3), report.worst.empty() ? "-" : report.worst);
  out += fmt::format("divergent transitions after warmup: {}\n", report.divergences);
  out += fmt::format("iterations at max treedepth ({}): {}\n", fit.config.max_treedepth, report.saturated);
  return out;
}

}  // namespace psybayes

// psybayes command-line front end.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "psybayes/bootstrap.hpp"
#include "psybayes/compare.hpp"
#include "psybayes/diagnostics.hpp"
#include "psybayes/error.hpp"
#include "psybayes/io.hpp"
#include "psybayes/models.hpp"
#include "psybayes/plots.hpp"

using namespace psybayes;

namespace {

constexpr double kRhatFail = 1.1;
constexpr double kRhatWarn = 1.01;

struct FitOptions {
  std::string data;
  std::vector<std::string> filters;
  std::vector<std::string> priors;
  std::string out;
  bool force = false;
  bool remap = false;
  SamplerConfig config;
  // column flags
  std::string col_y = "y";
  std::string col_t = "rt";
  std::string col_s = "subject";
  std::string col_r = "result";
  std::string col_x = "x";
  std::string binarize;
  std::string columns;
  bool hsv = false;
};

void add_common_fit_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--data", o.data, "CSV or TSV file with a header row")->required();
  cmd->add_option("--filter", o.filters, "keep rows where col=value (repeatable)");
  cmd->add_option("--prior", o.priors, "prior as name:family(a,b), e.g. mu_m:normal(0,1) (repeatable)");
  cmd->add_option("--out", o.out, "fit file to write")->required();
  cmd->add_flag("--force", o.force, "write the fit even when Rhat exceeds 1.1");
  cmd->add_option("--iter", o.config.iter, "iterations per chain, warmup included")->capture_default_str();
  cmd->add_option("--warmup", o.config.warmup, "warmup iterations per chain (default iter/2)");
  cmd->add_option("--chains", o.config.chains, "number of chains")->capture_default_str();
  cmd->add_option("--seed", o.config.seed, "random seed")->capture_default_str();
  cmd->add_option("--adapt-delta", o.config.target_accept, "target acceptance rate")->capture_default_str();
  cmd->add_option("--max-treedepth", o.config.max_treedepth, "maximum tree depth")->capture_default_str();
}

void add_subject_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--col-s", o.col_s, "subject column")->capture_default_str();
  cmd->add_flag("--remap-subjects", o.remap, "compact subject ids to 1..n preserving order");
}

Table load_table(const FitOptions& o) {
  Table t = read_table(o.data);
  for (const auto& f : o.filters) {
    const auto [col, value] = parse_assignment(f);
    t = t.filter(col, value);
  }
  return t;
}

std::vector<int> subjects(const Table& t, const FitOptions& o) {
  auto s = t.integer(o.col_s);
  return o.remap ? remap_subjects(s) : s;
}

PriorMap priors_of(const FitOptions& o) {
  PriorMap map;
  for (const auto& p : o.priors) {
    auto [name, spec] = parse_prior_assignment(p);
    map.set(name, std::move(spec));
  }
  return map;
}

std::vector<double> triple(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string cell = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      fail(ErrorKind::argument, fmt::format("expected three numbers, got '{}'", text));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.size() != 3) fail(ErrorKind::argument, fmt::format("expected three numbers, got '{}'", text));
  return out;
}

int finish_fit(const Fit& fit, const FitOptions& o) {
  const auto report = convergence(fit);
  if (report.max_rhat > kRhatFail && !o.force) {
    std::cerr << fmt::format("error [convergence]: Rhat {:.3f} for {} exceeds {}; rerun with more iterations or "
                             "pass --force\n",
                             report.max_rhat, report.worst, kRhatFail);
    return 2;
  }
  if (report.max_rhat > kRhatWarn)
    std::cerr << fmt::format("warning: Rhat {:.3f} for {} exceeds {}\n", report.max_rhat, report.worst, kRhatWarn);
  if (report.divergences > 0)
    std::cerr << fmt::format("warning: {} divergent transitions after warmup\n", report.divergences);
  save_fit(fit, o.out);
  std::cout << summary_text(fit);
  return 0;
}

SamplerConfig config_of(FitOptions& o, const CLI::App* cmd) {
  SamplerConfig c = o.config;
  if (cmd->count("--warmup") == 0) c.warmup = c.iter / 2;
  return c;
}

std::optional<double> optional_value(const CLI::App* cmd, const char* name, double value) {
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  if (opt == nullptr || opt->count() == 0) return std::nullopt;
  return value;
}

struct FitList {
  std::string a, b;
  std::vector<std::string> more;

  std::vector<Fit> load() const {
    std::vector<Fit> fits;
    if (!a.empty()) fits.push_back(load_fit(a));
    if (!b.empty()) fits.push_back(load_fit(b));
    for (const auto& p : more) fits.push_back(load_fit(p));
    return fits;
  }
};

void add_fit_list(CLI::App* cmd, FitList& f) {
  cmd->add_option("--fit-a", f.a, "first fit file");
  cmd->add_option("--fit-b", f.b, "second fit file");
  cmd->add_option("--fit", f.more, "further fit files (repeatable)");
}

std::vector<const Fit*> pointers(const std::vector<Fit>& fits) {
  std::vector<const Fit*> out;
  for (const auto& f : fits) out.push_back(&f);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian models for psychological data"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // fit ------------------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "fit a model and write a fit file");
  fit->require_subcommand(1);
  FitOptions fo;
  auto* cmd_ttest = fit->add_subcommand("ttest", "robust t model of one sample");
  add_common_fit_options(cmd_ttest, fo);
  cmd_ttest->add_option("--col-y", fo.col_y, "value column")->capture_default_str();

  auto* cmd_rt = fit->add_subcommand("reaction-time", "hierarchical ex-Gaussian reaction times");
  add_common_fit_options(cmd_rt, fo);
  add_subject_options(cmd_rt, fo);
  cmd_rt->add_option("--col-t", fo.col_t, "reaction time column")->capture_default_str();

  auto* cmd_sr = fit->add_subcommand("success-rate", "hierarchical success rates");
  add_common_fit_options(cmd_sr, fo);
  add_subject_options(cmd_sr, fo);
  cmd_sr->add_option("--col-r", fo.col_r, "0/1 result column")->capture_default_str();
  cmd_sr->add_option("--binarize", fo.binarize, "col=value; rows matching become 1, others 0");

  auto* cmd_lin = fit->add_subcommand("linear", "hierarchical linear regression");
  add_common_fit_options(cmd_lin, fo);
  add_subject_options(cmd_lin, fo);
  cmd_lin->add_option("--col-x", fo.col_x, "predictor column")->capture_default_str();
  cmd_lin->add_option("--col-y", fo.col_y, "response column")->capture_default_str();

  auto* cmd_color = fit->add_subcommand("color", "colors in RGB and HSV");
  add_common_fit_options(cmd_color, fo);
  cmd_color->add_option("--columns", fo.columns, "three comma-separated columns (default r,g,b or h,s,v)");
  cmd_color->add_flag("--hsv", fo.hsv, "input is HSV (hue in radians, s and v in [0,1])");

  // inspection -------------------------------------------------------------------
  std::string fit_path;
  auto* summary = app.add_subcommand("summary", "main quantities with MCSE and 95% HDI");
  summary->add_option("--fit", fit_path, "fit file")->required();
  auto* print = app.add_subcommand("print", "full parameter table");
  print->add_option("--fit", fit_path, "fit file")->required();
  auto* diagnose = app.add_subcommand("diagnose", "Rhat, n_eff, divergences and tree depth");
  diagnose->add_option("--fit", fit_path, "fit file")->required();

  // compare ----------------------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "compare fits of the same model");
  compare->require_subcommand(1);
  FitList cmp_fits;
  double rope = 0.0;
  double xval = 0.0;
  std::uint64_t seed = 1;
  auto* cmp_means = compare->add_subcommand("means", "compare group means");
  auto* cmp_dists = compare->add_subcommand("distributions", "compare posterior predictive distributions");
  for (auto* c : {cmp_means, cmp_dists}) {
    add_fit_list(c, cmp_fits);
    c->add_option("--rope", rope, "region of practical equivalence half-width");
    c->add_option("--seed", seed, "seed for pairing and simulation")->capture_default_str();
  }
  cmp_dists->add_option("--x", xval, "predictor value for linear fits");

  // plot -------------------------------------------------------------------------
  auto* plot = app.add_subcommand("plot", "write SVG figures");
  plot->require_subcommand(1);
  FitList plot_fits;
  std::string plot_out, par;
  bool per_subject = false;
  std::vector<std::string> points, lines;
  auto* p_trace = plot->add_subcommand("trace", "chains over iterations");
  auto* p_fit = plot->add_subcommand("fit", "fitted distribution against the data");
  auto* p_means = plot->add_subcommand("means", "posterior densities of the means");
  auto* p_means_diff = plot->add_subcommand("means-diff", "difference of means");
  auto* p_dists = plot->add_subcommand("dists", "posterior predictive densities");
  auto* p_dists_diff = plot->add_subcommand("dists-diff", "difference of predictive draws");
  auto* p_fit_hsv = plot->add_subcommand("fit-hsv", "color fit on the hue wheel");
  auto* p_means_hsv = plot->add_subcommand("means-hsv", "mean hue on the wheel");
  auto* p_dists_hsv = plot->add_subcommand("dists-hsv", "predictive hue on the wheel");
  for (auto* c : {p_trace, p_fit, p_fit_hsv, p_means_hsv, p_dists_hsv})
    c->add_option("--fit", fit_path, "fit file")->required();
  for (auto* c : {p_means, p_means_diff, p_dists, p_dists_diff}) {
    add_fit_list(c, plot_fits);
    c->add_option("--par", par, "quantity for fits with several (intercept, slope, r, g, b, h, s, v)");
    c->add_option("--seed", seed, "seed for pairing and simulation")->capture_default_str();
  }
  for (auto* c : {p_means_diff, p_dists_diff}) c->add_option("--rope", rope, "rope half-width");
  for (auto* c : {p_dists, p_dists_diff}) c->add_option("--x", xval, "predictor value for linear fits");
  p_fit->add_flag("--subjects", per_subject, "one panel per subject");
  p_dists_hsv->add_option("--seed", seed, "seed for simulation")->capture_default_str();
  p_dists_hsv->add_option("--point", points, "annotation point r,g,b (repeatable)");
  p_dists_hsv->add_option("--line", lines, "annotation line r,g,b (repeatable; later lines dashed)");
  for (auto* c : {p_trace, p_fit, p_means, p_means_diff, p_dists, p_dists_diff, p_fit_hsv, p_means_hsv, p_dists_hsv})
    c->add_option("--out", plot_out, "SVG file to write")->required();

  // bootstrap --------------------------------------------------------------------
  auto* boot = app.add_subcommand("bootstrap", "Bayesian bootstrap of a statistic");
  std::string boot_data, boot_col = "value", boot_stat = "mean", boot_x, boot_out;
  std::vector<std::string> boot_filters;
  double boot_q = 0.5;
  std::size_t boot_n = kDefaultBootstrapSamples;
  boot->add_option("--data", boot_data, "CSV or TSV file")->required();
  boot->add_option("--col", boot_col, "value column (response for ols)")->capture_default_str();
  boot->add_option("--stat", boot_stat, "mean, variance, quantile or ols")
      ->check(CLI::IsMember({"mean", "variance", "quantile", "ols"}))
      ->capture_default_str();
  boot->add_option("--q", boot_q, "probability for --stat quantile")->capture_default_str();
  boot->add_option("--col-x", boot_x, "predictor column for --stat ols");
  boot->add_option("--filter", boot_filters, "keep rows where col=value (repeatable)");
  boot->add_option("--n", boot_n, "number of draws")->capture_default_str();
  boot->add_option("--seed", seed, "random seed")->capture_default_str();
  boot->add_option("--out", boot_out, "optional CSV of the draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) {
      const PriorMap priors = priors_of(fo);
      if (cmd_ttest->parsed()) {
        const Table t = load_table(fo);
        return finish_fit(fit_ttest(t.numeric(fo.col_y), priors, config_of(fo, cmd_ttest)), fo);
      }
      if (cmd_rt->parsed()) {
        const Table t = load_table(fo);
        return finish_fit(fit_reaction_time(t.numeric(fo.col_t), subjects(t, fo), priors, config_of(fo, cmd_rt)), fo);
      }
      if (cmd_sr->parsed()) {
        const Table t = load_table(fo);
        std::vector<double> r;
        if (!fo.binarize.empty()) {
          const auto [col, value] = parse_assignment(fo.binarize);
          r = t.binarize(col, value);
        } else {
          r = t.numeric(fo.col_r);
        }
        return finish_fit(fit_success_rate(r, subjects(t, fo), priors, config_of(fo, cmd_sr)), fo);
      }
      if (cmd_lin->parsed()) {
        const Table t = load_table(fo);
        return finish_fit(
            fit_linear(t.numeric(fo.col_x), t.numeric(fo.col_y), subjects(t, fo), priors, config_of(fo, cmd_lin)), fo);
      }
      if (cmd_color->parsed()) {
        const Table t = load_table(fo);
        std::string spec = fo.columns.empty() ? (fo.hsv ? "h,s,v" : "r,g,b") : fo.columns;
        std::vector<std::string> names;
        std::size_t pos = 0;
        while (true) {
          const auto comma = spec.find(',', pos);
          names.push_back(spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
        if (names.size() != 3) fail(ErrorKind::argument, "--columns needs three column names");
        const auto c0 = t.numeric(names[0]), c1 = t.numeric(names[1]), c2 = t.numeric(names[2]);
        std::vector<std::array<double, 3>> rows;
        for (std::size_t i = 0; i < c0.size(); ++i) rows.push_back({c0[i], c1[i], c2[i]});
        return finish_fit(fit_color(rows, fo.hsv, priors, config_of(fo, cmd_color)), fo);
      }
    }
    if (summary->parsed()) {
      std::cout << summary_text(load_fit(fit_path));
      return 0;
    }
    if (print->parsed()) {
      std::cout << print_fit(load_fit(fit_path));
      return 0;
    }
    if (diagnose->parsed()) {
      std::cout << diagnose_text(load_fit(fit_path));
      return 0;
    }
    if (compare->parsed()) {
      const auto fits = cmp_fits.load();
      if (fits.size() < 2) fail(ErrorKind::argument, "compare needs --fit-a and --fit-b (or several --fit)");
      auto* cmd = cmp_means->parsed() ? cmp_means : cmp_dists;
      const auto r = optional_value(cmd, "--rope", rope);
      const auto result = cmp_means->parsed()
                              ? compare_means(pointers(fits), r, seed)
                              : compare_distributions(pointers(fits), r, seed, optional_value(cmd, "--x", xval));
      std::cout << format_comparison(result, fits.front().kind);
      return 0;
    }
    if (plot->parsed()) {
      PlotSpec spec;
      if (p_trace->parsed()) spec = trace_plot(load_fit(fit_path));
      if (p_fit->parsed()) spec = fit_plot(load_fit(fit_path), per_subject);
      if (p_fit_hsv->parsed()) spec = fit_hsv_plot(load_fit(fit_path));
      if (p_means_hsv->parsed()) spec = means_hsv_plot(load_fit(fit_path));
      if (p_dists_hsv->parsed()) {
        auto to_hsv = [](const std::string& s) {
          const auto v = triple(s);
          const Hsv h = rgb_to_hsv(v[0], v[1], v[2]);
          return HsvPoint{h.h, h.s, h.v};
        };
        std::vector<HsvPoint> pts, lns;
        for (const auto& s : points) pts.push_back(to_hsv(s));
        for (const auto& s : lines) lns.push_back(to_hsv(s));
        spec = distributions_hsv_plot(load_fit(fit_path), pts, lns, seed);
      }
      for (auto* c : {p_means, p_means_diff, p_dists, p_dists_diff}) {
        if (!c->parsed()) continue;
        const auto fits = plot_fits.load();
        const auto ptrs = pointers(fits);
        const auto r = optional_value(c, "--rope", rope);
        const auto x = optional_value(c, "--x", xval);
        if (c == p_means) spec = means_plot(ptrs, par);
        if (c == p_means_diff) spec = means_difference_plot(ptrs, r, seed, par);
        if (c == p_dists) spec = distributions_plot(ptrs, seed, par, x);
        if (c == p_dists_diff) spec = distributions_difference_plot(ptrs, r, seed, par, x);
      }
      write_plot(spec, plot_out);
      return 0;
    }
    if (boot->parsed()) {
      Table t = read_table(boot_data);
      for (const auto& f : boot_filters) {
        const auto [col, value] = parse_assignment(f);
        t = t.filter(col, value);
      }
      BootstrapData data;
      data.columns.push_back(t.numeric(boot_col));
      WeightedStatistic stat;
      std::string name = boot_stat;
      if (boot_stat == "mean") stat = weighted_mean();
      if (boot_stat == "variance") stat = weighted_variance();
      if (boot_stat == "quantile") {
        stat = weighted_quantile(boot_q);
        name = fmt::format("quantile({})", boot_q);
      }
      if (boot_stat == "ols") {
        if (boot_x.empty()) fail(ErrorKind::argument, "--stat ols needs --col-x");
        data.columns.push_back(t.numeric(boot_x));
        stat = weighted_ols(0, {1});
      }
      const auto result = bayes_bootstrap(data, stat, name, boot_n, seed);
      const std::vector<std::string> labels =
          boot_stat == "ols" ? std::vector<std::string>{"intercept", "slope"} : std::vector<std::string>{name};
      for (std::size_t k = 0; k < result.dim; ++k) {
        const auto v = result.component(k);
        const Interval iv = hdi(v);
        std::cout << fmt::format("{:<20}{:.4g} (sd {:.4g}), 95% HDI: [{:.4g}, {:.4g}]\n", labels[k] + ":", mean_of(v),
                                 sd_of(v), iv.lo, iv.hi);
      }
      if (result.missing > 0) std::cout << fmt::format("missing draws: {}\n", result.missing);
      if (!boot_out.empty()) {
        std::string csv;
        for (std::size_t k = 0; k < result.dim; ++k) csv += (k ? "," : "") + labels[k];
        csv += '\n';
        for (std::size_t i = 0; i < result.n_samples; ++i) {
          for (std::size_t k = 0; k < result.dim; ++k) csv += fmt::format("{}{:.17g}", k ? "," : "", result.at(i, k));
          csv += '\n';
        }
        write_file_atomic(boot_out, csv);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << fmt::format("error [{}]: {}\n", error_kind_name(e.kind()), e.what());
    return e.kind() == ErrorKind::convergence ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

#include "psybayes/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "psybayes/dists.hpp"
#include "psybayes/error.hpp"
#include "psybayes/mathutil.hpp"
#include "psybayes/rng.hpp"

namespace psybayes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.5 * dists::kLogTwoPi;

// Registry definitions ---------------------------------------------------------

struct ParamDef {
  const char* name;
  Constraint natural;
  std::optional<Constraint> flat_support;  // replaces `natural` when no prior is given
};

std::vector<ParamDef> group_defs(ModelKind kind) {
  const auto pos = Constraint::positive();
  const auto unb = Constraint::unbounded();
  switch (kind) {
    case ModelKind::ttest:
      return {{"nu", Constraint::lower(1.0), Constraint::interval(1.0, 1000.0)},
              {"mu", unb, std::nullopt},
              {"sigma", pos, std::nullopt}};
    case ModelKind::reaction_time:
      return {{"mu_m", unb, std::nullopt}, {"sigma_m", pos, std::nullopt}, {"mu_s", pos, std::nullopt},
              {"sigma_s", pos, std::nullopt}, {"mu_l", pos, Constraint::interval(0.0, 1000.0)},
              {"sigma_l", pos, Constraint::interval(0.0, 1000.0)}};
    case ModelKind::success_rate:
      return {{"p", Constraint::interval(0.0, 1.0), std::nullopt},
              {"tau", pos, Constraint::interval(0.0, 1000.0)}};
    case ModelKind::linear:
      return {{"mu_a", unb, std::nullopt}, {"sigma_a", pos, std::nullopt}, {"mu_b", unb, std::nullopt},
              {"sigma_b", pos, std::nullopt}, {"mu_s", pos, std::nullopt}, {"sigma_s", pos, std::nullopt}};
    case ModelKind::color: {
      const auto rgb = Constraint::interval(0.0, 255.0);
      const auto unit = Constraint::interval(0.0, 1.0);
      return {{"mu_r", rgb, std::nullopt},     {"sigma_r", pos, rgb},
              {"mu_g", rgb, std::nullopt},     {"sigma_g", pos, rgb},
              {"mu_b", rgb, std::nullopt},     {"sigma_b", pos, rgb},
              {"mu_h", Constraint::circular(), std::nullopt}, {"kappa_h", pos, std::nullopt},
              {"mu_s", unit, std::nullopt},    {"sigma_s", pos, unit},
              {"mu_v", unit, std::nullopt},    {"sigma_v", pos, unit}};
    }
  }
  return {};
}

struct Block {
  Constraint c;
  PriorSpec prior;
};

Block resolve(const ParamDef& def, const PriorMap& priors) {
  Block b{def.natural, priors.get(def.name)};
  switch (b.prior.family) {
    case PriorFamily::flat:
      if (def.flat_support) b.c = *def.flat_support;
      break;
    case PriorFamily::uniform: {
      double lo = b.prior.params[0], hi = b.prior.params[1];
      if (def.natural.kind != ConstraintKind::circular) {
        lo = std::max(lo, def.natural.lower_bound());
        hi = std::min(hi, def.natural.upper_bound());
      }
      if (!(lo < hi)) {
        fail(ErrorKind::spec, fmt::format("uniform prior on {} does not overlap its support {}", def.name,
                                          format_constraint(def.natural)));
      }
      b.c = Constraint::interval(lo, hi);
      break;
    }
    case PriorFamily::beta:
      if (def.natural.lower_bound() < 0.0 || def.natural.upper_bound() > 1.0) {
        fail(ErrorKind::spec, fmt::format("beta prior on {} needs a parameter on [0, 1], support is {}", def.name,
                                          format_constraint(def.natural)));
      }
      break;
    default: break;
  }
  return b;
}

std::vector<Block> resolve_all(ModelKind kind, const PriorMap& priors) {
  const auto defs = group_defs(kind);
  std::vector<std::string> names;
  for (const auto& d : defs) names.emplace_back(d.name);
  priors.check_names(names);
  std::vector<Block> blocks;
  for (const auto& d : defs) blocks.push_back(resolve(d, priors));
  return blocks;
}

struct Eval {
  double x;     // constrained value
  double dxdu;  // d x / d u
  double g;     // d (prior + log Jacobian) / d u
};

Eval eval_block(const Block& b, double u, double& lp) {
  const Transformed t = transform(b.c, u);
  const PriorContrib pc = prior_log_contrib(b.prior, t.value);
  lp += pc.logpdf + t.log_jac;
  return {t.value, t.dvalue, pc.dlogpdf * t.dvalue + t.djac};
}

// Positive subject parameter drawn from N(mu, scale) truncated to (0, inf),
// sampled through v with value = scale * softplus(v + mu / scale). The
// -log Phi(mu / scale) normalizer is added by the caller.
struct TruncChild {
  double value, sp;
  double lp, lp_dv, lp_da;
  double dvalue_dv;  // also d value / d a
};

TruncChild trunc_child(double v, double a, double scale) {
  TruncChild c;
  const double w = v + a;
  const double lw = logistic(w), lmw = logistic(-w);
  c.sp = softplus(w);
  c.value = scale * c.sp;
  const double z = v + softplus(-w);
  c.lp = -0.5 * z * z - kHalfLog2Pi - softplus(-w);
  c.lp_dv = -z * lw + lmw;
  c.lp_da = z * lmw + lmw;
  c.dvalue_dv = scale * lw;
  return c;
}

double trunc_child_value(double v, double a, double scale) { return scale * softplus(v + a); }

// Subjects ---------------------------------------------------------------------

int check_subjects(const std::vector<int>& s) {
  if (s.empty()) fail(ErrorKind::data, "no observations");
  int largest = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 1) fail(ErrorKind::data, fmt::format("subject index {} at row {} is below 1", s[i], i + 1));
    largest = std::max(largest, s[i]);
  }
  std::vector<char> seen(static_cast<std::size_t>(largest) + 1, 0);
  for (int v : s) seen[static_cast<std::size_t>(v)] = 1;
  for (int k = 1; k <= largest; ++k) {
    if (!seen[static_cast<std::size_t>(k)]) {
      fail(ErrorKind::data,
           fmt::format("subject indices must be contiguous 1..n: index {} is used but {} is missing "
                       "(remap the subject ids)",
                       largest, k));
    }
  }
  return largest;
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) fail(ErrorKind::data, fmt::format("{}: column lengths differ ({} vs {})", what, a, b));
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) fail(ErrorKind::data, fmt::format("{} at row {} is not finite", what, i + 1));
  }
}

// Observations grouped by subject in canonical order.
struct Grouped {
  int subjects = 0;
  std::vector<std::size_t> start;  // size subjects + 1
  std::vector<double> a, b;        // primary / secondary values
};

Grouped group_rows(const std::vector<int>& s, const std::vector<double>& a, const std::vector<double>* b) {
  Grouped g;
  g.subjects = check_subjects(s);
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (s[i] != s[j]) return s[i] < s[j];
    if (a[i] != a[j]) return a[i] < a[j];
    return b && (*b)[i] < (*b)[j];
  });
  g.start.assign(static_cast<std::size_t>(g.subjects) + 1, 0);
  for (std::size_t k : order) {
    g.a.push_back(a[k]);
    if (b) g.b.push_back((*b)[k]);
    ++g.start[static_cast<std::size_t>(s[k])];
  }
  for (std::size_t i = 1; i < g.start.size(); ++i) g.start[i] += g.start[i - 1];
  return g;
}

std::vector<std::string> output_names(const std::vector<ParamInfo>& registry) {
  std::vector<std::string> out;
  for (const auto& p : registry) {
    if (!p.derived) out.push_back(p.name);
  }
  return out;
}

std::vector<Constraint> output_constraints(const std::vector<ParamInfo>& registry) {
  std::vector<Constraint> out;
  for (const auto& p : registry) {
    if (!p.derived) out.push_back(p.constraint);
  }
  return out;
}

void set_group_grad(std::span<double> grad, std::size_t offset, const std::vector<Eval>& e,
                    const std::vector<double>& dx) {
  for (std::size_t k = 0; k < e.size(); ++k) grad[offset + k] = e[k].g + dx[k] * e[k].dxdu;
}

}  // namespace

// Names --------------------------------------------------------------------------

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::ttest: return "ttest";
    case ModelKind::reaction_time: return "reaction_time";
    case ModelKind::success_rate: return "success_rate";
    case ModelKind::linear: return "linear";
    case ModelKind::color: return "color";
  }
  return "ttest";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::ttest, ModelKind::reaction_time, ModelKind::success_rate, ModelKind::linear,
                 ModelKind::color}) {
    if (model_kind_name(k) == name) return k;
  }
  fail(ErrorKind::io, "unknown model kind '" + std::string(name) + "'");
}

void FitData::add(const std::string& name, std::vector<double> values) {
  names.push_back(name);
  columns.push_back(std::move(values));
}

bool FitData::has(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

const std::vector<double>& FitData::column(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return columns[i];
  }
  fail(ErrorKind::argument, "fit has no data column '" + std::string(name) + "'");
}

const ParamInfo& Fit::param(std::string_view name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  fail(ErrorKind::argument, "fit has no parameter '" + std::string(name) + "'");
}

int Fit::subjects() const {
  int n = 0;
  for (const auto& p : params) n = std::max(n, p.subject);
  return n;
}

std::vector<std::string> prior_parameter_names(ModelKind kind) {
  std::vector<std::string> out;
  for (const auto& d : group_defs(kind)) out.emplace_back(d.name);
  return out;
}

std::vector<ParamInfo> model_registry(ModelKind kind, int subjects, const PriorMap& priors) {
  std::vector<ParamInfo> reg;
  auto subject_block = [&](const char* base, Constraint c) {
    for (int i = 1; i <= subjects; ++i) reg.push_back({fmt::format("{}[{}]", base, i), Level::subject, i, c, false});
  };
  switch (kind) {
    case ModelKind::reaction_time:
      subject_block("mu", Constraint::unbounded());
      subject_block("sigma", Constraint::positive());
      subject_block("lambda", Constraint::positive());
      break;
    case ModelKind::success_rate: subject_block("p", Constraint::interval(0.0, 1.0)); break;
    case ModelKind::linear:
      subject_block("alpha", Constraint::unbounded());
      subject_block("beta", Constraint::unbounded());
      subject_block("sigma", Constraint::positive());
      break;
    default: break;
  }
  const auto blocks = resolve_all(kind, priors);
  const auto defs = group_defs(kind);
  for (std::size_t k = 0; k < defs.size(); ++k) reg.push_back({defs[k].name, Level::group, 0, blocks[k].c, false});
  if (kind == ModelKind::reaction_time) {
    reg.push_back({"rt", Level::group, 0, Constraint::unbounded(), true});
    for (int i = 1; i <= subjects; ++i) {
      reg.push_back({fmt::format("rt_subjects[{}]", i), Level::subject, i, Constraint::unbounded(), true});
    }
  }
  return reg;
}

void add_derived(ModelKind kind, int subjects, Draws& draws) {
  if (kind != ModelKind::reaction_time) return;
  const std::size_t mu_m = draws.index("mu_m"), mu_l = draws.index("mu_l");
  draws.add_column("rt", [=](std::span<const double> row) { return row[mu_m] + 1.0 / row[mu_l]; });
  for (int i = 1; i <= subjects; ++i) {
    const std::size_t mu = draws.index(fmt::format("mu[{}]", i));
    const std::size_t lambda = draws.index(fmt::format("lambda[{}]", i));
    draws.add_column(fmt::format("rt_subjects[{}]", i),
                     [=](std::span<const double> row) { return row[mu] + 1.0 / row[lambda]; });
  }
}

// t-test ---------------------------------------------------------------------------

TargetDensity ttest_target(const std::vector<double>& y_in, const PriorMap& priors) {
  if (y_in.size() < 2) fail(ErrorKind::data, "t-test needs at least 2 observations");
  check_finite(y_in, "y");
  std::vector<double> y = y_in;
  std::sort(y.begin(), y.end());
  if (y.front() == y.back()) fail(ErrorKind::data, "t-test data are constant; sigma has no posterior");

  const auto blocks = resolve_all(ModelKind::ttest, priors);
  const auto registry = model_registry(ModelKind::ttest, 0, priors);
  TargetDensity target;
  target.dim = 3;
  target.names = output_names(registry);
  target.constraints = output_constraints(registry);
  target.log_density = [blocks, y](std::span<const double> u, std::span<double> grad) {
    double lp = 0.0;
    const std::vector<Eval> e = {eval_block(blocks[0], u[0], lp), eval_block(blocks[1], u[1], lp),
                                 eval_block(blocks[2], u[2], lp)};
    if (!std::isfinite(lp)) return -kInf;
    const double nu = e[0].x, mu = e[1].x, sigma = e[2].x;
    const double n = static_cast<double>(y.size());
    lp += n * (dists::lgamma_pos(0.5 * (nu + 1.0)) - dists::lgamma_pos(0.5 * nu) - 0.5 * std::log(nu * M_PI) -
               std::log(sigma));
    double dnu = n * (0.5 * (dists::digamma(0.5 * (nu + 1.0)) - dists::digamma(0.5 * nu)) - 0.5 / nu);
    double dmu = 0.0, dsigma = -n / sigma;
    for (double v : y) {
      const double r = (v - mu) / sigma;
      const double r2 = r * r;
      const double l = std::log1p(r2 / nu);
      const double w = (nu + 1.0) / (nu + r2);
      lp -= 0.5 * (nu + 1.0) * l;
      dnu += -0.5 * l + 0.5 * w * r2 / nu;
      dmu += w * r / sigma;
      dsigma += w * r2 / sigma;
    }
    set_group_grad(grad, 0, e, {dnu, dmu, dsigma});
    return lp;
  };
  target.outputs = [blocks](std::span<const double> u, std::span<double> out) {
    for (std::size_t k = 0; k < 3; ++k) out[k] = transform(blocks[k].c, u[k]).value;
  };
  return target;
}

// Reaction times ----------------------------------------------------------------------

TargetDensity reaction_time_target(const std::vector<double>& t, const std::vector<int>& s,
                                   const PriorMap& priors) {
  check_lengths(t.size(), s.size(), "reaction times");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0) || !std::isfinite(t[i])) {
      fail(ErrorKind::data, fmt::format("reaction time at row {} must be positive and finite, got {}", i + 1, t[i]));
    }
  }
  const Grouped g = group_rows(s, t, nullptr);
  const auto blocks = resolve_all(ModelKind::reaction_time, priors);
  const auto registry = model_registry(ModelKind::reaction_time, g.subjects, priors);
  const std::size_t S = static_cast<std::size_t>(g.subjects);

  TargetDensity target;
  target.dim = 3 * S + 6;
  target.names = output_names(registry);
  target.constraints = output_constraints(registry);
  target.log_density = [blocks, g, S](std::span<const double> u, std::span<double> grad) {
    double lp = 0.0;
    const std::size_t G = 3 * S;
    std::vector<Eval> e;
    for (std::size_t k = 0; k < 6; ++k) e.push_back(eval_block(blocks[k], u[G + k], lp));
    if (!std::isfinite(lp)) return -kInf;
    const double mu_m = e[0].x, sigma_m = e[1].x, mu_s = e[2].x, sigma_s = e[3].x, mu_l = e[4].x,
                 sigma_l = e[5].x;
    std::vector<double> dx(6, 0.0);
    const double a_s = mu_s / sigma_s, a_l = mu_l / sigma_l;
    const double Sd = static_cast<double>(S);
    lp -= Sd * (dists::log_ndtr(a_s) + dists::log_ndtr(a_l));
    double ga_s = -Sd * dists::inv_mills(a_s), ga_l = -Sd * dists::inv_mills(a_l);

    for (std::size_t i = 0; i < S; ++i) {
      const double z = u[i];
      const double mu_i = mu_m + sigma_m * z;
      lp += -0.5 * z * z - kHalfLog2Pi;
      const TruncChild sg = trunc_child(u[S + i], a_s, sigma_s);
      const TruncChild lm = trunc_child(u[2 * S + i], a_l, sigma_l);
      lp += sg.lp + lm.lp;
      double l_mu = 0.0, l_sigma = 0.0, l_lambda = 0.0;
      for (std::size_t n = g.start[i]; n < g.start[i + 1]; ++n) {
        const dists::Partials p = dists::emg_partials(g.a[n], mu_i, sg.value, lm.value);
        lp += p.value;
        l_mu += p.dparam[0];
        l_sigma += p.dparam[1];
        l_lambda += p.dparam[2];
      }
      grad[i] = -z + l_mu * sigma_m;
      dx[0] += l_mu;
      dx[1] += l_mu * z;
      grad[S + i] = sg.lp_dv + l_sigma * sg.dvalue_dv;
      ga_s += sg.lp_da + l_sigma * sg.dvalue_dv;
      dx[3] += l_sigma * sg.sp;
      grad[2 * S + i] = lm.lp_dv + l_lambda * lm.dvalue_dv;
      ga_l += lm.lp_da + l_lambda * lm.dvalue_dv;
      dx[5] += l_lambda * lm.sp;
    }
    dx[2] += ga_s / sigma_s;
    dx[3] -= ga_s * mu_s / (sigma_s * sigma_s);
    dx[4] += ga_l / sigma_l;
    dx[5] -= ga_l * mu_l / (sigma_l * sigma_l);
    set_group_grad(grad, G, e, dx);
    return lp;
  };
  target.outputs = [blocks, S](std::span<const double> u, std::span<double> out) {
    const std::size_t G = 3 * S;
    double x[6];
    for (std::size_t k = 0; k < 6; ++k) x[k] = transform(blocks[k].c, u[G + k]).value;
    for (std::size_t i = 0; i < S; ++i) {
      out[i] = x[0] + x[1] * u[i];
      out[S + i] = trunc_child_value(u[S + i], x[2] / x[3], x[3]);
      out[2 * S + i] = trunc_child_value(u[2 * S + i], x[4] / x[5], x[5]);
    }
    for (std::size_t k = 0; k < 6; ++k) out[G + k] = x[k];
  };
  return target;
}

// Success rates ----------------------------------------------------------------------

TargetDensity success_rate_target(const std::vector<double>& r, const std::vector<int>& s,
                                  const PriorMap& priors) {
  check_lengths(r.size(), s.size(), "success rates");
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] != 0.0 && r[i] != 1.0) {
      fail(ErrorKind::data, fmt::format("success value at row {} must be 0 or 1, got {}", i + 1, r[i]));
    }
  }
  const int subjects = check_subjects(s);
  const std::size_t S = static_cast<std::size_t>(subjects);
  std::vector<double> k(S, 0.0), n(S, 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    k[static_cast<std::size_t>(s[i] - 1)] += r[i];
    n[static_cast<std::size_t>(s[i] - 1)] += 1.0;
  }
  const auto blocks = resolve_all(ModelKind::success_rate, priors);
  const auto registry = model_registry(ModelKind::success_rate, subjects, priors);

  TargetDensity target;
  target.dim = S + 2;
  target.names = output_names(registry);
  target.constraints = output_constraints(registry);
  target.log_density = [blocks, k, n, S](std::span<const double> u, std::span<double> grad) {
    double lp = 0.0;
    const std::vector<Eval> e = {eval_block(blocks[0], u[S], lp), eval_block(blocks[1], u[S + 1], lp)};
    if (!std::isfinite(lp)) return -kInf;
    const double p = e[0].x, tau = e[1].x;
    const double a = p * tau, b = (1.0 - p) * tau;
    if (!(a > 0) || !(b > 0)) return -kInf;
    const double Sd = static_cast<double>(S);
    lp -= Sd * (dists::lgamma_pos(a) + dists::lgamma_pos(b) - dists::lgamma_pos(a + b));
    double sum_lp = 0.0, sum_lq = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
      const double lpi = -softplus(-u[i]);
      const double lqi = -softplus(u[i]);
      const double ka = k[i] + a, fb = n[i] - k[i] + b;
      lp += ka * lpi + fb * lqi;
      grad[i] = ka * logistic(-u[i]) - fb * logistic(u[i]);
      sum_lp += lpi;
      sum_lq += lqi;
    }
    const double psi_ab = dists::digamma(a + b);
    const double ga = sum_lp - Sd * (dists::digamma(a) - psi_ab);
    const double gb = sum_lq - Sd * (dists::digamma(b) - psi_ab);
    set_group_grad(grad, S, e, {tau * (ga - gb), p * ga + (1.0 - p) * gb});
    return lp;
  };
  target.outputs = [blocks, S](std::span<const double> u, std::span<double> out) {
    for (std::size_t i = 0; i < S; ++i) out[i] = logistic(u[i]);
    out[S] = transform(blocks[0].c, u[S]).value;
    out[S + 1] = transform(blocks[1].c, u[S + 1]).value;
  };
  return target;
}

// Linear ------------------------------------------------------------------------------

TargetDensity linear_target(const std::vector<double>& x, const std::vector<double>& y, const std::vector<int>& s,
                            const PriorMap& priors) {
  check_lengths(x.size(), y.size(), "linear model");
  check_lengths(x.size(), s.size(), "linear model");
  check_finite(x, "x");
  check_finite(y, "y");
  const Grouped g = group_rows(s, x, &y);
  for (int i = 0; i < g.subjects; ++i) {
    const auto b = g.start[static_cast<std::size_t>(i)], e = g.start[static_cast<std::size_t>(i) + 1];
    if (e - b < 2 || g.a[b] == g.a[e - 1]) {
      fail(ErrorKind::data, fmt::format("subject {} needs at least 2 distinct x values", i + 1));
    }
  }
  const auto blocks = resolve_all(ModelKind::linear, priors);
  const auto registry = model_registry(ModelKind::linear, g.subjects, priors);
  const std::size_t S = static_cast<std::size_t>(g.subjects);

  TargetDensity target;
  target.dim = 3 * S + 6;
  target.names = output_names(registry);
  target.constraints = output_constraints(registry);
  target.log_density = [blocks, g, S](std::span<const double> u, std::span<double> grad) {
    double lp = 0.0;
    const std::size_t G = 3 * S;
    std::vector<Eval> e;
    for (std::size_t k = 0; k < 6; ++k) e.push_back(eval_block(blocks[k], u[G + k], lp));
    if (!std::isfinite(lp)) return -kInf;
    const double mu_a = e[0].x, sigma_a = e[1].x, mu_b = e[2].x, sigma_b = e[3].x, mu_s = e[4].x,
                 sigma_s = e[5].x;
    std::vector<double> dx(6, 0.0);
    const double a_s = mu_s / sigma_s;
    const double Sd = static_cast<double>(S);
    lp -= Sd * dists::log_ndtr(a_s);
    double ga_s = -Sd * dists::inv_mills(a_s);

    for (std::size_t i = 0; i < S; ++i) {
      const double za = u[i], zb = u[S + i];
      const double alpha = mu_a + sigma_a * za, beta = mu_b + sigma_b * zb;
      lp += -0.5 * (za * za + zb * zb) - 2.0 * kHalfLog2Pi;
      const TruncChild sg = trunc_child(u[2 * S + i], a_s, sigma_s);
      lp += sg.lp;
      const double sigma = sg.value;
      const double inv_var = 1.0 / (sigma * sigma);
      double ss = 0.0, l_alpha = 0.0, l_beta = 0.0;
      for (std::size_t n = g.start[i]; n < g.start[i + 1]; ++n) {
        const double res = g.b[n] - alpha - beta * g.a[n];
        ss += res * res;
        l_alpha += res;
        l_beta += res * g.a[n];
      }
      const double cnt = static_cast<double>(g.start[i + 1] - g.start[i]);
      lp += -0.5 * ss * inv_var - cnt * (std::log(sigma) + kHalfLog2Pi);
      l_alpha *= inv_var;
      l_beta *= inv_var;
      const double l_sigma = ss * inv_var / sigma - cnt / sigma;

      grad[i] = -za + l_alpha * sigma_a;
      grad[S + i] = -zb + l_beta * sigma_b;
      dx[0] += l_alpha;
      dx[1] += l_alpha * za;
      dx[2] += l_beta;
      dx[3] += l_beta * zb;
      grad[2 * S + i] = sg.lp_dv + l_sigma * sg.dvalue_dv;
      ga_s += sg.lp_da + l_sigma * sg.dvalue_dv;
      dx[5] += l_sigma * sg.sp;
    }
    dx[4] += ga_s / sigma_s;
    dx[5] -= ga_s * mu_s / (sigma_s * sigma_s);
    set_group_grad(grad, G, e, dx);
    return lp;
  };
  target.outputs = [blocks, S](std::span<const double> u, std::span<double> out) {
    const std::size_t G = 3 * S;
    double v[6];
    for (std::size_t k = 0; k < 6; ++k) v[k] = transform(blocks[k].c, u[G + k]).value;
    for (std::size_t i = 0; i < S; ++i) {
      out[i] = v[0] + v[1] * u[i];
      out[S + i] = v[2] + v[3] * u[S + i];
      out[2 * S + i] = trunc_child_value(u[2 * S + i], v[4] / v[5], v[5]);
    }
    for (std::size_t k = 0; k < 6; ++k) out[G + k] = v[k];
  };
  return target;
}

// Colors --------------------------------------------------------------------------------

Hsv rgb_to_hsv(double r, double g, double b) {
  for (double c : {r, g, b}) {
    if (!(c >= 0.0 && c <= 255.0)) fail(ErrorKind::input, fmt::format("RGB component {} outside [0, 255]", c));
  }
  r /= 255.0;
  g /= 255.0;
  b /= 255.0;
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double delta = hi - lo;
  Hsv out;
  out.v = hi;
  out.s = hi > 0 ? delta / hi : 0.0;
  if (delta > 0) {
    double deg;
    if (hi == r) {
      deg = 60.0 * std::fmod((g - b) / delta, 6.0);
    } else if (hi == g) {
      deg = 60.0 * ((b - r) / delta + 2.0);
    } else {
      deg = 60.0 * ((r - g) / delta + 4.0);
    }
    out.h = dists::wrap_angle(deg * M_PI / 180.0);
  }
  return out;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double deg = dists::wrap_angle(h) * 180.0 / M_PI;
  const double c = v * s;
  const double hp = deg / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  auto clamp = [](double q) { return std::clamp(q * 255.0, 0.0, 255.0); };
  return {clamp(r + m), clamp(g + m), clamp(b + m)};
}

ColorColumns color_columns(const std::vector<std::array<double, 3>>& rows, bool hsv) {
  if (rows.size() < 2) fail(ErrorKind::data, "color model needs at least 2 observations");
  ColorColumns out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (hsv) {
      if (!(row[0] >= 0 && row[0] < dists::kTwoPi) || !(row[1] >= 0 && row[1] <= 1) ||
          !(row[2] >= 0 && row[2] <= 1)) {
        fail(ErrorKind::data, fmt::format("HSV row {} out of range: ({}, {}, {}); need h in [0, 2pi), s and v in "
                                          "[0, 1]", i + 1, row[0], row[1], row[2]));
      }
      const auto rgb = hsv_to_rgb(row[0], row[1], row[2]);
      out.r.push_back(rgb[0]);
      out.g.push_back(rgb[1]);
      out.b.push_back(rgb[2]);
      out.h.push_back(row[0]);
      out.s.push_back(row[1]);
      out.v.push_back(row[2]);
    } else {
      for (double c : row) {
        if (!(c >= 0 && c <= 255)) {
          fail(ErrorKind::data, fmt::format("RGB row {} out of range: ({}, {}, {})", i + 1, row[0], row[1], row[2]));
        }
      }
      const Hsv h = rgb_to_hsv(row[0], row[1], row[2]);
      out.r.push_back(row[0]);
      out.g.push_back(row[1]);
      out.b.push_back(row[2]);
      out.h.push_back(h.h);
      out.s.push_back(h.s);
      out.v.push_back(h.v);
    }
  }
  return out;
}

namespace {

TargetDensity truncated_component(std::vector<double> x, double width, const Block& mu_block,
                                  const Block& sigma_block, const std::string& mu_name,
                                  const std::string& sigma_name) {
  std::sort(x.begin(), x.end());
  TargetDensity target;
  target.dim = 2;
  target.names = {mu_name, sigma_name};
  target.constraints = {mu_block.c, sigma_block.c};
  const std::vector<Block> blocks = {mu_block, sigma_block};
  target.log_density = [blocks, x, width](std::span<const double> u, std::span<double> grad) {
    double lp = 0.0;
    const std::vector<Eval> e = {eval_block(blocks[0], u[0], lp), eval_block(blocks[1], u[1], lp)};
    if (!std::isfinite(lp)) return -kInf;
    const double mu = e[0].x, sigma = e[1].x;
    const double n = static_cast<double>(x.size());
    // Normalizer and its partials from the kernel at an in-support point.
    const dists::Partials ref = dists::truncnorm_partials(mu, mu, sigma, 0.0, width);
    const double log_norm = ref.value;  // -log sigma - log sqrt(2 pi) - log Z
    double ss = 0.0, sd = 0.0;
    for (double v : x) {
      const double d = v - mu;
      ss += d * d;
      sd += d;
    }
    const double s2 = sigma * sigma;
    lp += n * log_norm - 0.5 * ss / s2;
    // ref.dparam holds the derivatives at x = mu, where the quadratic term vanishes.
    const double dmu = n * ref.dparam[0] + sd / s2;
    const double dsigma = n * ref.dparam[1] + ss / (s2 * sigma);
    set_group_grad(grad, 0, e, {dmu, dsigma});
    return lp;
  };
  target.outputs = [blocks](std::span<const double> u, std::span<double> out) {
    out[0] = transform(blocks[0].c, u[0]).value;
    out[1] = transform(blocks[1].c, u[1]).value;
  };
  return target;
}

TargetDensity hue_component(std::vector<double> h, const Block& mu_block, const Block& kappa_block) {
  std::sort(h.begin(), h.end());
  TargetDensity target;
  target.dim = 2;
  target.names = {"mu_h", "kappa_h"};
  target.constraints = {mu_block.c, kappa_block.c};
  const std::vector<Block> blocks = {mu_block, kappa_block};
  target.log_density = [blocks, h](std::span<const double> u, std::span<double> grad) {
    double lp = 0.0;
    const std::vector<Eval> e = {eval_block(blocks[0], u[0], lp), eval_block(blocks[1], u[1], lp)};
    if (!std::isfinite(lp)) return -kInf;
    const double mu = e[0].x, kappa = e[1].x;
    const double n = static_cast<double>(h.size());
    double sc = 0.0, ss = 0.0;
    for (double v : h) {
      const double d = std::remainder(v - mu, dists::kTwoPi);
      sc += std::cos(d);
      ss += std::sin(d);
    }
    lp += kappa * sc - n * (dists::kLogTwoPi + dists::log_i0(kappa));
    set_group_grad(grad, 0, e, {kappa * ss, sc - n * dists::bessel_i1_i0_ratio(kappa)});
    return lp;
  };
  target.outputs = [blocks](std::span<const double> u, std::span<double> out) {
    out[0] = transform(blocks[0].c, u[0]).value;
    out[1] = transform(blocks[1].c, u[1]).value;
  };
  return target;
}

}  // namespace

std::vector<TargetDensity> color_targets(const ColorColumns& data, const PriorMap& priors) {
  const auto blocks = resolve_all(ModelKind::color, priors);
  std::vector<TargetDensity> out;
  out.push_back(truncated_component(data.r, 255.0, blocks[0], blocks[1], "mu_r", "sigma_r"));
  out.push_back(truncated_component(data.g, 255.0, blocks[2], blocks[3], "mu_g", "sigma_g"));
  out.push_back(truncated_component(data.b, 255.0, blocks[4], blocks[5], "mu_b", "sigma_b"));
  out.push_back(hue_component(data.h, blocks[6], blocks[7]));
  out.push_back(truncated_component(data.s, 1.0, blocks[8], blocks[9], "mu_s", "sigma_s"));
  out.push_back(truncated_component(data.v, 1.0, blocks[10], blocks[11], "mu_v", "sigma_v"));
  return out;
}

// Fits ---------------------------------------------------------------------------------------

namespace {

Fit make_fit(ModelKind kind, FitData data, const PriorMap& priors, const SamplerConfig& config, Draws draws,
             int subjects) {
  Fit fit;
  fit.kind = kind;
  fit.data = std::move(data);
  fit.priors = priors;
  fit.config = config;
  fit.draws = std::move(draws);
  fit.params = model_registry(kind, subjects, priors);
  add_derived(kind, subjects, fit.draws);
  return fit;
}

std::vector<double> as_doubles(const std::vector<int>& s) { return {s.begin(), s.end()}; }

}  // namespace

Fit fit_ttest(const std::vector<double>& y, const PriorMap& priors, const SamplerConfig& config,
              Execution execution) {
  config.validate();
  const auto target = ttest_target(y, priors);
  FitData data;
  data.add("y", y);
  return make_fit(ModelKind::ttest, std::move(data), priors, config, nuts_sample(target, config, execution), 0);
}

Fit fit_reaction_time(const std::vector<double>& t, const std::vector<int>& s, const PriorMap& priors,
                      const SamplerConfig& config, Execution execution) {
  config.validate();
  const auto target = reaction_time_target(t, s, priors);
  FitData data;
  data.add("t", t);
  data.add("s", as_doubles(s));
  const int subjects = *std::max_element(s.begin(), s.end());
  return make_fit(ModelKind::reaction_time, std::move(data), priors, config, nuts_sample(target, config, execution),
                  subjects);
}

Fit fit_success_rate(const std::vector<double>& r, const std::vector<int>& s, const PriorMap& priors,
                     const SamplerConfig& config, Execution execution) {
  config.validate();
  const auto target = success_rate_target(r, s, priors);
  FitData data;
  data.add("r", r);
  data.add("s", as_doubles(s));
  const int subjects = *std::max_element(s.begin(), s.end());
  return make_fit(ModelKind::success_rate, std::move(data), priors, config, nuts_sample(target, config, execution),
                  subjects);
}

Fit fit_linear(const std::vector<double>& x, const std::vector<double>& y, const std::vector<int>& s,
               const PriorMap& priors, const SamplerConfig& config, Execution execution) {
  config.validate();
  const auto target = linear_target(x, y, s, priors);
  FitData data;
  data.add("x", x);
  data.add("y", y);
  data.add("s", as_doubles(s));
  const int subjects = *std::max_element(s.begin(), s.end());
  return make_fit(ModelKind::linear, std::move(data), priors, config, nuts_sample(target, config, execution),
                  subjects);
}

Fit fit_color(const std::vector<std::array<double, 3>>& colors, bool hsv, const PriorMap& priors,
              const SamplerConfig& config, Execution execution) {
  config.validate();
  const ColorColumns cols = color_columns(colors, hsv);
  const auto targets = color_targets(cols, priors);

  std::vector<Draws> parts(targets.size());
  std::vector<std::exception_ptr> errors(targets.size());
  auto run = [&](std::size_t k) {
    SamplerConfig sub = config;
    sub.seed = mix_seed(config.seed, 1000 + k);
    parts[k] = nuts_sample(targets[k], sub, Execution::serial);
  };
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t k = 0; k < targets.size(); ++k) {
      try {
        run(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  } else {
    for (std::size_t k = 0; k < targets.size(); ++k) {
      try {
        run(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Draws draws;
  draws.chains = config.chains;
  draws.warmup = config.warmup;
  draws.samples = config.samples();
  for (const auto& part : parts) draws.names.insert(draws.names.end(), part.names.begin(), part.names.end());
  draws.values.assign(static_cast<std::size_t>(config.chains), {});
  draws.divergent.assign(static_cast<std::size_t>(config.chains),
                         std::vector<std::uint8_t>(static_cast<std::size_t>(config.iter), 0));
  draws.treedepth = draws.divergent;
  for (int c = 0; c < config.chains; ++c) {
    auto& out = draws.values[static_cast<std::size_t>(c)];
    out.reserve(static_cast<std::size_t>(config.iter) * draws.names.size());
    for (int it = 0; it < config.iter; ++it) {
      for (const auto& part : parts) {
        for (std::size_t col = 0; col < part.columns(); ++col) out.push_back(part.at(c, it, col));
        auto& div = draws.divergent[static_cast<std::size_t>(c)][static_cast<std::size_t>(it)];
        div = div | part.divergent[static_cast<std::size_t>(c)][static_cast<std::size_t>(it)];
        auto& depth = draws.treedepth[static_cast<std::size_t>(c)][static_cast<std::size_t>(it)];
        depth = std::max(depth, part.treedepth[static_cast<std::size_t>(c)][static_cast<std::size_t>(it)]);
      }
    }
    draws.step_size.push_back(parts.front().step_size[static_cast<std::size_t>(c)]);
  }

  FitData data;
  data.add("r", cols.r);
  data.add("g", cols.g);
  data.add("b", cols.b);
  data.add("h", cols.h);
  data.add("s", cols.s);
  data.add("v", cols.v);
  return make_fit(ModelKind::color, std::move(data), priors, config, std::move(draws), 0);
}

// Tables ----------------------------------------------------------------------------------------

namespace {

ParamTable table_for(const Fit& fit, bool subject_level) {
  ParamTable table;
  for (const auto& p : fit.params) {
    if ((p.level == Level::subject) != subject_level) continue;
    const std::size_t col = fit.draws.index(p.name);
    for (int c = 0; c < fit.draws.chains; ++c) {
      for (int it = 0; it < fit.draws.samples; ++it) {
        table.chain.push_back(c + 1);
        table.iteration.push_back(it + 1);
        table.name.push_back(p.name);
        table.value.push_back(fit.draws.at(c, fit.draws.warmup + it, col));
      }
    }
  }
  return table;
}

}  // namespace

ParamTable get_parameters(const Fit& fit) { return table_for(fit, false); }

ParamTable get_subject_parameters(const Fit& fit) {
  if (!fit.hierarchical()) {
    fail(ErrorKind::unsupported,
         fmt::format("{} fits have no subject-level parameters", model_kind_name(fit.kind)));
  }
  return table_for(fit, true);
}

}  // namespace psybayes

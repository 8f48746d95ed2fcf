#include "psybayes/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>

#include <fmt/format.h>

#include "psybayes/dists.hpp"
#include "psybayes/error.hpp"
#include "psybayes/mathutil.hpp"
#include "psybayes/rng.hpp"

namespace psybayes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// Constraints ----------------------------------------------------------------

bool Constraint::admits(double x) const {
  switch (kind) {
    case ConstraintKind::unbounded: return std::isfinite(x);
    case ConstraintKind::positive: return x > 0 && std::isfinite(x);
    case ConstraintKind::lower: return x > lo && std::isfinite(x);
    case ConstraintKind::interval: return x >= lo && x <= hi;
    case ConstraintKind::circular: return x >= 0 && x < dists::kTwoPi;
  }
  return false;
}

double Constraint::lower_bound() const {
  switch (kind) {
    case ConstraintKind::positive: return 0.0;
    case ConstraintKind::lower:
    case ConstraintKind::interval: return lo;
    case ConstraintKind::circular: return 0.0;
    default: return -kInf;
  }
}

double Constraint::upper_bound() const {
  switch (kind) {
    case ConstraintKind::interval: return hi;
    case ConstraintKind::circular: return dists::kTwoPi;
    default: return kInf;
  }
}

bool operator==(const Constraint& a, const Constraint& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == ConstraintKind::lower) return a.lo == b.lo;
  if (a.kind == ConstraintKind::interval) return a.lo == b.lo && a.hi == b.hi;
  return true;
}

std::string format_constraint(const Constraint& c) {
  switch (c.kind) {
    case ConstraintKind::unbounded: return "unbounded";
    case ConstraintKind::positive: return "positive";
    case ConstraintKind::lower: return fmt::format("lower({})", c.lo);
    case ConstraintKind::interval: return fmt::format("interval({},{})", c.lo, c.hi);
    case ConstraintKind::circular: return "circular";
  }
  return "unbounded";
}

namespace {

double parse_bound(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::io, "bad constraint bound '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

Constraint parse_constraint(std::string_view text) {
  if (text == "unbounded") return Constraint::unbounded();
  if (text == "positive") return Constraint::positive();
  if (text == "circular") return Constraint::circular();
  if (text.starts_with("lower(") && text.ends_with(")")) {
    return Constraint::lower(parse_bound(text.substr(6, text.size() - 7)));
  }
  if (text.starts_with("interval(") && text.ends_with(")")) {
    const auto inner = text.substr(9, text.size() - 10);
    const auto comma = inner.find(',');
    if (comma != std::string_view::npos) {
      return Constraint::interval(parse_bound(inner.substr(0, comma)), parse_bound(inner.substr(comma + 1)));
    }
  }
  fail(ErrorKind::io, "unknown constraint '" + std::string(text) + "'");
}

Transformed transform(const Constraint& c, double u) {
  Transformed t;
  switch (c.kind) {
    case ConstraintKind::unbounded:
    case ConstraintKind::circular:
      t.value = u;
      break;
    case ConstraintKind::positive:
    case ConstraintKind::lower: {
      const double e = std::exp(u);
      t.value = (c.kind == ConstraintKind::lower ? c.lo : 0.0) + e;
      t.log_jac = u;
      t.djac = 1.0;
      t.dvalue = e;
      break;
    }
    case ConstraintKind::interval: {
      const double width = c.hi - c.lo;
      const double s = logistic(u);
      t.value = u > 0 ? c.hi - width * logistic(-u) : c.lo + width * s;
      t.log_jac = std::log(width) - softplus(-u) - softplus(u);
      t.djac = 1.0 - 2.0 * s;
      t.dvalue = width * s * logistic(-u);
      break;
    }
  }
  return t;
}

double unconstrain(const Constraint& c, double x) {
  switch (c.kind) {
    case ConstraintKind::unbounded:
    case ConstraintKind::circular: return x;
    case ConstraintKind::positive: return std::log(x);
    case ConstraintKind::lower: return std::log(x - c.lo);
    case ConstraintKind::interval: {
      const double s = (x - c.lo) / (c.hi - c.lo);
      return std::log(s) - std::log1p(-s);
    }
  }
  return x;
}

TargetDensity make_constrained_target(
    std::vector<std::string> names, std::vector<Constraint> constraints,
    std::function<double(std::span<const double> x, std::span<double> grad)> fn) {
  if (names.size() != constraints.size()) fail(ErrorKind::argument, "names and constraints differ in length");
  TargetDensity target;
  target.dim = names.size();
  target.names = std::move(names);
  target.constraints = constraints;
  target.log_density = [constraints, fn](std::span<const double> u, std::span<double> grad) {
    const std::size_t n = u.size();
    std::vector<double> x(n), gx(n, 0.0);
    std::vector<Transformed> t(n);
    double jac = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = transform(constraints[i], u[i]);
      x[i] = t[i].value;
      jac += t[i].log_jac;
    }
    const double lp = fn(x, gx);
    for (std::size_t i = 0; i < n; ++i) grad[i] = gx[i] * t[i].dvalue + t[i].djac;
    return lp + jac;
  };
  target.outputs = [constraints](std::span<const double> u, std::span<double> out) {
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = transform(constraints[i], u[i]).value;
  };
  return target;
}

void SamplerConfig::validate() const {
  if (iter <= 0) fail(ErrorKind::argument, "iter must be positive");
  if (warmup < 0) fail(ErrorKind::argument, "warmup must be non-negative");
  if (warmup >= iter) fail(ErrorKind::argument, fmt::format("warmup ({}) must be below iter ({})", warmup, iter));
  if (chains <= 0) fail(ErrorKind::argument, "chains must be positive");
  if (!(target_accept > 0 && target_accept < 1)) fail(ErrorKind::argument, "target_accept must lie in (0, 1)");
  if (max_treedepth <= 0 || max_treedepth > 30) fail(ErrorKind::argument, "max_treedepth must be in 1..30");
}

// Draws ------------------------------------------------------------------------

std::size_t Draws::index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  fail(ErrorKind::argument, "no parameter named '" + std::string(name) + "'");
}

bool Draws::has(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<double> Draws::chain(int c, std::size_t column, bool include_warmup) const {
  std::vector<double> out;
  const int start = include_warmup ? 0 : warmup;
  out.reserve(static_cast<std::size_t>(iterations() - start));
  for (int it = start; it < iterations(); ++it) out.push_back(at(c, it, column));
  return out;
}

std::vector<std::vector<double>> Draws::per_chain(std::size_t column) const {
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) out.push_back(chain(c, column));
  return out;
}

std::vector<double> Draws::pooled(std::size_t column) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(chains) * static_cast<std::size_t>(samples));
  for (int c = 0; c < chains; ++c) {
    for (int it = warmup; it < iterations(); ++it) out.push_back(at(c, it, column));
  }
  return out;
}

void Draws::add_column(const std::string& name, const std::function<double(std::span<const double> row)>& fn) {
  const std::size_t old = names.size();
  for (int c = 0; c < chains; ++c) {
    std::vector<double> next;
    next.reserve(static_cast<std::size_t>(iterations()) * (old + 1));
    for (int it = 0; it < iterations(); ++it) {
      const auto row = std::span<const double>(values[c]).subspan(static_cast<std::size_t>(it) * old, old);
      next.insert(next.end(), row.begin(), row.end());
      next.push_back(fn(row));
    }
    values[c] = std::move(next);
  }
  names.push_back(name);
}

int Draws::divergences(bool include_warmup) const {
  int n = 0;
  for (const auto& chain_flags : divergent) {
    for (std::size_t it = include_warmup ? 0 : static_cast<std::size_t>(warmup); it < chain_flags.size(); ++it) {
      n += chain_flags[it];
    }
  }
  return n;
}

int Draws::saturated_treedepth(int max_treedepth) const {
  int n = 0;
  for (const auto& depths : treedepth) {
    for (std::size_t it = static_cast<std::size_t>(warmup); it < depths.size(); ++it) {
      n += depths[it] >= max_treedepth;
    }
  }
  return n;
}

// Hamiltonian dynamics -----------------------------------------------------------

namespace {

double evaluate(const TargetDensity& target, std::span<const double> q, std::span<double> grad) {
  double lp = target.log_density(q, grad);
  if (std::isnan(lp)) lp = -kInf;
  if (lp == -kInf) return lp;
  for (double g : grad) {
    if (!std::isfinite(g)) return -kInf;
  }
  return lp;
}

double hamiltonian(const PhasePoint& z, std::span<const double> inv_mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < z.p.size(); ++i) k += inv_mass[i] * z.p[i] * z.p[i];
  return -z.lp + 0.5 * k;
}

}  // namespace

bool leapfrog(const TargetDensity& target, PhasePoint& z, double step, std::span<const double> inv_mass) {
  const std::size_t n = z.q.size();
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * step * z.grad[i];
  for (std::size_t i = 0; i < n; ++i) z.q[i] += step * inv_mass[i] * z.p[i];
  z.lp = evaluate(target, z.q, z.grad);
  if (!std::isfinite(z.lp)) return false;
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * step * z.grad[i];
  return true;
}

namespace {

constexpr double kMaxDeltaH = 1000.0;

struct DualAveraging {
  double mu = 0.0, s_bar = 0.0, x_bar = 0.0, delta = 0.8;
  double counter = 0.0;
  static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;

  void restart() {
    counter = 0.0;
    s_bar = 0.0;
    x_bar = 0.0;
  }

  void learn(double& epsilon, double accept) {
    counter += 1.0;
    accept = std::min(1.0, accept);
    const double eta = 1.0 / (counter + t0);
    s_bar = (1.0 - eta) * s_bar + eta * (delta - accept);
    const double x = mu - s_bar * std::sqrt(counter) / gamma;
    const double x_eta = std::pow(counter, -kappa);
    x_bar = (1.0 - x_eta) * x_bar + x_eta * x;
    epsilon = std::exp(x);
  }

  double final_step() const { return std::exp(x_bar); }
};

// Expanding-window variance estimation on the unconstrained position.
class WindowedVariance {
 public:
  WindowedVariance(int num_warmup, std::size_t dim) : num_warmup_(num_warmup), mean_(dim), m2_(dim) {
    if (num_warmup < 20) {
      active_ = false;
    } else if (init_buffer_ + base_window_ + term_buffer_ > num_warmup) {
      init_buffer_ = static_cast<int>(0.15 * num_warmup);
      term_buffer_ = static_cast<int>(0.1 * num_warmup);
      base_window_ = num_warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  // Returns true when the metric was updated.
  bool learn(std::vector<double>& inv_mass, std::span<const double> q) {
    if (!active_) {
      ++counter_;
      return false;
    }
    if (in_window()) add(q);
    if (end_of_window()) {
      next_window();
      const double n = static_cast<double>(count_);
      for (std::size_t i = 0; i < inv_mass.size(); ++i) {
        const double var = m2_[i] / (n - 1.0);
        inv_mass[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
      }
      reset();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ && counter_ != num_warmup_;
  }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != num_warmup_; }

  void next_window() {
    if (next_window_ == num_warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != num_warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= num_warmup_ - term_buffer_) next_window_ = num_warmup_ - term_buffer_ - 1;
    }
  }

  void add(std::span<const double> q) {
    ++count_;
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      const double d = q[i] - mean_[i];
      mean_[i] += d / static_cast<double>(count_);
      m2_[i] += d * (q[i] - mean_[i]);
    }
  }

  void reset() {
    count_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

  int num_warmup_;
  bool active_ = true;
  int init_buffer_ = 75, term_buffer_ = 50, base_window_ = 25;
  int window_size_ = 0, next_window_ = 0, counter_ = 0;
  long count_ = 0;
  std::vector<double> mean_, m2_;
};

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class Nuts {
 public:
  Nuts(const TargetDensity& target, int max_depth, Rng& rng)
      : target_(target), dim_(target.dim), max_depth_(max_depth), rng_(rng), inv_mass_(target.dim, 1.0) {}

  PhasePoint z;
  double epsilon = 1.0;
  bool divergent = false;
  int depth = 0;

  std::vector<double>& inv_mass() { return inv_mass_; }

  void sample_momentum() {
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] = rng_.normal() / std::sqrt(inv_mass_[i]);
  }

  Vec dtau_dp(const Vec& p) const {
    Vec out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = inv_mass_[i] * p[i];
    return out;
  }

  double energy() const { return hamiltonian(z, inv_mass_); }

  void init_stepsize() {
    const PhasePoint start = z;
    sample_momentum();
    double h0 = energy();
    leapfrog(target_, z, epsilon, inv_mass_);
    double h = energy();
    if (std::isnan(h)) h = kInf;
    double delta_h = h0 - h;
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (;;) {
      z = start;
      sample_momentum();
      h0 = energy();
      leapfrog(target_, z, epsilon, inv_mass_);
      h = energy();
      if (std::isnan(h)) h = kInf;
      delta_h = h0 - h;
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      epsilon = direction == 1 ? 2.0 * epsilon : 0.5 * epsilon;
      if (epsilon > 1e7) fail(ErrorKind::initialization, "step size search diverged; posterior may be improper");
      if (epsilon == 0) fail(ErrorKind::initialization, "step size collapsed to zero");
    }
    z = start;
  }

  // Returns the acceptance statistic.
  double transition() {
    sample_momentum();
    divergent = false;
    const double h0 = energy();

    PhasePoint z_fwd = z, z_bck = z, z_sample = z, z_propose = z;
    Vec p_fwd_fwd = z.p, p_sharp_fwd_fwd = dtau_dp(z.p);
    Vec p_fwd_bck = z.p, p_sharp_fwd_bck = p_sharp_fwd_fwd;
    Vec p_bck_fwd = z.p, p_sharp_bck_fwd = p_sharp_fwd_fwd;
    Vec p_bck_bck = z.p, p_sharp_bck_bck = p_sharp_fwd_fwd;
    Vec rho = z.p;
    double log_sum_weight = 0.0;
    int n_leapfrog = 0;
    double sum_metro = 0.0;
    depth = 0;

    while (depth < max_depth_) {
      Vec rho_fwd(dim_, 0.0), rho_bck(dim_, 0.0);
      bool valid = false;
      double lsw_subtree = -kInf;
      if (rng_.uniform() > 0.5) {
        z = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, h0,
                           1.0, n_leapfrog, lsw_subtree, sum_metro);
        z_fwd = z;
      } else {
        z = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, h0,
                           -1.0, n_leapfrog, lsw_subtree, sum_metro);
        z_bck = z;
      }
      if (!valid) break;
      ++depth;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (rng_.uniform() < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      for (std::size_t i = 0; i < dim_; ++i) rho[i] = rho_bck[i] + rho_fwd[i];
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      Vec rho_ext(dim_);
      for (std::size_t i = 0; i < dim_; ++i) rho_ext[i] = rho_bck[i] + p_fwd_bck[i];
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_ext);
      for (std::size_t i = 0; i < dim_; ++i) rho_ext[i] = rho_fwd[i] + p_bck_fwd[i];
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_ext);
      if (!persist) break;
    }
    z = z_sample;
    return n_leapfrog > 0 ? sum_metro / n_leapfrog : 0.0;
  }

 private:
  static bool criterion(const Vec& p_sharp_minus, const Vec& p_sharp_plus, const Vec& rho) {
    return dot(p_sharp_plus, rho) > 0 && dot(p_sharp_minus, rho) > 0;
  }

  bool build_tree(int d, PhasePoint& z_propose, Vec& p_sharp_beg, Vec& p_sharp_end, Vec& rho, Vec& p_beg,
                  Vec& p_end, double h0, double sign, int& n_leapfrog, double& log_sum_weight,
                  double& sum_metro) {
    if (d == 0) {
      const bool ok = leapfrog(target_, z, sign * epsilon, inv_mass_);
      ++n_leapfrog;
      double h = ok ? energy() : kInf;
      if (std::isnan(h)) h = kInf;
      if (h - h0 > kMaxDeltaH) divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = dtau_dp(z.p);
      p_sharp_end = p_sharp_beg;
      for (std::size_t i = 0; i < dim_; ++i) rho[i] += z.p[i];
      p_beg = z.p;
      p_end = p_beg;
      return !divergent;
    }

    Vec p_sharp_init_end(dim_), p_init_end(dim_), rho_init(dim_, 0.0);
    double lsw_init = -kInf;
    if (!build_tree(d - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    n_leapfrog, lsw_init, sum_metro)) {
      return false;
    }

    PhasePoint z_propose_final = z;
    Vec p_sharp_final_beg(dim_), p_final_beg(dim_), rho_final(dim_, 0.0);
    double lsw_final = -kInf;
    if (!build_tree(d - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0,
                    sign, n_leapfrog, lsw_final, sum_metro)) {
      return false;
    }

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (rng_.uniform() < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }

    Vec rho_subtree(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      rho_subtree[i] = rho_init[i] + rho_final[i];
      rho[i] += rho_subtree[i];
    }
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    Vec rho_ext(dim_);
    for (std::size_t i = 0; i < dim_; ++i) rho_ext[i] = rho_init[i] + p_final_beg[i];
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_ext);
    for (std::size_t i = 0; i < dim_; ++i) rho_ext[i] = rho_final[i] + p_init_end[i];
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_ext);
    return persist;
  }

  const TargetDensity& target_;
  std::size_t dim_;
  int max_depth_;
  Rng& rng_;
  std::vector<double> inv_mass_;
};

struct ChainResult {
  std::vector<double> values;
  std::vector<std::uint8_t> divergent;
  std::vector<std::uint8_t> treedepth;
  double step_size = 0.0;
};

void initialize(const TargetDensity& target, PhasePoint& z, Rng& rng) {
  const std::size_t n = target.dim;
  z.q.assign(n, 0.0);
  z.p.assign(n, 0.0);
  z.grad.assign(n, 0.0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (auto& v : z.q) v = -2.0 + 4.0 * rng.uniform();
    z.lp = evaluate(target, z.q, z.grad);
    if (std::isfinite(z.lp)) return;
  }
  fail(ErrorKind::initialization, "no finite log density at 100 random initial points");
}

void record(const TargetDensity& target, const PhasePoint& z, std::vector<double>& values) {
  const std::size_t k = target.names.size();
  const std::size_t offset = values.size();
  values.resize(offset + k);
  const std::span<double> out(values.data() + offset, k);
  target.outputs(z.q, out);
  for (std::size_t i = 0; i < k; ++i) {
    if (target.constraints[i].kind == ConstraintKind::circular) out[i] = dists::wrap_angle(out[i]);
  }
}

ChainResult run_chain(const TargetDensity& target, const SamplerConfig& config, int chain) {
  Rng rng = Rng::substream(config.seed, static_cast<std::uint64_t>(chain));
  Nuts nuts(target, config.max_treedepth, rng);
  initialize(target, nuts.z, rng);

  ChainResult result;
  result.values.reserve(static_cast<std::size_t>(config.iter) * target.names.size());
  result.divergent.reserve(static_cast<std::size_t>(config.iter));
  result.treedepth.reserve(static_cast<std::size_t>(config.iter));

  nuts.init_stepsize();
  DualAveraging adapt;
  adapt.delta = config.target_accept;
  adapt.mu = std::log(10.0 * nuts.epsilon);
  WindowedVariance metric(config.warmup, target.dim);

  for (int it = 0; it < config.iter; ++it) {
    const double accept = nuts.transition();
    if (it < config.warmup) {
      adapt.learn(nuts.epsilon, accept);
      if (metric.learn(nuts.inv_mass(), nuts.z.q)) {
        nuts.init_stepsize();
        adapt.mu = std::log(10.0 * nuts.epsilon);
        adapt.restart();
      }
      if (it == config.warmup - 1) nuts.epsilon = adapt.final_step();
    }
    record(target, nuts.z, result.values);
    result.divergent.push_back(nuts.divergent ? 1 : 0);
    result.treedepth.push_back(static_cast<std::uint8_t>(nuts.depth));
  }
  result.step_size = nuts.epsilon;
  return result;
}

}  // namespace

Draws nuts_sample(const TargetDensity& target, const SamplerConfig& config, Execution execution) {
  config.validate();
  if (target.dim == 0) fail(ErrorKind::argument, "target has no dimensions");
  if (target.names.size() != target.constraints.size()) {
    fail(ErrorKind::argument, "target names and constraints differ in length");
  }

  std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.chains));
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int c = 0; c < config.chains; ++c) {
      try {
        results[c] = run_chain(target, config, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  } else {
    for (int c = 0; c < config.chains; ++c) {
      try {
        results[c] = run_chain(target, config, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Draws draws;
  draws.names = target.names;
  draws.chains = config.chains;
  draws.warmup = config.warmup;
  draws.samples = config.samples();
  for (auto& r : results) {
    draws.values.push_back(std::move(r.values));
    draws.divergent.push_back(std::move(r.divergent));
    draws.treedepth.push_back(std::move(r.treedepth));
    draws.step_size.push_back(r.step_size);
  }
  return draws;
}

}  // namespace psybayes

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psybayes {

enum class ConstraintKind { unbounded, positive, lower, interval, circular };

struct Constraint {
  ConstraintKind kind = ConstraintKind::unbounded;
  double lo = 0.0;
  double hi = 0.0;

  static Constraint unbounded() { return {}; }
  static Constraint positive() { return {ConstraintKind::positive, 0.0, 0.0}; }
  static Constraint lower(double lo) { return {ConstraintKind::lower, lo, 0.0}; }
  static Constraint interval(double lo, double hi) { return {ConstraintKind::interval, lo, hi}; }
  static Constraint circular() { return {ConstraintKind::circular, 0.0, 0.0}; }

  /// Does `x` satisfy the constraint (circular values must lie in [0, 2 pi)).
  bool admits(double x) const;
  double lower_bound() const;
  double upper_bound() const;
};

bool operator==(const Constraint& a, const Constraint& b);

/// "unbounded", "positive", "lower(1)", "interval(0,255)", "circular".
std::string format_constraint(const Constraint& c);
Constraint parse_constraint(std::string_view text);

struct Transformed {
  double value = 0.0;     // constrained value
  double log_jac = 0.0;   // log |d value / du|
  double djac = 0.0;      // d log_jac / du
  double dvalue = 1.0;    // d value / du
};

/// Unconstrained -> constrained map with its log-Jacobian.
Transformed transform(const Constraint& c, double u);
/// Inverse of transform (values on the boundary map to +/- inf).
double unconstrain(const Constraint& c, double x);

/// Differentiable log density over an unconstrained vector.
///
/// `log_density` fills `grad` and returns the log density (including any
/// Jacobian terms). `outputs` maps an unconstrained point to the reported
/// quantities named by `names`; reported circular quantities are reduced into
/// [0, 2 pi) by the sampler.
struct TargetDensity {
  std::size_t dim = 0;
  std::vector<std::string> names;
  std::vector<Constraint> constraints;
  std::function<double(std::span<const double> u, std::span<double> grad)> log_density;
  std::function<void(std::span<const double> u, std::span<double> out)> outputs;
};

/// Target whose reported quantities are the transformed coordinates. `fn`
/// receives constrained values and must fill d/d(value).
TargetDensity make_constrained_target(
    std::vector<std::string> names, std::vector<Constraint> constraints,
    std::function<double(std::span<const double> x, std::span<double> grad)> fn);

struct SamplerConfig {
  int iter = 2000;
  int warmup = 1000;
  int chains = 4;
  std::uint64_t seed = 0;
  double target_accept = 0.8;
  int max_treedepth = 10;

  int samples() const { return iter - warmup; }
  /// Throws an argument error.
  void validate() const;
};

/// Posterior draws. values[c] holds every iteration (warmup first) of chain c,
/// row-major with one column per name.
struct Draws {
  std::vector<std::string> names;
  int chains = 0;
  int warmup = 0;
  int samples = 0;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::uint8_t>> divergent;
  std::vector<std::vector<std::uint8_t>> treedepth;
  std::vector<double> step_size;

  int iterations() const { return warmup + samples; }
  std::size_t columns() const { return names.size(); }
  /// Throws an argument error for unknown names.
  std::size_t index(std::string_view name) const;
  bool has(std::string_view name) const;

  double at(int chain, int iteration, std::size_t column) const {
    return values[chain][static_cast<std::size_t>(iteration) * names.size() + column];
  }
  double& at(int chain, int iteration, std::size_t column) {
    return values[chain][static_cast<std::size_t>(iteration) * names.size() + column];
  }

  /// Post-warmup draws of one column for one chain (or with warmup).
  std::vector<double> chain(int c, std::size_t column, bool include_warmup = false) const;
  std::vector<std::vector<double>> per_chain(std::size_t column) const;
  /// Post-warmup draws, chain-major.
  std::vector<double> pooled(std::size_t column) const;
  std::vector<double> pooled(std::string_view name) const { return pooled(index(name)); }

  /// Appends a column computed per iteration from the row of existing values.
  void add_column(const std::string& name, const std::function<double(std::span<const double> row)>& fn);

  int divergences(bool include_warmup = false) const;
  int saturated_treedepth(int max_treedepth) const;
};

enum class Execution { serial, parallel };

struct PhasePoint {
  std::vector<double> q, p, grad;
  double lp = 0.0;
};

/// One leapfrog step in place. Returns false when the new density or
/// gradient is not finite (a divergence).
bool leapfrog(const TargetDensity& target, PhasePoint& z, double step, std::span<const double> inv_mass);

/// Multinomial NUTS with step-size and diagonal metric adaptation.
Draws nuts_sample(const TargetDensity& target, const SamplerConfig& config,
                  Execution execution = Execution::parallel);

}  // namespace psybayes

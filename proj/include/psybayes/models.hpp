#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "psybayes/prior.hpp"
#include "psybayes/sampler.hpp"

namespace psybayes {

enum class ModelKind { ttest, reaction_time, success_rate, linear, color };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

enum class Level { group, subject };

struct ParamInfo {
  std::string name;
  Level level = Level::group;
  int subject = 0;  // 1-based, 0 for group parameters
  Constraint constraint;
  bool derived = false;
};

/// Named numeric columns, kept in input order.
struct FitData {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  void add(const std::string& name, std::vector<double> values);
  bool has(std::string_view name) const;
  const std::vector<double>& column(std::string_view name) const;
};

struct Fit {
  ModelKind kind = ModelKind::ttest;
  FitData data;
  PriorMap priors;
  SamplerConfig config;
  Draws draws;
  std::vector<ParamInfo> params;

  const ParamInfo& param(std::string_view name) const;
  /// Number of subjects in hierarchical fits, 0 otherwise.
  int subjects() const;
  bool hierarchical() const { return kind == ModelKind::reaction_time || kind == ModelKind::success_rate ||
                                    kind == ModelKind::linear; }
};

/// Names that accept a prior for each model.
std::vector<std::string> prior_parameter_names(ModelKind kind);

// Log-posterior targets (exposed for gradient checks and benchmarks). -------

TargetDensity ttest_target(const std::vector<double>& y, const PriorMap& priors);
TargetDensity reaction_time_target(const std::vector<double>& t, const std::vector<int>& s,
                                   const PriorMap& priors);
TargetDensity success_rate_target(const std::vector<double>& r, const std::vector<int>& s,
                                  const PriorMap& priors);
TargetDensity linear_target(const std::vector<double>& x, const std::vector<double>& y, const std::vector<int>& s,
                            const PriorMap& priors);

struct ColorColumns {
  std::vector<double> r, g, b, h, s, v;
};

/// Validates (row-indexed data errors) and fills both representations.
ColorColumns color_columns(const std::vector<std::array<double, 3>>& rows, bool hsv);

/// The six independent component targets, in the order r, g, b, h, s, v.
std::vector<TargetDensity> color_targets(const ColorColumns& data, const PriorMap& priors);

// Fits ------------------------------------------------------------------------

Fit fit_ttest(const std::vector<double>& y, const PriorMap& priors, const SamplerConfig& config,
              Execution execution = Execution::parallel);
Fit fit_reaction_time(const std::vector<double>& t, const std::vector<int>& s, const PriorMap& priors,
                      const SamplerConfig& config, Execution execution = Execution::parallel);
Fit fit_success_rate(const std::vector<double>& r, const std::vector<int>& s, const PriorMap& priors,
                     const SamplerConfig& config, Execution execution = Execution::parallel);
Fit fit_linear(const std::vector<double>& x, const std::vector<double>& y, const std::vector<int>& s,
               const PriorMap& priors, const SamplerConfig& config, Execution execution = Execution::parallel);
Fit fit_color(const std::vector<std::array<double, 3>>& colors, bool hsv, const PriorMap& priors,
              const SamplerConfig& config, Execution execution = Execution::parallel);

/// Registry for a model kind with `subjects` subjects, including derived
/// quantities. Used by fits and by fit-file loading.
std::vector<ParamInfo> model_registry(ModelKind kind, int subjects, const PriorMap& priors);

/// Appends derived quantities (rt, rt_subjects[i]) to reaction-time draws.
void add_derived(ModelKind kind, int subjects, Draws& draws);

// Colors ----------------------------------------------------------------------

struct Hsv {
  double h = 0.0;  // radians in [0, 2 pi)
  double s = 0.0;
  double v = 0.0;
};

/// Hexcone conversion of 0..255 components. Gray has hue 0.
Hsv rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

// Parameter tables ------------------------------------------------------------

struct ParamTable {
  std::vector<int> chain;      // 1-based
  std::vector<int> iteration;  // 1-based, post-warmup
  std::vector<std::string> name;
  std::vector<double> value;

  std::size_t rows() const { return value.size(); }
};

/// Group-level draws (every parameter for non-hierarchical fits).
ParamTable get_parameters(const Fit& fit);
/// Subject-level draws; unsupported for ttest and color fits.
ParamTable get_subject_parameters(const Fit& fit);

}  // namespace psybayes

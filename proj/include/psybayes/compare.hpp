#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psybayes/diagnostics.hpp"
#include "psybayes/models.hpp"
#include "psybayes/rng.hpp"

namespace psybayes {

struct NamedSeries {
  std::string name;
  std::vector<double> draws;
  bool circular = false;
};

/// Posterior draws of the group means: mu (ttest), rt (reaction time),
/// p (success rate), intercept and slope (linear), six components (color).
std::vector<NamedSeries> mean_draws(const Fit& fit);

/// Posterior predictive draws of a new observation, one per post-warmup
/// draw. `x` is the predictor, required for linear fits.
std::vector<NamedSeries> predictive_draws(const Fit& fit, std::uint64_t seed, std::optional<double> x = {});

/// Fisher-Yates shuffle in place.
void shuffle(std::vector<double>& v, Rng& rng);

/// Shuffles series i with substream (seed, i) and truncates all to the
/// shortest length.
std::vector<std::vector<double>> align_series(std::vector<std::vector<double>> series, std::uint64_t seed);

/// a - b, or the signed shortest arc in (-pi, pi] for angles.
double difference(double a, double b, bool circular);

struct ComparisonResult {
  double p_smaller = 0.0;
  double p_greater = 0.0;
  double p_equal = 0.0;
  double se_smaller = 0.0;
  double se_greater = 0.0;
  double se_equal = 0.0;
  Interval hdi;
  std::optional<double> rope;
  std::size_t n = 0;
};

/// Elementwise comparison of two aligned series. Without a rope, exact ties
/// count half to each side and p_equal is 0.
ComparisonResult compare_pair(const std::vector<double>& a, const std::vector<double>& b, std::optional<double> rope,
                              bool circular = false);

/// Pairs a and b by independent shuffles and differences them.
std::vector<double> pair_difference(std::vector<double> a, std::vector<double> b, std::uint64_t seed,
                                    bool circular = false);

struct RolesTable {
  std::vector<double> largest;
  std::vector<double> smallest;
  std::vector<double> equal_largest;
  std::vector<double> equal_smallest;
};

/// Per draw, the group within rope of the maximum (minimum) scores largest
/// (smallest) when it is alone; otherwise each such group gets 1/|T| of
/// the equal mass.
RolesTable roles_probabilities(const std::vector<std::vector<double>>& aligned, double rope);

struct PairResult {
  int a = 0;  // 0-based fit indices
  int b = 0;
  ComparisonResult result;
};

struct SeriesComparison {
  std::string name;
  bool circular = false;
  std::vector<PairResult> pairs;
  std::optional<RolesTable> roles;
};

std::vector<SeriesComparison> compare_means(const std::vector<const Fit*>& fits, std::optional<double> rope,
                                            std::uint64_t seed);
std::vector<SeriesComparison> compare_distributions(const std::vector<const Fit*>& fits, std::optional<double> rope,
                                                    std::uint64_t seed, std::optional<double> x = {});

/// Compares already extracted series (one list per fit, same names).
std::vector<SeriesComparison> compare_series(const std::vector<std::vector<NamedSeries>>& per_fit,
                                             std::optional<double> rope, std::uint64_t seed);

std::string format_comparison(const std::vector<SeriesComparison>& comparisons, ModelKind kind);

}  // namespace psybayes

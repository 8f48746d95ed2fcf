#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "psybayes/rng.hpp"
#include "psybayes/sampler.hpp"

namespace psybayes {

/// Column-major data handed to statistics. Every column has `rows` values.
struct BootstrapData {
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  static BootstrapData from_vector(std::vector<double> v) { return {{std::move(v)}}; }
};

/// Statistic of weighted data. Weights lie on the simplex; the generator is
/// only needed by adapters that resample.
using WeightedStatistic =
    std::function<std::vector<double>(const BootstrapData& data, std::span<const double> weights, Rng& rng)>;

struct BootstrapResult {
  std::string statistic;
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  std::vector<double> draws;  // n_samples x dim, row-major; NaN rows are missing
  std::size_t missing = 0;

  double at(std::size_t draw, std::size_t k = 0) const { return draws[draw * dim + k]; }
  /// Non-missing values of component k.
  std::vector<double> component(std::size_t k = 0) const;
};

inline constexpr std::size_t kDefaultBootstrapSamples = 4000;
inline constexpr std::size_t kResampleFactor = 1000;

/// Draw i uses Dirichlet(1,...,1) weights from substream (seed, i).
BootstrapResult bayes_bootstrap(const BootstrapData& data, const WeightedStatistic& statistic, std::string name,
                                std::size_t n_samples, std::uint64_t seed,
                                Execution execution = Execution::parallel);

// Built-in weighted statistics (column indices into the data).
WeightedStatistic weighted_mean(std::size_t column = 0);
WeightedStatistic weighted_variance(std::size_t column = 0);
WeightedStatistic weighted_quantile(double q, std::size_t column = 0);
/// Weighted least squares of column y on the predictor columns; returns the
/// intercept followed by one slope per predictor.
WeightedStatistic weighted_ols(std::size_t y, std::vector<std::size_t> predictors);

/// Wraps an unweighted statistic: resamples n * kResampleFactor rows from a
/// multinomial with the given weights and evaluates on the copy.
WeightedStatistic resampling_adapter(std::function<std::vector<double>(const BootstrapData&)> statistic,
                                     std::size_t factor = kResampleFactor);

}  // namespace psybayes

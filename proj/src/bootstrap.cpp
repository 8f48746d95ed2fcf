#include "psybayes/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "psybayes/dists.hpp"
#include "psybayes/error.hpp"

namespace psybayes {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<double>& checked_column(const BootstrapData& data, std::size_t k) {
  if (k >= data.columns.size()) fail(ErrorKind::argument, "statistic column out of range");
  return data.columns[k];
}

}  // namespace

std::vector<double> BootstrapResult::component(std::size_t k) const {
  std::vector<double> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double v = at(i, k);
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

BootstrapResult bayes_bootstrap(const BootstrapData& data, const WeightedStatistic& statistic, std::string name,
                                std::size_t n_samples, std::uint64_t seed, Execution execution) {
  const std::size_t n = data.rows();
  if (n == 0) fail(ErrorKind::data, "bootstrap data is empty");
  for (const auto& c : data.columns) {
    if (c.size() != n) fail(ErrorKind::data, "bootstrap columns differ in length");
  }
  if (n_samples == 0) fail(ErrorKind::argument, "number of bootstrap samples must be positive");

  BootstrapResult out;
  out.statistic = std::move(name);
  out.n_samples = n_samples;
  {
    // The first draw fixes the dimension.
    Rng rng = Rng::substream(seed, 0);
    const auto w = dists::sample_dirichlet_uniform(n, rng);
    const auto v = statistic(data, w, rng);
    if (v.empty()) fail(ErrorKind::argument, "statistic returned no values");
    out.dim = v.size();
    out.draws.assign(n_samples * out.dim, kNaN);
  }

  auto one = [&](std::size_t i) -> std::size_t {
    Rng rng = Rng::substream(seed, i);
    const auto w = dists::sample_dirichlet_uniform(n, rng);
    const auto v = statistic(data, w, rng);
    bool ok = v.size() == out.dim;
    for (std::size_t k = 0; ok && k < v.size(); ++k) ok = std::isfinite(v[k]);
    if (!ok) return 1;
    std::copy(v.begin(), v.end(), out.draws.begin() + static_cast<std::ptrdiff_t>(i * out.dim));
    return 0;
  };

  std::size_t missing = 0;
  if (execution == Execution::parallel) {
    const auto count = static_cast<std::ptrdiff_t>(n_samples);
#pragma omp parallel for schedule(static) reduction(+ : missing)
    for (std::ptrdiff_t i = 0; i < count; ++i) missing += one(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n_samples; ++i) missing += one(i);
  }
  out.missing = missing;
  return out;
}

WeightedStatistic weighted_mean(std::size_t column) {
  return [column](const BootstrapData& data, std::span<const double> w, Rng&) {
    const auto& x = checked_column(data, column);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * (x[i] - x[0]);
    return std::vector<double>{x[0] + s};
  };
}

WeightedStatistic weighted_variance(std::size_t column) {
  return [column](const BootstrapData& data, std::span<const double> w, Rng&) {
    const auto& x = checked_column(data, column);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m += w[i] * (x[i] - x[0]);
    m += x[0];
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * (x[i] - m) * (x[i] - m);
    return std::vector<double>{s};
  };
}

WeightedStatistic weighted_quantile(double q, std::size_t column) {
  if (!(q >= 0 && q <= 1)) fail(ErrorKind::argument, "quantile must lie in [0, 1]");
  return [q, column](const BootstrapData& data, std::span<const double> w, Rng&) {
    const auto& x = checked_column(data, column);
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    double cum = 0.0;
    for (std::size_t i : order) {
      cum += w[i];
      if (cum >= q) return std::vector<double>{x[i]};
    }
    return std::vector<double>{x[order.back()]};
  };
}

WeightedStatistic weighted_ols(std::size_t y, std::vector<std::size_t> predictors) {
  return [y, predictors](const BootstrapData& data, std::span<const double> w, Rng&) {
    const auto& yv = checked_column(data, y);
    const std::size_t n = yv.size();
    const auto p = static_cast<Eigen::Index>(predictors.size() + 1);
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd row(p);
    for (std::size_t i = 0; i < n; ++i) {
      row[0] = 1.0;
      for (std::size_t k = 0; k < predictors.size(); ++k)
        row[static_cast<Eigen::Index>(k + 1)] = checked_column(data, predictors[k])[i];
      xtx.noalias() += w[i] * row * row.transpose();
      xty.noalias() += w[i] * yv[i] * row;
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
    if (!lu.isInvertible()) return std::vector<double>(static_cast<std::size_t>(p), kNaN);
    const Eigen::VectorXd beta = lu.solve(xty);
    return std::vector<double>(beta.data(), beta.data() + p);
  };
}

WeightedStatistic resampling_adapter(std::function<std::vector<double>(const BootstrapData&)> statistic,
                                     std::size_t factor) {
  if (factor == 0) fail(ErrorKind::argument, "resampling factor must be positive");
  return [statistic = std::move(statistic), factor](const BootstrapData& data, std::span<const double> w, Rng& rng) {
    const std::size_t n = data.rows();
    std::vector<double> cum(n);
    std::partial_sum(w.begin(), w.end(), cum.begin());
    const std::size_t m = n * factor;
    BootstrapData copy;
    copy.columns.assign(data.columns.size(), {});
    for (auto& c : copy.columns) c.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double u = rng.uniform() * cum.back();
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      const auto i = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), n - 1);
      for (std::size_t k = 0; k < copy.columns.size(); ++k) copy.columns[k].push_back(data.columns[k][i]);
    }
    return statistic(copy);
  };
}

}  // namespace psybayes

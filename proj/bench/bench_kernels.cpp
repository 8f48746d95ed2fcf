// Serial vs OpenMP for the parallel kernels. Arg 0 is serial, 1 is parallel.
#include <benchmark/benchmark.h>

#include <array>
#include <vector>

#include "psybayes/bootstrap.hpp"
#include "psybayes/diagnostics.hpp"
#include "psybayes/dists.hpp"
#include "psybayes/models.hpp"
#include "psybayes/sampler.hpp"

using namespace psybayes;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::parallel : Execution::serial; }

SamplerConfig config(int iter) {
  SamplerConfig c;
  c.seed = 17;
  c.iter = iter;
  c.warmup = iter / 2;
  return c;
}

std::vector<double> normal_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> y(n);
  for (auto& v : y) v = 60 + 10 * rng.normal();
  return y;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "parallel" : "serial"); }

// Four chains on a 50-dimensional correlated normal.
void BM_nuts_chains(benchmark::State& state) {
  constexpr std::size_t dim = 50;
  TargetDensity target;
  target.dim = dim;
  for (std::size_t i = 0; i < dim; ++i) target.names.push_back("x" + std::to_string(i));
  target.constraints.assign(dim, Constraint{});
  target.log_density = [](std::span<const double> u, std::span<double> g) {
    double lp = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double prev = i ? u[i - 1] : 0.0, d = u[i] - 0.5 * prev;
      lp -= 0.5 * d * d;
      g[i] = -d;
      if (i) g[i - 1] += 0.5 * d;
    }
    return lp;
  };
  target.outputs = [](std::span<const double> u, std::span<double> out) { std::copy(u.begin(), u.end(), out.begin()); };
  const auto c = config(1000);
  for (auto _ : state) benchmark::DoNotOptimize(nuts_sample(target, c, mode(state)));
  label(state);
}

// Three independent component fits.
void BM_color_components(benchmark::State& state) {
  Rng rng(3);
  std::vector<std::array<double, 3>> rows(300);
  for (auto& r : rows)
    r = {std::clamp(180 + 20 * rng.normal(), 0.0, 255.0), std::clamp(90 + 15 * rng.normal(), 0.0, 255.0),
         std::clamp(60 + 10 * rng.normal(), 0.0, 255.0)};
  const auto c = config(600);
  for (auto _ : state) benchmark::DoNotOptimize(fit_color(rows, false, {}, c, mode(state)));
  label(state);
}

void BM_bootstrap_draws(benchmark::State& state) {
  const auto data = BootstrapData::from_vector(normal_data(2000, 5));
  const auto stat = weighted_quantile(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(bayes_bootstrap(data, stat, "median", 4000, 9, mode(state)));
  label(state);
}

// Summary over a hierarchical fit with many subject rows.
void BM_summary_rows(benchmark::State& state) {
  static const Fit fit = [] {
    Rng rng(11);
    std::vector<double> t;
    std::vector<int> s;
    for (int i = 1; i <= 40; ++i)
      for (int k = 0; k < 30; ++k) {
        t.push_back(dists::sample_emg(0.5, 0.05, 10, rng));
        s.push_back(i);
      }
    return fit_reaction_time(t, s, {}, config(1000));
  }();
  for (auto _ : state) benchmark::DoNotOptimize(summarize(fit, mode(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_nuts_chains)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_color_components)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_bootstrap_draws)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_summary_rows)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();

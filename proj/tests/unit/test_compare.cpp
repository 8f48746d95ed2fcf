#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "psybayes/compare.hpp"
#include "psybayes/dists.hpp"
#include "support.hpp"

using namespace psybayes;
using psytest::expect_error;

namespace {

// Fit with hand-written draws (one chain, no warmup).
Fit fake_fit(ModelKind kind, const std::map<std::string, std::vector<double>>& cols, int subjects = 0) {
  Fit f;
  f.kind = kind;
  f.params = model_registry(kind, subjects, {});
  std::size_t n = cols.begin()->second.size();
  for (const auto& [name, v] : cols) f.draws.names.push_back(name);
  f.draws.chains = 1;
  f.draws.samples = static_cast<int>(n);
  f.draws.values.assign(1, {});
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [name, v] : cols) f.draws.values[0].push_back(v[i]);
  f.config.chains = 1;
  f.config.iter = static_cast<int>(n) + 1;
  f.config.warmup = 1;
  return f;
}

Fit ttest_fit(std::vector<double> mu, double nu = 30, double sigma = 1) {
  const std::size_t n = mu.size();
  return fake_fit(ModelKind::ttest, {{"mu", std::move(mu)}, {"nu", std::vector<double>(n, nu)},
                                     {"sigma", std::vector<double>(n, sigma)}});
}

// Independent shuffle: raw 64-bit Mersenne twister, rejection sampling,
// Fisher-Yates from the top.
std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> oracle_shuffle(std::vector<double> v, std::uint64_t seed, std::uint64_t stream) {
  std::mt19937_64 eng(splitmix(seed ^ splitmix(stream + 0x632be59bd9b4e019ULL)));
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t r;
    do r = eng();
    while (r < threshold);
    std::swap(v[i - 1], v[r % bound]);
  }
  return v;
}

struct Counts {
  std::size_t lt = 0, gt = 0, eq = 0;
};

Counts count_oracle(const std::vector<double>& a, const std::vector<double>& b, double rope) {
  Counts c;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    const double d = a[i] - b[i];
    if (std::abs(d) <= rope) {
      ++c.eq;
    } else if (d < 0) {
      ++c.lt;
    } else {
      ++c.gt;
    }
  }
  return c;
}

}  // namespace

TEST_CASE("mean_draws series") {
  const auto t = ttest_fit({1, 2, 3});
  const auto s = mean_draws(t);
  REQUIRE(s.size() == 1);
  CHECK(s[0].name == "mu");
  CHECK(s[0].draws == std::vector<double>{1, 2, 3});

  std::map<std::string, std::vector<double>> lin;
  for (const char* n : {"alpha[1]", "beta[1]", "sigma[1]", "mu_a", "sigma_a", "mu_b", "sigma_b", "mu_s", "sigma_s"})
    lin[n] = {1, 2};
  const auto l = mean_draws(fake_fit(ModelKind::linear, lin, 1));
  REQUIRE(l.size() == 2);
  CHECK(l[0].name == "intercept");
  CHECK(l[1].name == "slope");

  std::map<std::string, std::vector<double>> col;
  for (const char* n : {"mu_r", "sigma_r", "mu_g", "sigma_g", "mu_b", "sigma_b", "mu_h", "kappa_h", "mu_s", "sigma_s",
                        "mu_v", "sigma_v"})
    col[n] = {0.5, 0.6};
  const auto c = mean_draws(fake_fit(ModelKind::color, col));
  REQUIRE(c.size() == 6);
  for (const auto& x : c) CHECK(x.circular == (x.name == "h"));
}

TEST_CASE("pair_difference") {
  std::vector<double> a(4000);
  Rng rng(1);
  for (auto& v : a) v = rng.normal();
  const auto d = pair_difference(a, a, 5);
  double m = 0;
  for (double v : d) m += v;
  CHECK(std::abs(m / d.size()) < 4 * std::sqrt(2.0 / d.size()));
  CHECK(std::count(d.begin(), d.end(), 0.0) < 10);  // not paired with itself

  const auto ones = pair_difference(std::vector<double>(50, 1.0), std::vector<double>(70, 0.0), 3);
  CHECK(ones.size() == 50);
  for (double v : ones) CHECK(v == 1.0);

  const std::vector<double> x{3.1, -0.4, 7.7, 2.0, 5.5, 0.0, -2.2, 9.9, 1.25, 4.0};
  const std::vector<double> y{0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5, 10.5, 11.5};
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 123456789ULL}) {
    const auto got = pair_difference(x, y, seed);
    const auto xs = oracle_shuffle(x, seed, 0), ys = oracle_shuffle(y, seed, 1);
    REQUIRE(got.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(got[i] == xs[i] - ys[i]);
  }
}

TEST_CASE("circular differences use the short arc") {
  CHECK(difference(0.1, dists::kTwoPi - 0.1, true) == doctest::Approx(0.2));
  CHECK(difference(dists::kTwoPi - 0.1, 0.1, true) == doctest::Approx(-0.2));
  CHECK(difference(M_PI, 0.0, true) == doctest::Approx(M_PI));
  CHECK(difference(0.0, M_PI, true) == doctest::Approx(M_PI));
  CHECK(difference(0.1, dists::kTwoPi - 0.1, false) == doctest::Approx(0.2 - dists::kTwoPi));
}

TEST_CASE("compare_pair examples") {
  auto r = compare_pair(std::vector<double>(100, 1.0), std::vector<double>(100, 0.0), 0.5);
  CHECK(r.p_greater == 1.0);
  CHECK(r.p_smaller == 0.0);
  CHECK(r.hdi.lo == 1.0);
  CHECK(r.hdi.hi == 1.0);
  CHECK(r.se_greater == 0.0);

  std::vector<double> a(200);
  Rng rng(2);
  for (auto& v : a) v = rng.normal();
  r = compare_pair(a, a, 0.1);
  CHECK(r.p_equal == 1.0);

  r = compare_pair(a, a, std::nullopt);
  CHECK(r.p_equal == 0.0);
  CHECK(r.p_smaller == 0.5);

  r = compare_pair({0, 0, 1, 2}, {1, 1, 1, 1}, std::nullopt);
  CHECK(r.p_smaller == 0.625);
  CHECK(r.se_smaller == doctest::Approx(std::sqrt(0.625 * 0.375 / 4)));
  expect_error(ErrorKind::argument, [] { compare_pair({1, 2}, {1, 2}, -0.1); });
}

TEST_CASE("counting partition, antisymmetry and rope monotonicity") {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + rng.bounded(300);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = std::round(rng.normal() * 4) / 4;
    for (auto& v : b) v = std::round(rng.normal() * 4) / 4 + 0.25;
    const double rope = std::round(rng.uniform() * 4) / 8;
    const auto r = compare_pair(a, b, rope);
    CHECK(r.p_smaller + r.p_greater + r.p_equal == 1.0);
    const auto c = count_oracle(a, b, rope);
    CHECK(r.p_smaller == static_cast<double>(c.lt) / n);
    CHECK(r.p_greater == static_cast<double>(c.gt) / n);
    CHECK(r.p_equal == 1.0 - (static_cast<double>(c.lt) / n + static_cast<double>(c.gt) / n));

    const auto back = compare_pair(b, a, rope);
    CHECK(back.p_greater == r.p_smaller);
    CHECK(back.p_smaller == r.p_greater);

    const auto none = compare_pair(a, b, std::nullopt);
    CHECK(none.p_smaller + none.p_greater + none.p_equal == 1.0);
    CHECK(std::abs(compare_pair(b, a, std::nullopt).p_greater - none.p_smaller) < 1e-15);

    const auto zero = compare_pair(a, b, 0.0);
    CHECK(zero.p_equal * n == doctest::Approx(static_cast<double>(count_oracle(a, b, 0.0).eq)));
    double last = -1;
    for (double rp : {0.0, 0.1, 0.25, 0.5, 1.0, 3.0}) {
      const double pe = compare_pair(a, b, rp).p_equal;
      CHECK(pe >= last);
      last = pe;
    }
  }
}

TEST_CASE("roles examples") {
  auto t = roles_probabilities({std::vector<double>(10, 1), std::vector<double>(10, 2), std::vector<double>(10, 3)}, 0);
  CHECK(t.largest == std::vector<double>{0, 0, 1});
  CHECK(t.smallest == std::vector<double>{1, 0, 0});
  CHECK(t.equal_largest == std::vector<double>{0, 0, 0});
  CHECK(t.equal_smallest == std::vector<double>{0, 0, 0});

  t = roles_probabilities({std::vector<double>(10, 1.0), std::vector<double>(10, 1.005), std::vector<double>(10, 2.0)},
                          0.01);
  CHECK(t.smallest == std::vector<double>{0, 0, 0});
  CHECK(t.equal_smallest == std::vector<double>{0.5, 0.5, 0});
  CHECK(t.largest == std::vector<double>{0, 0, 1});
}

TEST_CASE("roles match a counting oracle") {
  Rng rng(4);
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t k = 3 + rng.bounded(3), n = 1 + rng.bounded(60);
    std::vector<std::vector<double>> g(k, std::vector<double>(n));
    for (auto& s : g)
      for (auto& v : s) v = static_cast<double>(rng.bounded(5)) * 0.5;
    const double rope = static_cast<double>(rng.bounded(3)) * 0.5;
    const auto t = roles_probabilities(g, rope);

    // per draw: sort indices by value, walk from each end
    std::vector<std::size_t> alone_hi(k), alone_lo(k);
    std::vector<std::vector<std::size_t>> tie_hi(k, std::vector<std::size_t>(k + 1)), tie_lo = tie_hi;
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<std::size_t> idx(k);
      for (std::size_t i = 0; i < k; ++i) idx[i] = i;
      std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return g[x][j] < g[y][j]; });
      std::vector<std::size_t> hi, lo;
      for (auto it = idx.rbegin(); it != idx.rend() && g[idx.back()][j] - g[*it][j] <= rope; ++it) hi.push_back(*it);
      for (auto it = idx.begin(); it != idx.end() && g[*it][j] - g[idx.front()][j] <= rope; ++it) lo.push_back(*it);
      if (hi.size() == 1) ++alone_hi[hi[0]];
      else for (auto x : hi) ++tie_hi[x][hi.size()];
      if (lo.size() == 1) ++alone_lo[lo[0]];
      else for (auto x : lo) ++tie_lo[x][lo.size()];
    }
    double sum_hi = 0, sum_lo = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double eh = 0, el = 0;
      for (std::size_t m = 2; m <= k; ++m) {
        eh += static_cast<double>(tie_hi[i][m]) / static_cast<double>(m);
        el += static_cast<double>(tie_lo[i][m]) / static_cast<double>(m);
      }
      CHECK(t.largest[i] == static_cast<double>(alone_hi[i]) / n);
      CHECK(t.smallest[i] == static_cast<double>(alone_lo[i]) / n);
      CHECK(t.equal_largest[i] == eh / n);
      CHECK(t.equal_smallest[i] == el / n);
      sum_hi += t.largest[i] + t.equal_largest[i];
      sum_lo += t.smallest[i] + t.equal_smallest[i];
    }
    CHECK(std::abs(sum_hi - 1) < 1e-12);
    CHECK(std::abs(sum_lo - 1) < 1e-12);
  }
}

TEST_CASE("compare_means matches counting on shuffled draws") {
  Rng rng(5);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t k = 2 + rng.bounded(3);
    std::vector<Fit> fits;
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> mu(5 + rng.bounded(40));
      for (auto& v : mu) v = static_cast<double>(rng.bounded(7));
      fits.push_back(ttest_fit(mu));
    }
    std::vector<const Fit*> ptr;
    for (const auto& f : fits) ptr.push_back(&f);
    const std::uint64_t seed = rng.next();
    const double rope = static_cast<double>(rng.bounded(3));
    const auto res = compare_means(ptr, rope, seed);
    REQUIRE(res.size() == 1);
    CHECK(res[0].pairs.size() == k * (k - 1) / 2);
    CHECK(res[0].roles.has_value() == (k > 2));

    std::vector<std::vector<double>> sh;
    std::size_t n = SIZE_MAX;
    for (std::size_t i = 0; i < k; ++i) {
      sh.push_back(oracle_shuffle(fits[i].draws.pooled("mu"), mix_seed(seed, 0), i));
      n = std::min(n, sh.back().size());
    }
    for (const auto& pr : res[0].pairs) {
      std::vector<double> a(sh[pr.a].begin(), sh[pr.a].begin() + n), b(sh[pr.b].begin(), sh[pr.b].begin() + n);
      const auto c = count_oracle(a, b, rope);
      CHECK(pr.result.n == n);
      CHECK(pr.result.p_smaller == static_cast<double>(c.lt) / n);
      CHECK(pr.result.p_greater == static_cast<double>(c.gt) / n);
      CHECK(pr.result.p_smaller + pr.result.p_greater + pr.result.p_equal == 1.0);
    }
  }
}

TEST_CASE("compare errors and formatting") {
  const auto a = ttest_fit({1, 2, 3, 4}), b = ttest_fit({2, 3, 4, 5});
  std::map<std::string, std::vector<double>> sr{{"p", {0.5, 0.5}}, {"tau", {3, 3}}, {"p[1]", {0.5, 0.5}}};
  const auto s = fake_fit(ModelKind::success_rate, sr, 1);
  expect_error(ErrorKind::comparison, [&] { compare_means({&a, &s}, std::nullopt, 1); });
  expect_error(ErrorKind::comparison, [&] { compare_means({&a}, std::nullopt, 1); });

  const auto text = format_comparison(compare_means({&a, &b}, 0.5, 1), ModelKind::ttest);
  CHECK(text.find("Probabilities:\n  - Group 1 < Group 2: ") != std::string::npos);
  CHECK(text.find("  - Group 1 > Group 2: ") != std::string::npos);
  CHECK(text.find("  - Equal: ") != std::string::npos);
  CHECK(text.find("95% HDI:\n  - Group 1 - Group 2: [") != std::string::npos);

  const auto c = ttest_fit({0, 1, 2, 3}), d = ttest_fit({5, 6, 7, 8});
  const auto many = compare_means({&a, &b, &c, &d}, 0.1, 2);
  CHECK(many[0].pairs.size() == 6);
  const auto four = format_comparison(many, ModelKind::ttest);
  CHECK(four.find("smallest/largest or equal to all others") != std::string::npos);
  CHECK(four.find("largest smallest  equal") != std::string::npos);
  CHECK(four.find("Group 4") != std::string::npos);
}

TEST_CASE("predictive comparisons") {
  Rng rng(6);
  std::vector<double> y(300);
  for (auto& v : y) v = rng.normal() * 2 + 5;
  SamplerConfig cfg;
  cfg.seed = 1;
  cfg.iter = 1500;
  cfg.warmup = 500;
  const auto fit = fit_ttest(y, {}, cfg);
  const auto r = compare_distributions({&fit, &fit}, std::nullopt, 7);
  CHECK(r[0].pairs[0].result.p_smaller >= 0.45);
  CHECK(r[0].pairs[0].result.p_smaller <= 0.55);

  std::map<std::string, std::vector<double>> sr;
  std::vector<double> p(2000), tau(2000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = 0.2 + 0.6 * rng.uniform();
    tau[i] = 1 + 30 * rng.uniform();
  }
  sr["p"] = p;
  sr["tau"] = tau;
  sr["p[1]"] = p;
  const auto srf = fake_fit(ModelKind::success_rate, sr, 1);
  const auto pred = predictive_draws(srf, 3);
  double hits = 0;
  for (double v : pred[0].draws) {
    CHECK((v == 0.0 || v == 1.0));
    hits += v;
  }
  CHECK(std::abs(hits / 2000 - mean_of(p)) < 4 * 0.5 / std::sqrt(2000.0));

  // new-subject EMG predictive mean against the mean of the derived rt draws
  const std::size_t n = 20000;
  std::map<std::string, std::vector<double>> rt;
  for (const char* nm : {"mu_m", "sigma_m", "mu_s", "sigma_s", "mu_l", "sigma_l", "rt", "mu[1]", "sigma[1]",
                         "lambda[1]", "rt_subjects[1]"})
    rt[nm].resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rt["mu_m"][i] = 0.5 + 0.01 * rng.normal();
    rt["sigma_m"][i] = 0.05;
    rt["mu_s"][i] = 0.05;
    rt["sigma_s"][i] = 0.01;
    rt["mu_l"][i] = 8 + rng.uniform();
    rt["sigma_l"][i] = 0.5;
    rt["rt"][i] = rt["mu_m"][i] + 1 / rt["mu_l"][i];
  }
  const auto rtf = fake_fit(ModelKind::reaction_time, rt, 1);
  const auto rp = predictive_draws(rtf, 4);
  // E[1/lambda] for lambda ~ N+(mu_l, 0.5) differs from 1/mu_l by about var/mu^3
  const double jensen = 0.25 / std::pow(8.5, 3);
  CHECK(std::abs(mean_of(rp[0].draws) - mean_of(rt["rt"]) - jensen) < 4 * sd_of(rp[0].draws) / std::sqrt(n));

  std::map<std::string, std::vector<double>> lin;
  for (const char* nm : {"alpha[1]", "beta[1]", "sigma[1]", "mu_a", "sigma_a", "mu_b", "sigma_b", "mu_s", "sigma_s"})
    lin[nm] = {1, 1};
  const auto lf = fake_fit(ModelKind::linear, lin, 1);
  expect_error(ErrorKind::argument, [&] { compare_distributions({&lf, &lf}, std::nullopt, 1); });
  CHECK_NOTHROW(compare_distributions({&lf, &lf}, std::nullopt, 1, 2.0));
}

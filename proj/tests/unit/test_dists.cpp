#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "psybayes/dists.hpp"
#include "psybayes/error.hpp"
#include "support.hpp"

using namespace psybayes;
using namespace psybayes::dists;
using psytest::expect_error;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

// Density of the normal(mu, sigma) + exponential(lambda) sum by direct
// convolution, independent of the closed form.
double emg_convolution(double x, double mu, double sigma, double lambda) {
  boost::math::normal_distribution<double> n(mu, sigma);
  auto f = [&](double y) { return lambda * std::exp(-lambda * y) * boost::math::pdf(n, x - y); };
  return integrate(f, 0.0, kInf);
}

DistParams random_params(Family f, Rng& rng) {
  auto u = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
  switch (f) {
    case Family::normal: return {f, {u(-5, 5), u(0.2, 4)}};
    case Family::uniform: {
      const double lo = u(-5, 5);
      return {f, {lo, lo + u(0.5, 5)}};
    }
    case Family::gamma: return {f, {u(1.2, 8), u(0.3, 4)}};
    case Family::beta: return {f, {u(1.2, 8), u(1.2, 8)}};
    case Family::scaled_t: return {f, {u(1, 30), u(-5, 5), u(0.2, 4)}};
    case Family::emg: return {f, {u(-1, 1), u(0.05, 1), u(0.5, 20)}};
    case Family::truncated_normal: {
      const double lo = u(-3, 1);
      return {f, {u(-2, 2), u(0.3, 3), lo, lo + u(0.5, 5)}};
    }
    case Family::von_mises: return {f, {u(0, kTwoPi), u(0, 30)}};
    default: return {f, {}};
  }
}

std::pair<double, double> support(const DistParams& d) {
  switch (d.family) {
    case Family::uniform: return {d.params[0], d.params[1]};
    case Family::gamma: return {0.0, kInf};
    case Family::beta: return {0.0, 1.0};
    case Family::truncated_normal: return {d.params[2], d.params[3]};
    case Family::von_mises: return {0.0, kTwoPi};
    default: return {-kInf, kInf};
  }
}

const Family kContinuous[] = {Family::normal, Family::uniform,          Family::gamma,    Family::beta,
                              Family::scaled_t, Family::emg, Family::truncated_normal, Family::von_mises};

}  // namespace

TEST_CASE("standard families at known points") {
  CHECK(logpdf_standard({Family::normal, {0, 1}}, 0.0) == doctest::Approx(-0.5 * kLogTwoPi).epsilon(1e-15));
  CHECK(logpdf_standard({Family::beta, {1, 1}}, 0.3) == 0.0);

  boost::math::gamma_distribution<double> g(2.0, 1.0 / 3.0);
  CHECK(logpdf_standard({Family::gamma, {2, 3}}, 0.5) == doctest::Approx(std::log(boost::math::pdf(g, 0.5))).epsilon(1e-13));
  const double direct = std::log(9.0 * 0.5 * std::exp(-1.5));  // rate^2 x e^{-rate x} / Gamma(2)
  CHECK(logpdf_standard({Family::gamma, {2, 3}}, 0.5) == doctest::Approx(direct).epsilon(1e-13));
  CHECK(integrate([](double x) { return std::exp(gamma_logpdf(x, 2, 3)); }, 0, kInf) == doctest::Approx(1).epsilon(1e-10));

  CHECK(logpdf_standard({Family::uniform, {0, 2}}, 3.0) == -kInf);
  CHECK(logpdf_standard({Family::beta, {2, 2}}, 1.5) == -kInf);
  CHECK(bernoulli_logpmf(1, 1.0) == 0.0);
  CHECK(bernoulli_logpmf(0, 1.0) == -kInf);
  CHECK(bernoulli_logpmf(0, 0.0) == 0.0);
  CHECK(bernoulli_logpmf(1, 0.0) == -kInf);
}

TEST_CASE("validation errors") {
  expect_error(ErrorKind::parameter, [] { logpdf_standard({Family::normal, {0, -1}}, 0); });
  expect_error(ErrorKind::parameter, [] { logpdf_standard({Family::normal, {0}}, 0); });
  expect_error(ErrorKind::parameter, [] { logpdf_standard({Family::uniform, {2, 1}}, 0); });
  expect_error(ErrorKind::parameter, [] { logpdf_standard({Family::bernoulli, {1.5}}, 0); });
  expect_error(ErrorKind::parameter, [] { logpdf({Family::emg, {0, 0, 1}}, 0); });
  expect_error(ErrorKind::parameter, [] { logpdf({Family::emg, {0, 1, 0}}, 0); });
  expect_error(ErrorKind::parameter, [] { logpdf({Family::truncated_normal, {0, 1, 2, 2}}, 0); });
  expect_error(ErrorKind::parameter, [] { logpdf({Family::von_mises, {0, -1}}, 0); });
  expect_error(ErrorKind::parameter, [] { logpdf({Family::scaled_t, {0, 0, 1}}, 0); });
  expect_error(ErrorKind::input, [] { logpdf_standard({Family::normal, {0, 1}}, std::nan("")); });
  expect_error(ErrorKind::boundary, [] { grad_logpdf({Family::beta, {2, 2}}, 0.0); });
  expect_error(ErrorKind::boundary, [] { grad_logpdf({Family::gamma, {2, 2}}, 0.0); });
}

TEST_CASE("log Phi in the far tail") {
  CHECK(log_ndtr(-10) == doctest::Approx(-53.231285150512470578).epsilon(1e-14));
  CHECK(log_ndtr(-25) == doctest::Approx(-316.63940800802025894).epsilon(1e-14));
  CHECK(log_ndtr(-40) == doctest::Approx(-804.60844201375378817).epsilon(1e-14));
  for (double z = -37; z <= 8; z += 0.37) {
    const double oracle = std::log(0.5 * boost::math::erfc(-z / std::sqrt(2.0)));
    CHECK(log_ndtr(z) == doctest::Approx(oracle).epsilon(1e-12));
  }
  CHECK(std::isfinite(log_ndtr(-1e5)));
}

TEST_CASE("ex-Gaussian density") {
  const double oracle = emg_convolution(0, 0, 1, 1);
  CHECK(oracle == doctest::Approx(0.2616).epsilon(1e-3));
  CHECK(emg_logpdf(0, 0, 1, 1) == doctest::Approx(std::log(oracle)).epsilon(1e-10));
  CHECK(emg_logpdf(0, 0, 1, 1) == doctest::Approx(-1.341).epsilon(1e-3));

  Rng rng(3);
  for (int k = 0; k < 30; ++k) {
    const auto d = random_params(Family::emg, rng);
    const double x = d.params[0] + (rng.uniform() * 4 - 1) * d.params[1] + rng.uniform() / d.params[2];
    CHECK(emg_logpdf(x, d.params[0], d.params[1], d.params[2]) ==
          doctest::Approx(std::log(emg_convolution(x, d.params[0], d.params[1], d.params[2]))).epsilon(1e-8));
  }

  // Large lambda * sigma approaches the normal and must not overflow.
  for (double x : {-1.0, 0.0, 1.0}) CHECK(std::abs(emg_logpdf(x, 0, 1, 1e4) - normal_logpdf(x, 0, 1)) < 1e-3);
  CHECK(std::isfinite(emg_logpdf(0.4, 0.5, 0.05, 1e6)));
  CHECK(std::isfinite(emg_logpdf(-50, 0, 1, 50)));

  Rng r(11);
  const double mu = 0.4, sigma = 0.06, lambda = 7.0;
  const int n = 1000000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_emg(mu, sigma, lambda, r);
  const double sd = std::sqrt(sigma * sigma + 1.0 / (lambda * lambda));
  CHECK(std::abs(s / n - (mu + 1.0 / lambda)) < 4 * sd / std::sqrt(n));
}

TEST_CASE("scaled t") {
  CHECK(scaled_t_logpdf(0, 1, 0, 1) == doctest::Approx(-std::log(M_PI)).epsilon(1e-14));
  const double mode = scaled_t_logpdf(2.5, 4, 2.5, 0.7);
  for (int k = -100; k <= 100; ++k) {
    if (k != 0) CHECK(scaled_t_logpdf(2.5 + 0.01 * k, 4, 2.5, 0.7) < mode);
  }
  for (double x = -3; x <= 3; x += 0.25) CHECK(std::abs(scaled_t_logpdf(1 + 2 * x, 1e6, 1, 2) - normal_logpdf(1 + 2 * x, 1, 2)) < 1e-4);
  boost::math::students_t_distribution<double> t(3.5);
  CHECK(scaled_t_logpdf(1.7, 3.5, 0.5, 2) ==
        doctest::Approx(std::log(boost::math::pdf(t, (1.7 - 0.5) / 2) / 2)).epsilon(1e-13));
}

TEST_CASE("truncated normal") {
  for (double x : {-3.0, 0.0, 0.7, 12.0}) CHECK(truncnorm_logpdf(x, 0.3, 1.4, -kInf, kInf) == normal_logpdf(x, 0.3, 1.4));
  CHECK(std::exp(truncnorm_logpdf(0.5, 0, 1, 0, kInf)) == doctest::Approx(0.70413).epsilon(1e-5));
  const double z = integrate([](double x) { return std::exp(normal_logpdf(x, 128, 40)); }, 0, 255);
  CHECK(std::abs(truncnorm_logpdf(128, 128, 40, 0, 255) - (normal_logpdf(128, 128, 40) - std::log(z))) < 1e-10);
  CHECK(truncnorm_logpdf(-0.1, 0, 1, 0, 1) == -kInf);
  CHECK(std::isfinite(truncnorm_logpdf(250, 0, 1, 240, kInf)));
}

TEST_CASE("von Mises") {
  for (double t : {0.0, 1.0, 4.0}) CHECK(vonmises_logpdf(t, 2.0, 0.0) == doctest::Approx(-kLogTwoPi).epsilon(1e-15));
  CHECK(vonmises_logpdf(0.7 + kTwoPi, 0.7, 3.0) == vonmises_logpdf(0.7, 0.7, 3.0));
  const double oracle = std::exp(1.0) / (kTwoPi * boost::math::cyl_bessel_i(0, 1.0));
  CHECK(oracle == doctest::Approx(0.3417).epsilon(1e-3));
  CHECK(std::exp(vonmises_logpdf(1.2, 1.2, 1.0)) == doctest::Approx(oracle).epsilon(1e-13));
  for (double k : {0.01, 1.0, 10.0, 49.9, 50.1, 100.0, 600.0}) {
    CHECK(log_i0(k) == doctest::Approx(std::log(boost::math::cyl_bessel_i(0, k))).epsilon(1e-12));
    CHECK(bessel_i1_i0_ratio(k) ==
          doctest::Approx(boost::math::cyl_bessel_i(1, k) / boost::math::cyl_bessel_i(0, k)).epsilon(1e-11));
  }
  CHECK(std::isfinite(vonmises_logpdf(0, 0, 1e6)));
}

TEST_CASE("every continuous family integrates to one") {
  Rng rng(17);
  for (Family f : kContinuous) {
    for (int k = 0; k < 20; ++k) {
      const auto d = random_params(f, rng);
      auto [lo, hi] = support(d);
      auto dens = [&](double x) { return std::exp(logpdf(d, x)); };
      double total = 0.0;
      if (std::isinf(lo) && std::isinf(hi)) {
        // split at the bulk so the infinite tails are handled separately
        const double c = f == Family::emg ? d.params[0] + 1.0 / d.params[2] : d.params[1 - (f == Family::normal)];
        total = integrate(dens, -kInf, c) + integrate(dens, c, kInf);
      } else if (std::isinf(hi)) {
        total = integrate(dens, lo, 1.0) + integrate(dens, 1.0, kInf);
      } else {
        total = integrate(dens, lo, hi);
      }
      INFO(family_name(f), " params ", d.params[0], " ", d.params[1]);
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("parameter gradients match central differences") {
  CHECK(grad_logpdf({Family::normal, {0, 1}}, 1.0)[0] == doctest::Approx(1.0));
  Rng rng(5);
  const double h = 1e-6;
  const Family families[] = {Family::normal, Family::gamma,    Family::beta,
                             Family::scaled_t, Family::emg, Family::truncated_normal,
                             Family::von_mises, Family::bernoulli};
  for (Family f : families) {
    for (int k = 0; k < 100; ++k) {
      DistParams d = f == Family::bernoulli ? DistParams{f, {0.05 + 0.9 * rng.uniform()}} : random_params(f, rng);
      double x = 0.0;
      if (f == Family::bernoulli) {
        x = rng.uniform() < 0.5 ? 0.0 : 1.0;
      } else {
        x = sample(d, rng);
      }
      if (f == Family::truncated_normal) {
        // keep away from the truncation points
        x = std::clamp(x, d.params[2] + 1e-3, d.params[3] - 1e-3);
      }
      const auto g = grad_logpdf(d, x);
      const std::size_t n = f == Family::truncated_normal ? 2 : g.size();  // bounds are not model parameters
      for (std::size_t i = 0; i < n; ++i) {
        DistParams up = d, down = d;
        up.params[i] += h;
        down.params[i] -= h;
        const double fd = (logpdf(up, x) - logpdf(down, x)) / (2 * h);
        INFO(family_name(f), " param ", i, " at x=", x);
        CHECK(std::abs(g[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
      if (f != Family::bernoulli) {
        const double fd = (logpdf(d, x + h) - logpdf(d, x - h)) / (2 * h);
        CHECK(std::abs(dlogpdf_dx(d, x) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
  // emg lambda derivative at the reference point
  const double fd = (emg_logpdf(0, 0, 1, 1 + h) - emg_logpdf(0, 0, 1, 1 - h)) / (2 * h);
  CHECK(grad_logpdf({Family::emg, {0, 1, 1}}, 0.0)[2] == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("samplers agree with their densities") {
  Rng rng(23);
  const int n = 100000;
  const DistParams cases[] = {
      {Family::normal, {1, 2}},          {Family::uniform, {-1, 3}},
      {Family::gamma, {2.5, 1.5}},       {Family::beta, {3, 2}},
      {Family::scaled_t, {3, 1, 0.5}},   {Family::emg, {0.5, 0.05, 10}},
      {Family::emg, {0, 1, 0.3}},        {Family::truncated_normal, {128, 40, 0, 255}},
      {Family::truncated_normal, {0, 1, 3, kInf}},  {Family::truncated_normal, {-5, 1, 0, 1}},
      {Family::von_mises, {1, 5}},       {Family::von_mises, {6, 0.2}},
  };
  for (const auto& d : cases) {
    std::vector<double> x(n);
    for (auto& v : x) v = sample(d, rng);
    std::sort(x.begin(), x.end());
    auto [lo, hi] = support(d);
    if (std::isinf(lo)) lo = x.front() - 1.0;
    if (std::isinf(hi)) hi = x.back() + 1.0;
    lo = std::max(lo, std::min(x.front(), hi) - 1.0);
    // numerically integrated CDF on a fine grid, compared with the ECDF
    const int grid = 2000;
    double cdf = d.family == Family::normal || d.family == Family::scaled_t || d.family == Family::emg
                     ? integrate([&](double t) { return std::exp(logpdf(d, t)); }, -kInf, lo)
                     : 0.0;
    double ks = 0.0;
    double prev = lo;
    for (int i = 1; i <= grid; ++i) {
      const double g = lo + (hi - lo) * i / grid;
      cdf += boost::math::quadrature::gauss<double, 15>::integrate([&](double t) { return std::exp(logpdf(d, t)); },
                                                                    prev, g);
      prev = g;
      const double ecdf = static_cast<double>(std::upper_bound(x.begin(), x.end(), g) - x.begin()) / n;
      ks = std::max(ks, std::abs(ecdf - cdf));
    }
    INFO(family_name(d.family), " ", d.params[0], " ", d.params[1]);
    CHECK(ks < 0.01);
  }
}

TEST_CASE("sampler examples") {
  Rng rng(9);
  for (int k = 0; k < 1000; ++k) {
    const auto w = sample_dirichlet_uniform(3, rng);
    double s = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  const int n = 100000;
  double m = 0.0;
  for (int i = 0; i < n; ++i) m += sample_normal(0, 1, rng);
  CHECK(std::abs(m / n) < 4.0 / std::sqrt(n));
  double s = 0.0, c = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = sample_vonmises(1, 5, rng);
    CHECK(t >= 0.0);
    CHECK(t < kTwoPi);
    s += std::sin(t);
    c += std::cos(t);
  }
  CHECK(std::abs(std::atan2(s, c) - 1.0) < 0.05);
}

TEST_CASE("variates are reproducible from the seed") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(sample_emg(0.5, 0.1, 5, a) == sample_emg(0.5, 0.1, 5, b));
    CHECK(sample_vonmises(2, 3, a) == sample_vonmises(2, 3, b));
    CHECK(sample_beta(2, 0.5, a) == sample_beta(2, 0.5, b));
  }
  CHECK(Rng::substream(1, 2).next() == Rng::substream(1, 2).next());
  CHECK(Rng::substream(1, 2).next() != Rng::substream(1, 3).next());
}

TEST_CASE("wrap_angle") {
  CHECK(wrap_angle(-0.5) == doctest::Approx(kTwoPi - 0.5));
  CHECK(wrap_angle(kTwoPi) == 0.0);
  CHECK(wrap_angle(-1e-20) < kTwoPi);
  CHECK(wrap_angle(3.0) == 3.0);
}

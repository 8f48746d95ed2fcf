#include <doctest.h>

#include <cmath>
#include <limits>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "psybayes/models.hpp"
#include "psybayes/prior.hpp"
#include "support.hpp"

using namespace psybayes;
using psytest::expect_error;

TEST_CASE("make_prior") {
  const auto b = make_prior("beta", {1, 1});
  CHECK(b.family == PriorFamily::beta);
  CHECK(prior_log_contrib(b, 0.3).logpdf == 0.0);
  CHECK(make_prior("normal", {60, 30}).params == std::vector<double>{60, 30});
  CHECK(make_prior("flat", {}).is_flat());

  expect_error(ErrorKind::spec, [] { make_prior("uniform", {5, 0}); });
  expect_error(ErrorKind::spec, [] { make_prior("cauchy", {0, 1}); });
  expect_error(ErrorKind::spec, [] { make_prior("flat", {1}); });
  expect_error(ErrorKind::spec, [] { make_prior("normal", {1}); });
  expect_error(ErrorKind::parameter, [] { make_prior("normal", {0, -1}); });
  expect_error(ErrorKind::parameter, [] { make_prior("gamma", {0, 1}); });
  expect_error(ErrorKind::parameter, [] { make_prior("beta", {1, 0}); });
}

TEST_CASE("prior_log_contrib examples") {
  for (double v : {-1e6, 0.0, 3.5, 1e9}) {
    const auto c = prior_log_contrib(PriorSpec{}, v);
    CHECK(c.logpdf == 0.0);
    CHECK(c.dlogpdf == 0.0);
  }
  const auto u = prior_log_contrib(make_prior("uniform", {0, 120}), 60);
  CHECK(u.logpdf == doctest::Approx(-std::log(120.0)).epsilon(1e-15));
  CHECK(u.dlogpdf == 0.0);
  CHECK(prior_log_contrib(make_prior("uniform", {0, 120}), 121).logpdf == -std::numeric_limits<double>::infinity());

  const auto n = prior_log_contrib(make_prior("normal", {60, 30}), 90);
  boost::math::normal_distribution<double> oracle(60, 30);
  CHECK(n.logpdf == doctest::Approx(std::log(boost::math::pdf(oracle, 90.0))).epsilon(1e-14));
  CHECK(n.dlogpdf == doctest::Approx(-30.0 / 900.0).epsilon(1e-14));

  boost::math::gamma_distribution<double> g(2.0, 1.0 / 0.5);  // shape 2, rate 0.5
  CHECK(prior_log_contrib(make_prior("gamma", {2, 0.5}), 3.0).logpdf ==
        doctest::Approx(std::log(boost::math::pdf(g, 3.0))).epsilon(1e-13));
  boost::math::beta_distribution<double> be(2, 5);
  CHECK(prior_log_contrib(make_prior("beta", {2, 5}), 0.2).logpdf ==
        doctest::Approx(std::log(boost::math::pdf(be, 0.2))).epsilon(1e-13));
}

TEST_CASE("prior derivative matches finite differences") {
  Rng rng(4);
  const double h = 1e-6;
  for (int k = 0; k < 200; ++k) {
    PriorSpec spec;
    double v = 0.0;
    switch (k % 3) {
      case 0:
        spec = make_prior("normal", {rng.uniform() * 100 - 50, 0.5 + rng.uniform() * 40});
        v = rng.uniform() * 200 - 100;
        break;
      case 1:
        spec = make_prior("gamma", {0.5 + rng.uniform() * 5, 0.1 + rng.uniform() * 3});
        v = 0.05 + rng.uniform() * 10;
        break;
      default:
        spec = make_prior("beta", {0.5 + rng.uniform() * 5, 0.5 + rng.uniform() * 5});
        v = 0.01 + 0.98 * rng.uniform();
    }
    const double fd =
        (prior_log_contrib(spec, v + h).logpdf - prior_log_contrib(spec, v - h).logpdf) / (2 * h);
    const double an = prior_log_contrib(spec, v).dlogpdf;
    INFO(format_prior(spec), " at ", v);
    CHECK(std::abs(an - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("prior text round trip") {
  const auto spec = parse_prior("normal(60, 30)");
  CHECK(spec.family == PriorFamily::normal);
  CHECK(format_prior(spec) == "normal(60,30)");
  CHECK(parse_prior("flat").is_flat());
  const auto [name, p] = parse_prior_assignment("mu:normal(60,30)");
  CHECK(name == "mu");
  CHECK(p.params[1] == 30);

  const auto map = parse_prior_map("mu:normal(60,30);sigma:gamma(2,1)");
  CHECK(map.entries().size() == 2);
  CHECK(format_prior_map(map) == "mu:normal(60,30);sigma:gamma(2,1)");
  CHECK(map.get("nu").is_flat());
  CHECK(format_prior_map(PriorMap{}).empty());
  CHECK(parse_prior_map("").empty());

  expect_error(ErrorKind::spec, [] { parse_prior("normal 60 30"); });
  expect_error(ErrorKind::spec, [] { parse_prior("normal(60,abc)"); });
  expect_error(ErrorKind::spec, [] { parse_prior_assignment("normal(60,30)"); });
  expect_error(ErrorKind::spec, [] { parse_prior_map("mu:normal(1,2);mu:normal(3,4)"); });
}

TEST_CASE("prior names are checked against the model") {
  PriorMap m;
  m.set("p", make_prior("beta", {1, 1}));
  CHECK_NOTHROW(m.check_names(prior_parameter_names(ModelKind::success_rate)));
  expect_error(ErrorKind::spec, [&] { m.check_names(prior_parameter_names(ModelKind::ttest)); });
  expect_error(ErrorKind::spec, [] {
    PriorMap q;
    q.set("lambda", make_prior("normal", {0, 1}));
    success_rate_target({1, 0, 1}, {1, 1, 1}, q);
  });
  // beta only on [0, 1] parameters
  expect_error(ErrorKind::spec, [] {
    PriorMap q;
    q.set("mu", make_prior("beta", {1, 1}));
    ttest_target({1, 2, 3}, q);
  });
}

TEST_CASE("uniform priors bound the sampled support") {
  PriorMap q;
  q.set("mu", make_prior("uniform", {0, 10}));
  const auto reg = model_registry(ModelKind::ttest, 0, q);
  bool found = false;
  for (const auto& p : reg) {
    if (p.name == "mu") {
      found = true;
      CHECK(p.constraint == Constraint::interval(0, 10));
    }
  }
  CHECK(found);
}

TEST_CASE("explicit flat priors leave the posterior unchanged") {
  Rng rng(8);
  std::vector<double> y, t, x, yl, r;
  std::vector<int> s;
  for (int i = 0; i < 40; ++i) {
    y.push_back(rng.normal());
    s.push_back(1 + i % 4);
    t.push_back(0.5 + rng.exponential() * 0.2 + 0.05 * rng.normal());
    x.push_back(rng.uniform() * 10);
    yl.push_back(2 - 0.3 * x.back() + rng.normal());
    r.push_back(rng.uniform() < 0.6 ? 1 : 0);
  }
  auto all_flat = [](ModelKind k) {
    PriorMap m;
    for (const auto& n : prior_parameter_names(k)) m.set(n, PriorSpec{});
    return m;
  };
  const std::pair<TargetDensity, TargetDensity> pairs[] = {
      {ttest_target(y, {}), ttest_target(y, all_flat(ModelKind::ttest))},
      {reaction_time_target(t, s, {}), reaction_time_target(t, s, all_flat(ModelKind::reaction_time))},
      {success_rate_target(r, s, {}), success_rate_target(r, s, all_flat(ModelKind::success_rate))},
      {linear_target(x, yl, s, {}), linear_target(x, yl, s, all_flat(ModelKind::linear))},
  };
  for (const auto& [a, b] : pairs) {
    REQUIRE(a.dim == b.dim);
    for (int k = 0; k < 20; ++k) {
      std::vector<double> u(a.dim), ga(a.dim), gb(a.dim);
      for (auto& v : u) v = rng.uniform() * 4 - 2;
      CHECK(a.log_density(u, ga) == b.log_density(u, gb));
      CHECK(ga == gb);
    }
  }
}

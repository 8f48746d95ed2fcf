#include "psybayes/dists.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/digamma.hpp>

#include "psybayes/error.hpp"

namespace psybayes::dists {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSqrt2 = 1.41421356237309504880;

// Asymptotic series of Phi(z) * (-z) / phi(z) for z << 0.
double ndtr_tail_series(double z) {
  const double u = 1.0 / (z * z);
  return 1.0 - u * (1.0 - 3.0 * u * (1.0 - 5.0 * u * (1.0 - 7.0 * u * (1.0 - 9.0 * u * (1.0 - 11.0 * u)))));
}

constexpr double kTailSwitch = -20.0;

// log Phi(z) + z^2 / 2 for z <= 0, free of the z^2 cancellation in the tail.
double log_ndtr_scaled(double z) {
  if (z < kTailSwitch) return -std::log(-z) - 0.5 * kLogTwoPi + std::log(ndtr_tail_series(z));
  return log_ndtr(z) + 0.5 * z * z;
}

// a * phi(a) / Z with the convention 0 at infinite a.
double scaled_density_ratio(double a, double log_z) {
  if (!std::isfinite(a)) return 0.0;
  return std::exp(-0.5 * a * a - 0.5 * kLogTwoPi - log_z);
}

Partials outside() {
  Partials p;
  p.value = -kInf;
  return p;
}

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::parameter, message);
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::normal: return "normal";
    case Family::uniform: return "uniform";
    case Family::gamma: return "gamma";
    case Family::beta: return "beta";
    case Family::bernoulli: return "bernoulli";
    case Family::scaled_t: return "scaled_t";
    case Family::emg: return "emg";
    case Family::truncated_normal: return "truncated_normal";
    case Family::von_mises: return "von_mises";
    case Family::dirichlet_uniform: return "dirichlet_uniform";
  }
  return "unknown";
}

std::size_t arity(Family family) {
  switch (family) {
    case Family::normal:
    case Family::uniform:
    case Family::gamma:
    case Family::beta:
    case Family::von_mises: return 2;
    case Family::bernoulli:
    case Family::dirichlet_uniform: return 1;
    case Family::scaled_t:
    case Family::emg: return 3;
    case Family::truncated_normal: return 4;
  }
  return 0;
}

void validate(const DistParams& dist) {
  const auto& p = dist.params;
  const std::string name(family_name(dist.family));
  require(p.size() == arity(dist.family),
          name + " expects " + std::to_string(arity(dist.family)) + " parameters, got " +
              std::to_string(p.size()));
  for (double v : p) {
    if (dist.family == Family::truncated_normal) {
      require(!std::isnan(v), name + " parameters must not be NaN");
    } else {
      require(std::isfinite(v), name + " parameters must be finite");
    }
  }
  switch (dist.family) {
    case Family::normal: require(p[1] > 0, "normal: sigma must be positive"); break;
    case Family::uniform: require(p[0] < p[1], "uniform: lower bound must be below upper bound"); break;
    case Family::gamma: require(p[0] > 0 && p[1] > 0, "gamma: shape and rate must be positive"); break;
    case Family::beta: require(p[0] > 0 && p[1] > 0, "beta: both shape parameters must be positive"); break;
    case Family::bernoulli: require(p[0] >= 0 && p[0] <= 1, "bernoulli: p must lie in [0, 1]"); break;
    case Family::scaled_t: require(p[0] > 0 && p[2] > 0, "scaled_t: nu and sigma must be positive"); break;
    case Family::emg: require(p[1] > 0 && p[2] > 0, "emg: sigma and lambda must be positive"); break;
    case Family::truncated_normal:
      require(std::isfinite(p[0]) && std::isfinite(p[1]) && p[1] > 0,
              "truncated_normal: mu must be finite and sigma positive");
      require(p[2] < p[3], "truncated_normal: lower bound must be below upper bound");
      break;
    case Family::von_mises: require(p[1] >= 0, "von_mises: kappa must be non-negative"); break;
    case Family::dirichlet_uniform:
      require(p[0] >= 1 && p[0] == std::floor(p[0]), "dirichlet_uniform: dimension must be a positive integer");
      break;
  }
}

// Special functions ---------------------------------------------------------

double log_ndtr(double z) {
  if (std::isnan(z)) return kNaN;
  if (z > 5.0) return std::log1p(-0.5 * std::erfc(z / kSqrt2));
  if (z > kTailSwitch) return std::log(0.5 * std::erfc(-z / kSqrt2));
  if (z == -kInf) return -kInf;
  return -0.5 * z * z - std::log(-z) - 0.5 * kLogTwoPi + std::log(ndtr_tail_series(z));
}

double inv_mills(double z) {
  if (z < kTailSwitch) return -z / ndtr_tail_series(z);
  return std::exp(-0.5 * z * z - 0.5 * kLogTwoPi - log_ndtr(z));
}

double log_diff_ndtr(double a, double b) {
  if (!(a < b)) return -kInf;
  if (b == kInf) return log_ndtr(-a);
  if (a == -kInf) return log_ndtr(b);
  if (a > 0.0) {
    const double la = log_ndtr(-a);
    const double lb = log_ndtr(-b);
    return la + std::log(-std::expm1(lb - la));
  }
  const double lb = log_ndtr(b);
  const double la = log_ndtr(a);
  return lb + std::log(-std::expm1(la - lb));
}

namespace {

constexpr double kBesselSwitch = 50.0;

// Sums of the I0 and I1 power series (unscaled).
void bessel_series(double kappa, double& i0, double& i1) {
  const double q = 0.25 * kappa * kappa;
  double t0 = 1.0, t1 = 0.5 * kappa;
  i0 = t0;
  i1 = t1;
  for (int k = 1; k < 1000; ++k) {
    t0 *= q / (static_cast<double>(k) * k);
    t1 *= q / (static_cast<double>(k) * (k + 1));
    i0 += t0;
    i1 += t1;
    if (t0 < 1e-17 * i0 && t1 < 1e-17 * i1) break;
  }
}

// Asymptotic sums: I_nu(z) ~ e^z / sqrt(2 pi z) * sum.
double bessel_asymptotic_sum(double nu, double z) {
  double term = 1.0, sum = 1.0;
  const double four_nu2 = 4.0 * nu * nu;
  for (int k = 1; k < 40; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(four_nu2 - odd * odd) / (k * 8.0 * z);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

}  // namespace

double log_i0(double kappa) {
  if (std::isnan(kappa) || kappa < 0) return kNaN;
  if (kappa <= kBesselSwitch) {
    double i0, i1;
    bessel_series(kappa, i0, i1);
    return std::log(i0);
  }
  return kappa - 0.5 * std::log(kTwoPi * kappa) + std::log(bessel_asymptotic_sum(0.0, kappa));
}

double bessel_i1_i0_ratio(double kappa) {
  if (std::isnan(kappa) || kappa < 0) return kNaN;
  if (kappa <= kBesselSwitch) {
    double i0, i1;
    bessel_series(kappa, i0, i1);
    return i1 / i0;
  }
  return bessel_asymptotic_sum(1.0, kappa) / bessel_asymptotic_sum(0.0, kappa);
}

double lgamma_pos(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double digamma(double x) {
  // boost throws near the pole
  if (x < 1e-8) return -1.0 / x - 0.57721566490153286061;
  return boost::math::digamma(x);
}

// Kernels --------------------------------------------------------------------

Partials normal_partials(double x, double mu, double sigma) {
  Partials out;
  const double inv = 1.0 / sigma;
  const double r = (x - mu) * inv;
  out.value = -0.5 * r * r - std::log(sigma) - 0.5 * kLogTwoPi;
  out.dx = -r * inv;
  out.dparam[0] = r * inv;
  out.dparam[1] = (r * r - 1.0) * inv;
  return out;
}

Partials uniform_partials(double x, double lo, double hi) {
  if (x < lo || x > hi) return outside();
  Partials out;
  const double width = hi - lo;
  out.value = -std::log(width);
  out.dparam[0] = 1.0 / width;
  out.dparam[1] = -1.0 / width;
  return out;
}

Partials gamma_partials(double x, double shape, double rate) {
  if (x < 0) return outside();
  Partials out;
  if (x == 0) {
    out.value = shape == 1.0 ? std::log(rate) : (shape < 1.0 ? kInf : -kInf);
    return out;
  }
  const double log_x = std::log(x);
  out.value = shape * std::log(rate) - lgamma_pos(shape) + (shape - 1.0) * log_x - rate * x;
  out.dx = (shape - 1.0) / x - rate;
  out.dparam[0] = std::log(rate) - digamma(shape) + log_x;
  out.dparam[1] = shape / rate - x;
  return out;
}

Partials beta_partials(double x, double a, double b) {
  if (x < 0 || x > 1) return outside();
  Partials out;
  const double log_x = std::log(x);
  const double log_1mx = std::log1p(-x);
  const double ta = a == 1.0 ? 0.0 : (a - 1.0) * log_x;
  const double tb = b == 1.0 ? 0.0 : (b - 1.0) * log_1mx;
  out.value = lgamma_pos(a + b) - lgamma_pos(a) - lgamma_pos(b) + ta + tb;
  if (x == 0 || x == 1) return out;
  const double psi_ab = digamma(a + b);
  out.dx = (a - 1.0) / x - (b - 1.0) / (1.0 - x);
  out.dparam[0] = psi_ab - digamma(a) + log_x;
  out.dparam[1] = psi_ab - digamma(b) + log_1mx;
  return out;
}

Partials bernoulli_partials(double x, double p) {
  Partials out;
  if (x == 1.0) {
    out.value = std::log(p);
    if (p > 0) out.dparam[0] = 1.0 / p;
  } else if (x == 0.0) {
    out.value = std::log1p(-p);
    if (p < 1) out.dparam[0] = -1.0 / (1.0 - p);
  } else {
    return outside();
  }
  return out;
}

Partials scaled_t_partials(double x, double nu, double mu, double sigma) {
  Partials out;
  const double r = (x - mu) / sigma;
  const double r2 = r * r;
  const double log_kernel = std::log1p(r2 / nu);
  out.value = lgamma_pos(0.5 * (nu + 1.0)) - lgamma_pos(0.5 * nu) - 0.5 * std::log(nu * M_PI) -
              std::log(sigma) - 0.5 * (nu + 1.0) * log_kernel;
  const double w = (nu + 1.0) / (nu + r2);
  out.dparam[0] = 0.5 * (digamma(0.5 * (nu + 1.0)) - digamma(0.5 * nu)) - 0.5 / nu -
                  0.5 * log_kernel + 0.5 * w * r2 / nu;
  out.dparam[1] = w * r / sigma;
  out.dparam[2] = (w * r2 - 1.0) / sigma;
  out.dx = -w * r / sigma;
  return out;
}

Partials emg_partials(double x, double mu, double sigma, double lambda) {
  Partials out;
  const double d = x - mu;
  const double z = d / sigma - lambda * sigma;
  double m;
  if (z < 0) {
    const double scaled = log_ndtr_scaled(z);
    out.value = std::log(lambda) - 0.5 * (d / sigma) * (d / sigma) + scaled;
    m = z < kTailSwitch ? -z / ndtr_tail_series(z) : std::exp(-0.5 * kLogTwoPi - scaled);
  } else {
    const double lphi = log_ndtr(z);
    out.value = std::log(lambda) - lambda * d + 0.5 * lambda * lambda * sigma * sigma + lphi;
    m = std::exp(-0.5 * z * z - 0.5 * kLogTwoPi - lphi);
  }
  out.dx = -lambda + m / sigma;
  out.dparam[0] = lambda - m / sigma;
  out.dparam[1] = lambda * lambda * sigma - m * (d / (sigma * sigma) + lambda);
  out.dparam[2] = 1.0 / lambda - d + lambda * sigma * sigma - m * sigma;
  return out;
}

Partials truncnorm_partials(double x, double mu, double sigma, double lo, double hi) {
  if (x < lo || x > hi) return outside();
  Partials out;
  const double a = (lo - mu) / sigma;
  const double b = (hi - mu) / sigma;
  const double log_z = log_diff_ndtr(a, b);
  const double pa = scaled_density_ratio(a, log_z);
  const double pb = scaled_density_ratio(b, log_z);
  const double apa = std::isfinite(a) ? a * pa : 0.0;
  const double bpb = std::isfinite(b) ? b * pb : 0.0;
  const double d = x - mu;
  const double s2 = sigma * sigma;
  out.value = -0.5 * d * d / s2 - std::log(sigma) - 0.5 * kLogTwoPi - log_z;
  out.dx = -d / s2;
  out.dparam[0] = d / s2 - (pa - pb) / sigma;
  out.dparam[1] = -1.0 / sigma + d * d / (s2 * sigma) - (apa - bpb) / sigma;
  out.dparam[2] = pa / sigma;
  out.dparam[3] = -pb / sigma;
  return out;
}

Partials vonmises_partials(double theta, double mu, double kappa) {
  Partials out;
  const double delta = std::remainder(theta - mu, kTwoPi);
  const double c = std::cos(delta);
  const double s = std::sin(delta);
  out.value = kappa * c - kLogTwoPi - log_i0(kappa);
  out.dx = -kappa * s;
  out.dparam[0] = kappa * s;
  out.dparam[1] = c - bessel_i1_i0_ratio(kappa);
  return out;
}

double normal_logpdf(double x, double mu, double sigma) { return normal_partials(x, mu, sigma).value; }

double uniform_logpdf(double x, double lo, double hi) { return uniform_partials(x, lo, hi).value; }

double gamma_logpdf(double x, double shape, double rate) {
  if (x < 0) return -kInf;
  if (x == 0) return gamma_partials(x, shape, rate).value;
  return shape * std::log(rate) - lgamma_pos(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double beta_logpdf(double x, double a, double b) {
  if (x < 0 || x > 1) return -kInf;
  const double ta = a == 1.0 ? 0.0 : (a - 1.0) * std::log(x);
  const double tb = b == 1.0 ? 0.0 : (b - 1.0) * std::log1p(-x);
  return lgamma_pos(a + b) - lgamma_pos(a) - lgamma_pos(b) + ta + tb;
}

double bernoulli_logpmf(double x, double p) { return bernoulli_partials(x, p).value; }

double emg_logpdf(double x, double mu, double sigma, double lambda) {
  if (!(sigma > 0) || !(lambda > 0)) fail(ErrorKind::parameter, "emg: sigma and lambda must be positive");
  const double d = x - mu;
  const double z = d / sigma - lambda * sigma;
  if (z < 0) return std::log(lambda) - 0.5 * (d / sigma) * (d / sigma) + log_ndtr_scaled(z);
  return std::log(lambda) - lambda * d + 0.5 * lambda * lambda * sigma * sigma + log_ndtr(z);
}

double scaled_t_logpdf(double x, double nu, double mu, double sigma) {
  if (!(nu > 0) || !(sigma > 0)) fail(ErrorKind::parameter, "scaled_t: nu and sigma must be positive");
  const double r = (x - mu) / sigma;
  return lgamma_pos(0.5 * (nu + 1.0)) - lgamma_pos(0.5 * nu) - 0.5 * std::log(nu * M_PI) - std::log(sigma) -
         0.5 * (nu + 1.0) * std::log1p(r * r / nu);
}

double truncnorm_logpdf(double x, double mu, double sigma, double lo, double hi) {
  if (!(lo < hi)) fail(ErrorKind::parameter, "truncated_normal: lower bound must be below upper bound");
  if (!(sigma > 0)) fail(ErrorKind::parameter, "truncated_normal: sigma must be positive");
  if (x < lo || x > hi) return -kInf;
  return normal_logpdf(x, mu, sigma) - log_diff_ndtr((lo - mu) / sigma, (hi - mu) / sigma);
}

double vonmises_logpdf(double theta, double mu, double kappa) {
  if (!(kappa >= 0)) fail(ErrorKind::parameter, "von_mises: kappa must be non-negative");
  return kappa * std::cos(std::remainder(theta - mu, kTwoPi)) - kLogTwoPi - log_i0(kappa);
}

namespace {

Partials dispatch_partials(const DistParams& dist, double x) {
  const auto& p = dist.params;
  switch (dist.family) {
    case Family::normal: return normal_partials(x, p[0], p[1]);
    case Family::uniform: return uniform_partials(x, p[0], p[1]);
    case Family::gamma: return gamma_partials(x, p[0], p[1]);
    case Family::beta: return beta_partials(x, p[0], p[1]);
    case Family::bernoulli: return bernoulli_partials(x, p[0]);
    case Family::scaled_t: return scaled_t_partials(x, p[0], p[1], p[2]);
    case Family::emg: return emg_partials(x, p[0], p[1], p[2]);
    case Family::truncated_normal: return truncnorm_partials(x, p[0], p[1], p[2], p[3]);
    case Family::von_mises: return vonmises_partials(x, p[0], p[1]);
    case Family::dirichlet_uniform: break;
  }
  fail(ErrorKind::parameter, "dirichlet_uniform has no scalar density");
}

bool in_interior(const DistParams& dist, double x) {
  const auto& p = dist.params;
  switch (dist.family) {
    case Family::normal:
    case Family::scaled_t:
    case Family::emg:
    case Family::von_mises: return std::isfinite(x);
    case Family::uniform: return x > p[0] && x < p[1];
    case Family::gamma: return x > 0 && std::isfinite(x);
    case Family::beta: return x > 0 && x < 1;
    case Family::bernoulli: return (x == 0 || x == 1) && p[0] > 0 && p[0] < 1;
    case Family::truncated_normal: return x > p[2] && x < p[3];
    case Family::dirichlet_uniform: return false;
  }
  return false;
}

void check_variate(double x) {
  if (std::isnan(x)) fail(ErrorKind::input, "variate is NaN");
}

}  // namespace

double logpdf_standard(const DistParams& dist, double x) {
  switch (dist.family) {
    case Family::normal:
    case Family::uniform:
    case Family::gamma:
    case Family::beta:
    case Family::bernoulli: break;
    default:
      fail(ErrorKind::parameter,
           "logpdf_standard does not handle family " + std::string(family_name(dist.family)));
  }
  return logpdf(dist, x);
}

double logpdf(const DistParams& dist, double x) {
  validate(dist);
  check_variate(x);
  if (dist.family == Family::gamma) return gamma_logpdf(x, dist.params[0], dist.params[1]);
  if (dist.family == Family::beta) return beta_logpdf(x, dist.params[0], dist.params[1]);
  return dispatch_partials(dist, x).value;
}

std::vector<double> grad_logpdf(const DistParams& dist, double x) {
  validate(dist);
  check_variate(x);
  if (!in_interior(dist, x)) {
    fail(ErrorKind::boundary, std::string(family_name(dist.family)) +
                                  ": gradient requested outside the interior of the support");
  }
  const Partials part = dispatch_partials(dist, x);
  return {part.dparam.begin(), part.dparam.begin() + static_cast<std::ptrdiff_t>(arity(dist.family))};
}

double dlogpdf_dx(const DistParams& dist, double x) {
  validate(dist);
  check_variate(x);
  if (!in_interior(dist, x) || dist.family == Family::bernoulli) {
    fail(ErrorKind::boundary, std::string(family_name(dist.family)) + ": no derivative in the variate here");
  }
  return dispatch_partials(dist, x).dx;
}

// Variates ---------------------------------------------------------------------

double wrap_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double sample_normal(double mu, double sigma, Rng& rng) { return mu + sigma * rng.normal(); }

namespace {

// Standard normal restricted to [a, b] with 0 <= a < b.
double upper_tail(double a, double b, Rng& rng) {
  if (a == 0.0 || b - a < 1.0 / a) {
    for (;;) {
      const double z = a + (b - a) * rng.uniform();
      if (rng.uniform() <= std::exp(0.5 * (a * a - z * z))) return z;
    }
  }
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential() / alpha;
    if (z > b) continue;
    if (rng.uniform() <= std::exp(-0.5 * (z - alpha) * (z - alpha))) return z;
  }
}

double standard_truncated(double a, double b, Rng& rng) {
  const double mass = std::exp(log_diff_ndtr(a, b));
  if (mass >= 0.25) {
    for (;;) {
      const double z = rng.normal();
      if (z >= a && z <= b) return z;
    }
  }
  if (a >= 0) return upper_tail(a, b, rng);
  if (b <= 0) return -upper_tail(-b, -a, rng);
  for (;;) {
    const double z = a + (b - a) * rng.uniform();
    if (rng.uniform() <= std::exp(-0.5 * z * z)) return z;
  }
}

}  // namespace

double sample_truncnorm(double mu, double sigma, double lo, double hi, Rng& rng) {
  const double z = standard_truncated((lo - mu) / sigma, (hi - mu) / sigma, rng);
  return std::clamp(mu + sigma * z, lo, hi);
}

double sample_vonmises(double mu, double kappa, Rng& rng) {
  if (kappa < 1e-8) return wrap_angle(mu + kTwoPi * rng.uniform());
  // Best & Fisher (1979)
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  double f;
  for (;;) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform_open();
    const double z = std::cos(M_PI * u1);
    f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0) break;
    if (std::log(c / u2) + 1.0 - c >= 0) break;
  }
  const double u3 = rng.uniform();
  const double theta = mu + (u3 > 0.5 ? 1.0 : -1.0) * std::acos(std::clamp(f, -1.0, 1.0));
  return wrap_angle(theta);
}

double sample_beta(double a, double b, Rng& rng) {
  const double x = rng.gamma(a);
  const double y = rng.gamma(b);
  if (x + y == 0.0) return rng.uniform() < a / (a + b) ? 1.0 : 0.0;
  return x / (x + y);
}

double sample_emg(double mu, double sigma, double lambda, Rng& rng) {
  const double normal_part = mu + sigma * rng.normal();
  return normal_part + rng.exponential() / lambda;
}

double sample_scaled_t(double nu, double mu, double sigma, Rng& rng) {
  const double z = rng.normal();
  const double chi2 = 2.0 * rng.gamma(0.5 * nu);
  return mu + sigma * z / std::sqrt(chi2 / nu);
}

double sample(const DistParams& dist, Rng& rng) {
  validate(dist);
  const auto& p = dist.params;
  switch (dist.family) {
    case Family::normal: return sample_normal(p[0], p[1], rng);
    case Family::uniform: return p[0] + (p[1] - p[0]) * rng.uniform();
    case Family::gamma: return rng.gamma(p[0]) / p[1];
    case Family::beta: return sample_beta(p[0], p[1], rng);
    case Family::bernoulli: return rng.uniform() < p[0] ? 1.0 : 0.0;
    case Family::scaled_t: return sample_scaled_t(p[0], p[1], p[2], rng);
    case Family::emg: return sample_emg(p[0], p[1], p[2], rng);
    case Family::truncated_normal: return sample_truncnorm(p[0], p[1], p[2], p[3], rng);
    case Family::von_mises: return sample_vonmises(p[0], p[1], rng);
    case Family::dirichlet_uniform: break;
  }
  fail(ErrorKind::parameter, "dirichlet_uniform draws are vectors; use sample_dirichlet_uniform");
}

std::vector<double> sample_dirichlet_uniform(std::size_t n, Rng& rng) {
  if (n == 0) fail(ErrorKind::parameter, "dirichlet_uniform: dimension must be positive");
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& v : w) {
    v = rng.exponential();
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace psybayes::dists

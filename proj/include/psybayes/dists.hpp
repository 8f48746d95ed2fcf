#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "psybayes/rng.hpp"

/// Log-density kernels, parameter gradients and random variates for every
/// distribution family used by the models.
///
/// Parameter conventions (arity in parentheses):
///   normal (2)            mean, standard deviation
///   uniform (2)           lower, upper
///   gamma (2)             shape, rate
///   beta (2)              a, b
///   bernoulli (1)         p
///   scaled_t (3)          nu, mu, sigma
///   emg (3)               mu, sigma, lambda (normal + exponential with rate lambda)
///   truncated_normal (4)  mu, sigma, lo, hi (lo/hi may be infinite)
///   von_mises (2)         mu, kappa (radians)
///   dirichlet_uniform (1) dimension n
namespace psybayes::dists {

enum class Family {
  normal,
  uniform,
  gamma,
  beta,
  bernoulli,
  scaled_t,
  emg,
  truncated_normal,
  von_mises,
  dirichlet_uniform,
};

std::string_view family_name(Family family);
std::size_t arity(Family family);

struct DistParams {
  Family family;
  std::vector<double> params;
};

/// Throws a parameter error when arity or positivity rules are violated.
void validate(const DistParams& dist);

inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kTwoPi = 6.283185307179586476925;

// Special functions ---------------------------------------------------------

/// log Phi(z), accurate in both tails.
double log_ndtr(double z);
/// phi(z) / Phi(z).
double inv_mills(double z);
/// log(Phi(b) - Phi(a)) for a < b; either end may be infinite.
double log_diff_ndtr(double a, double b);
/// log I0(kappa). Power series up to kappa = 50, asymptotic expansion above.
double log_i0(double kappa);
/// I1(kappa) / I0(kappa), the derivative of log I0.
double bessel_i1_i0_ratio(double kappa);
/// Reentrant log-gamma for positive arguments.
double lgamma_pos(double x);
double digamma(double x);

// Kernels --------------------------------------------------------------------

/// Log-density with derivatives w.r.t. the variate and each parameter (in the
/// family's parameter order). Outside the support `value` is -inf and all
/// partials are zero; no validation is performed on this path.
struct Partials {
  double value = 0.0;
  double dx = 0.0;
  std::array<double, 4> dparam{};
};

Partials normal_partials(double x, double mu, double sigma);
Partials uniform_partials(double x, double lo, double hi);
Partials gamma_partials(double x, double shape, double rate);
Partials beta_partials(double x, double a, double b);
Partials bernoulli_partials(double x, double p);
Partials scaled_t_partials(double x, double nu, double mu, double sigma);
Partials emg_partials(double x, double mu, double sigma, double lambda);
Partials truncnorm_partials(double x, double mu, double sigma, double lo, double hi);
Partials vonmises_partials(double theta, double mu, double kappa);

double normal_logpdf(double x, double mu, double sigma);
double uniform_logpdf(double x, double lo, double hi);
double gamma_logpdf(double x, double shape, double rate);
double beta_logpdf(double x, double a, double b);
/// Exactly 0 / -inf at p in {0, 1}.
double bernoulli_logpmf(double x, double p);

/// Log of the normal (mu, sigma) convolved with an exponential (rate lambda).
/// Evaluated through log Phi so that large lambda * sigma cannot overflow.
double emg_logpdf(double x, double mu, double sigma, double lambda);
double scaled_t_logpdf(double x, double nu, double mu, double sigma);
double truncnorm_logpdf(double x, double mu, double sigma, double lo, double hi);
double vonmises_logpdf(double theta, double mu, double kappa);

/// Validated entry point for the prior families (normal, uniform, gamma,
/// beta, bernoulli).
double logpdf_standard(const DistParams& dist, double x);

/// Validated log-density for every scalar family.
double logpdf(const DistParams& dist, double x);

/// Partial derivatives of logpdf with respect to each parameter. Throws a
/// boundary error when x is not in the interior of the support.
std::vector<double> grad_logpdf(const DistParams& dist, double x);

/// Derivative of logpdf with respect to the variate.
double dlogpdf_dx(const DistParams& dist, double x);

// Variates ---------------------------------------------------------------------

double sample(const DistParams& dist, Rng& rng);

/// Dirichlet(1, ..., 1) via normalized unit exponentials.
std::vector<double> sample_dirichlet_uniform(std::size_t n, Rng& rng);

double sample_normal(double mu, double sigma, Rng& rng);
double sample_truncnorm(double mu, double sigma, double lo, double hi, Rng& rng);
double sample_vonmises(double mu, double kappa, Rng& rng);
double sample_beta(double a, double b, Rng& rng);
double sample_emg(double mu, double sigma, double lambda, Rng& rng);
double sample_scaled_t(double nu, double mu, double sigma, Rng& rng);

/// Reduces an angle into [0, 2 pi).
double wrap_angle(double theta);

}  // namespace psybayes::dists

#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "psybayes/error.hpp"
#include "psybayes/rng.hpp"
#include "psybayes/sampler.hpp"

namespace psytest {

inline void expect_error(psybayes::ErrorKind kind, const std::function<void()>& fn) {
  bool thrown = false;
  try {
    fn();
  } catch (const psybayes::Error& e) {
    thrown = true;
    CHECK_MESSAGE(e.kind() == kind, "got ", psybayes::error_kind_name(e.kind()), ": ", e.what());
  }
  CHECK_MESSAGE(thrown, "expected a ", psybayes::error_kind_name(kind), " error");
}

/// Largest mixed relative error of the analytic gradient against a five-point
/// central difference at `u`. The fourth-order stencil lets h stay large
/// enough that round-off in log densities of order 1e5 does not dominate.
inline double gradient_error(const psybayes::TargetDensity& target, const std::vector<double>& u, double h = 1e-4) {
  std::vector<double> grad(target.dim), scratch(target.dim);
  target.log_density(u, grad);
  double worst = 0.0;
  for (std::size_t i = 0; i < target.dim; ++i) {
    auto at = [&](double d) {
      auto v = u;
      v[i] += d;
      return target.log_density(v, scratch);
    };
    const double fd = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
    worst = std::max(worst, std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace psytest

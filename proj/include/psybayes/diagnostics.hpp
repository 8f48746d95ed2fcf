#pragma once

#include <array>
#include <string>
#include <vector>

#include "psybayes/models.hpp"
#include "psybayes/sampler.hpp"

namespace psybayes {

using ChainDraws = std::vector<std::vector<double>>;

struct Diagnostic {
  double value = 0.0;
  bool constant = false;  // zero within-chain variance; value is NaN
  bool capped = false;    // ESS hit the super-efficiency cap
};

/// Split R-hat over the 2m half-chains (odd lengths drop the middle draw).
Diagnostic split_rhat(const ChainDraws& chains);

/// Effective sample size from chain-averaged autocovariances with Geyer's
/// initial monotone sequence. Capped at 1.5 x total draws.
Diagnostic ess(const ChainDraws& chains);

inline constexpr double kEssCap = 1.5;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Shortest window of sorted draws spanning ceil(prob * n) gaps; ties go to
/// the smallest lower endpoint.
Interval hdi(std::vector<double> draws, double prob = 0.95);

/// HDI of angles: rotate so the circular mean sits at pi, take the linear
/// HDI, rotate back. The result may extend outside [0, 2 pi).
Interval circular_hdi(const std::vector<double>& angles, double prob = 0.95);

double circular_mean(const std::vector<double>& angles);

/// Linear-interpolation quantile (type 7) of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q);

double mean_of(const std::vector<double>& v);
double sd_of(const std::vector<double>& v);

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double se_mean = 0.0;
  double sd = 0.0;
  std::array<double, 5> quantiles{};  // 2.5, 25, 50, 75, 97.5 %
  double n_eff = 0.0;
  double rhat = 0.0;
  bool constant = false;
  bool ess_capped = false;
};

/// Summary of one parameter's chains. Circular parameters are summarized
/// after centering on their circular mean.
SummaryRow summarize_chains(const std::string& name, const ChainDraws& chains, bool circular);

/// One row per registered parameter and derived quantity.
std::vector<SummaryRow> summarize(const Fit& fit, Execution execution = Execution::parallel);

/// Header plus aligned table.
std::string print_fit(const Fit& fit);

/// Short "label: mean +/- mcse, 95% HDI: [lo, hi]" lines for the main
/// quantities of the fit.
std::string summary_text(const Fit& fit);

struct ConvergenceReport {
  double max_rhat = 0.0;
  std::string worst;
  int divergences = 0;
  int saturated = 0;
};

ConvergenceReport convergence(const Fit& fit);
std::string diagnose_text(const Fit& fit);

}  // namespace psybayes

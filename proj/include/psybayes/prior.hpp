#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace psybayes {

enum class PriorFamily { flat, uniform, normal, gamma, beta };

std::string_view prior_family_name(PriorFamily family);

struct PriorSpec {
  PriorFamily family = PriorFamily::flat;
  std::vector<double> params;

  bool is_flat() const { return family == PriorFamily::flat; }
};

/// Validated prior. Unknown family or bad uniform bounds -> spec error,
/// other invalid parameters -> parameter error. Gamma is shape/rate.
PriorSpec make_prior(std::string_view family, std::vector<double> params);

struct PriorContrib {
  double logpdf = 0.0;
  double dlogpdf = 0.0;
};

/// Log prior and its derivative in the constrained value. Flat is (0, 0).
PriorContrib prior_log_contrib(const PriorSpec& spec, double value);

/// "normal(60,30)", "flat".
std::string format_prior(const PriorSpec& spec);

/// Parses "normal(60, 30)".
PriorSpec parse_prior(std::string_view text);

class PriorMap {
 public:
  void set(const std::string& name, PriorSpec spec);
  const PriorSpec* find(std::string_view name) const;
  /// Flat when absent.
  PriorSpec get(std::string_view name) const;
  const std::vector<std::pair<std::string, PriorSpec>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  /// Every name must appear in `allowed`, else spec error.
  void check_names(const std::vector<std::string>& allowed) const;

 private:
  std::vector<std::pair<std::string, PriorSpec>> entries_;
};

/// Parses "mu:normal(60,30)" into (name, spec).
std::pair<std::string, PriorSpec> parse_prior_assignment(std::string_view text);

/// "mu:normal(60,30);sigma:gamma(2,1)" (empty map -> "").
std::string format_prior_map(const PriorMap& priors);
PriorMap parse_prior_map(std::string_view text);

}  // namespace psybayes

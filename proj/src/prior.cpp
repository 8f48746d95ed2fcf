#include "psybayes/prior.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "psybayes/dists.hpp"
#include "psybayes/error.hpp"

namespace psybayes {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    fail(ErrorKind::spec, "cannot parse prior parameter '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::string_view prior_family_name(PriorFamily family) {
  switch (family) {
    case PriorFamily::flat: return "flat";
    case PriorFamily::uniform: return "uniform";
    case PriorFamily::normal: return "normal";
    case PriorFamily::gamma: return "gamma";
    case PriorFamily::beta: return "beta";
  }
  return "flat";
}

PriorSpec make_prior(std::string_view family, std::vector<double> params) {
  PriorSpec spec;
  spec.params = std::move(params);
  dists::Family dist_family;
  if (family == "flat") {
    if (!spec.params.empty()) fail(ErrorKind::spec, "flat prior takes no parameters");
    return spec;
  } else if (family == "uniform") {
    spec.family = PriorFamily::uniform;
    dist_family = dists::Family::uniform;
    if (spec.params.size() == 2 && !(spec.params[0] < spec.params[1])) {
      fail(ErrorKind::spec, fmt::format("uniform prior needs lower < upper, got ({}, {})", spec.params[0],
                                        spec.params[1]));
    }
  } else if (family == "normal") {
    spec.family = PriorFamily::normal;
    dist_family = dists::Family::normal;
  } else if (family == "gamma") {
    spec.family = PriorFamily::gamma;
    dist_family = dists::Family::gamma;
  } else if (family == "beta") {
    spec.family = PriorFamily::beta;
    dist_family = dists::Family::beta;
  } else {
    fail(ErrorKind::spec, "unknown prior family '" + std::string(family) + "'");
  }
  if (spec.params.size() != 2) {
    fail(ErrorKind::spec, fmt::format("{} prior takes 2 parameters, got {}", family, spec.params.size()));
  }
  dists::validate({dist_family, spec.params});
  return spec;
}

PriorContrib prior_log_contrib(const PriorSpec& spec, double value) {
  const auto& p = spec.params;
  dists::Partials part;
  switch (spec.family) {
    case PriorFamily::flat: return {};
    case PriorFamily::uniform: part = dists::uniform_partials(value, p[0], p[1]); break;
    case PriorFamily::normal: part = dists::normal_partials(value, p[0], p[1]); break;
    case PriorFamily::gamma: part = dists::gamma_partials(value, p[0], p[1]); break;
    case PriorFamily::beta: part = dists::beta_partials(value, p[0], p[1]); break;
  }
  return {part.value, part.dx};
}

std::string format_prior(const PriorSpec& spec) {
  if (spec.is_flat()) return "flat";
  return fmt::format("{}({})", prior_family_name(spec.family), fmt::join(spec.params, ","));
}

PriorSpec parse_prior(std::string_view text) {
  text = trim(text);
  if (text == "flat" || text == "flat()") return {};
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    fail(ErrorKind::spec, "prior must look like family(a,b), got '" + std::string(text) + "'");
  }
  const auto family = trim(text.substr(0, open));
  auto inner = text.substr(open + 1, text.size() - open - 2);
  std::vector<double> params;
  while (!trim(inner).empty()) {
    const auto comma = inner.find(',');
    params.push_back(parse_number(inner.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  return make_prior(family, std::move(params));
}

void PriorMap::set(const std::string& name, PriorSpec spec) {
  if (find(name)) fail(ErrorKind::spec, "prior for '" + name + "' given more than once");
  entries_.emplace_back(name, std::move(spec));
}

const PriorSpec* PriorMap::find(std::string_view name) const {
  for (const auto& [n, s] : entries_) {
    if (n == name) return &s;
  }
  return nullptr;
}

PriorSpec PriorMap::get(std::string_view name) const {
  const auto* spec = find(name);
  return spec ? *spec : PriorSpec{};
}

void PriorMap::check_names(const std::vector<std::string>& allowed) const {
  for (const auto& [name, spec] : entries_) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      fail(ErrorKind::spec, fmt::format("no parameter '{}' accepts a prior here (choices: {})", name,
                                        fmt::join(allowed, ", ")));
    }
  }
}

std::pair<std::string, PriorSpec> parse_prior_assignment(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    fail(ErrorKind::spec, "prior must look like name:family(a,b), got '" + std::string(text) + "'");
  }
  const auto name = trim(text.substr(0, colon));
  if (name.empty()) fail(ErrorKind::spec, "prior has an empty parameter name");
  return {std::string(name), parse_prior(text.substr(colon + 1))};
}

std::string format_prior_map(const PriorMap& priors) {
  std::string out;
  for (const auto& [name, spec] : priors.entries()) {
    if (!out.empty()) out += ';';
    out += name + ':' + format_prior(spec);
  }
  return out;
}

PriorMap parse_prior_map(std::string_view text) {
  PriorMap map;
  while (!trim(text).empty()) {
    const auto semi = text.find(';');
    auto [name, spec] = parse_prior_assignment(text.substr(0, semi));
    map.set(name, std::move(spec));
    if (semi == std::string_view::npos) break;
    text.remove_prefix(semi + 1);
  }
  return map;
}

}  // namespace psybayes

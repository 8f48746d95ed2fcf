#include "psybayes/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "psybayes/error.hpp"

namespace psybayes {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_cells(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == delim && !quoted) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      if (pos < text.size()) out.push_back(text.substr(pos));
      break;
    }
    out.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

double to_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  if (!parse_double(s, v)) fail(ErrorKind::io, fmt::format("{}: not a number: '{}'", what, s));
  return v;
}

std::vector<std::string> split_top_level(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '(' || ch == '[') ++depth;
    if (ch == ')' || ch == ']') --depth;
    if (ch == delim && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

// Tables -----------------------------------------------------------------------

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  fail(ErrorKind::data, fmt::format("missing column '{}' (have: {})", name, fmt::join(header, ", ")));
}

bool Table::has(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<double> Table::numeric(std::string_view name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double v = 0.0;
    if (!parse_double(rows[r][c], v) || !std::isfinite(v))
      fail(ErrorKind::data, fmt::format("row {}: column '{}' is not numeric: '{}'", line[r], name, rows[r][c]));
    out.push_back(v);
  }
  return out;
}

std::vector<int> Table::integer(std::string_view name) const {
  const auto values = numeric(name);
  std::vector<int> out;
  out.reserve(values.size());
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (values[r] != std::floor(values[r]) || std::abs(values[r]) > 1e9)
      fail(ErrorKind::data, fmt::format("row {}: column '{}' is not an integer: '{}'", line[r], name,
                                        rows[r][column(name)]));
    out.push_back(static_cast<int>(values[r]));
  }
  return out;
}

Table Table::filter(std::string_view name, std::string_view value) const {
  const std::size_t c = column(name);
  Table out;
  out.header = header;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r][c] == value) {
      out.rows.push_back(rows[r]);
      out.line.push_back(line[r]);
    }
  }
  if (out.rows.empty()) fail(ErrorKind::data, fmt::format("filter {}={} selects no rows", name, value));
  return out;
}

std::vector<double> Table::binarize(std::string_view name, std::string_view value) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[c] == value ? 1.0 : 0.0);
  return out;
}

Table parse_table(std::string_view text) {
  const auto lines = lines_of(text);
  Table t;
  std::size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  if (i == lines.size()) fail(ErrorKind::data, "table is empty");
  const char delim = lines[i].find('\t') != std::string_view::npos ? '\t' : ',';
  t.header = split_cells(lines[i], delim);
  for (auto& h : t.header) {
    if (h.empty()) fail(ErrorKind::data, "empty column name in header");
  }
  for (++i; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto cells = split_cells(lines[i], delim);
    if (cells.size() != t.header.size())
      fail(ErrorKind::data,
           fmt::format("row {}: expected {} cells, found {}", i + 1, t.header.size(), cells.size()));
    t.rows.push_back(std::move(cells));
    t.line.push_back(i + 1);
  }
  if (t.rows.empty()) fail(ErrorKind::data, "table has no data rows");
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, fmt::format("cannot read '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Table read_table(const std::string& path) { return parse_table(read_file(path)); }

std::pair<std::string, std::string> parse_assignment(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0)
    fail(ErrorKind::argument, fmt::format("expected col=value, got '{}'", text));
  return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

std::vector<int> remap_subjects(const std::vector<int>& ids) {
  std::set<int> distinct(ids.begin(), ids.end());
  std::map<int, int> index;
  int next = 1;
  for (int id : distinct) index[id] = next++;
  std::vector<int> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(index[id]);
  return out;
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
  const fs::path tmp = dir / fmt::format(".{}.tmp{}", target.filename().string(), ::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, fmt::format("cannot write '{}'", path));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorKind::io, fmt::format("cannot write '{}'", path));
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::io, fmt::format("cannot write '{}'", path));
  }
}

// Fit files --------------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "# psybayes-fit v1";

std::string level_name(const ParamInfo& p) {
  if (p.derived) return "derived";
  return p.level == Level::group ? "group" : "subject";
}

int subject_of(std::string_view name) {
  const auto open = name.find('[');
  if (open == std::string_view::npos) return 0;
  int v = 0;
  const auto body = name.substr(open + 1, name.size() - open - 2);
  std::from_chars(body.data(), body.data() + body.size(), v);
  return v;
}

std::string join_numbers(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt::format("{:.17g}", v[i]);
  }
  return out;
}

std::string flagged(const Draws& d, const std::vector<std::vector<std::uint8_t>>& flags,
                    const std::function<bool(std::uint8_t)>& pred) {
  std::string out;
  for (int c = 0; c < d.chains; ++c) {
    for (int i = 0; i < d.iterations(); ++i) {
      if (pred(flags[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)])) {
        if (!out.empty()) out += ',';
        out += fmt::format("{}:{}", c + 1, i + 1);
      }
    }
  }
  return out;
}

}  // namespace

std::string save_fit_text(const Fit& fit) {
  const auto& d = fit.draws;
  std::string out;
  out += kMagic;
  out += '\n';
  out += fmt::format("# model: {}\n", model_kind_name(fit.kind));
  out += fmt::format("# chains/iter/warmup/seed: {}/{}/{}/{}\n", fit.config.chains, fit.config.iter,
                     fit.config.warmup, fit.config.seed);
  out += fmt::format("# sampler: target_accept={:.17g};max_treedepth={}\n", fit.config.target_accept,
                     fit.config.max_treedepth);
  std::vector<std::string> params;
  for (const auto& p : fit.params)
    params.push_back(fmt::format("{}:{}:{}", p.name, level_name(p), format_constraint(p.constraint)));
  out += fmt::format("# params: {}\n", fmt::join(params, ","));
  out += fmt::format("# priors: {}\n", format_prior_map(fit.priors));
  for (std::size_t k = 0; k < fit.data.names.size(); ++k)
    out += fmt::format("# data {}: {}\n", fit.data.names[k], join_numbers(fit.data.columns[k]));
  out += fmt::format("# step_size: {}\n", join_numbers(d.step_size));
  out += fmt::format("# divergent: {}\n", flagged(d, d.divergent, [](std::uint8_t v) { return v != 0; }));
  const auto maxdepth = static_cast<std::uint8_t>(fit.config.max_treedepth);
  out += fmt::format("# saturated: {}\n",
                     flagged(d, d.treedepth, [maxdepth](std::uint8_t v) { return v >= maxdepth; }));

  out += "chain,iteration,phase";
  for (const auto& n : d.names) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (int c = 0; c < d.chains; ++c) {
    for (int i = 0; i < d.iterations(); ++i) {
      out += fmt::format("{},{},{}", c + 1, i + 1, i < d.warmup ? "warmup" : "sample");
      for (std::size_t k = 0; k < d.columns(); ++k) {
        out += ',';
        out += fmt::format("{:.17g}", d.at(c, i, k));
      }
      out += '\n';
    }
  }
  return out;
}

Fit load_fit_text(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != kMagic) fail(ErrorKind::io, "not a psybayes fit file");
  if (!text.ends_with('\n')) fail(ErrorKind::io, "fit file is truncated");
  Fit fit;
  std::map<std::string, std::string, std::less<>> header;
  std::vector<std::pair<std::string, std::string>> data_lines;
  std::size_t i = 1;
  for (; i < lines.size() && lines[i].starts_with("#"); ++i) {
    std::string_view l = lines[i].substr(1);
    const auto colon = l.find(':');
    if (colon == std::string_view::npos) fail(ErrorKind::io, fmt::format("fit file line {}: bad header", i + 1));
    const std::string key(trim(l.substr(0, colon)));
    const std::string value(trim(l.substr(colon + 1)));
    if (key.starts_with("data ")) {
      data_lines.emplace_back(key.substr(5), value);
    } else {
      header[key] = value;
    }
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) fail(ErrorKind::io, fmt::format("fit file lacks '{}' header", key));
    return it->second;
  };

  fit.kind = parse_model_kind(need("model"));
  {
    const auto parts = split_top_level(need("chains/iter/warmup/seed"), '/');
    if (parts.size() != 4) fail(ErrorKind::io, "bad chains/iter/warmup/seed header");
    fit.config.chains = static_cast<int>(to_double(parts[0], "chains"));
    fit.config.iter = static_cast<int>(to_double(parts[1], "iter"));
    fit.config.warmup = static_cast<int>(to_double(parts[2], "warmup"));
    std::uint64_t seed = 0;
    const auto& s = parts[3];
    if (std::from_chars(s.data(), s.data() + s.size(), seed).ec != std::errc())
      fail(ErrorKind::io, "bad seed in fit file");
    fit.config.seed = seed;
  }
  if (auto it = header.find("sampler"); it != header.end()) {
    for (const auto& kv : split_top_level(it->second, ';')) {
      const auto [k, v] = parse_assignment(kv);
      if (k == "target_accept") fit.config.target_accept = to_double(v, k);
      if (k == "max_treedepth") fit.config.max_treedepth = static_cast<int>(to_double(v, k));
    }
  }
  for (const auto& item : split_top_level(need("params"), ',')) {
    const auto first = item.find(':');
    const auto second = item.find(':', first + 1);
    if (first == std::string::npos || second == std::string::npos)
      fail(ErrorKind::io, fmt::format("bad parameter entry '{}'", item));
    ParamInfo p;
    p.name = item.substr(0, first);
    const std::string level = item.substr(first + 1, second - first - 1);
    p.constraint = parse_constraint(item.substr(second + 1));
    p.subject = subject_of(p.name);
    p.derived = level == "derived";
    if (level == "subject" || (p.derived && p.subject > 0)) {
      p.level = Level::subject;
    } else if (level == "group" || p.derived) {
      p.level = Level::group;
    } else {
      fail(ErrorKind::io, fmt::format("bad parameter level '{}'", level));
    }
    fit.params.push_back(std::move(p));
  }
  fit.priors = parse_prior_map(header.count("priors") ? header["priors"] : "");
  for (const auto& [name, values] : data_lines) {
    std::vector<double> col;
    for (const auto& v : split_top_level(values, ',')) col.push_back(to_double(v, "data " + name));
    fit.data.add(name, std::move(col));
  }

  // Draws table.
  if (i >= lines.size()) fail(ErrorKind::io, "fit file has no draws table");
  const auto head = split_cells(lines[i], ',');
  if (head.size() < 3 || head[0] != "chain" || head[1] != "iteration" || head[2] != "phase")
    fail(ErrorKind::io, "bad draws table header");
  Draws& d = fit.draws;
  d.names.assign(head.begin() + 3, head.end());
  if (d.names.size() != fit.params.size()) fail(ErrorKind::io, "parameter list and draws table disagree");
  for (std::size_t k = 0; k < d.names.size(); ++k) {
    if (d.names[k] != fit.params[k].name) fail(ErrorKind::io, "parameter list and draws table disagree");
  }
  d.chains = fit.config.chains;
  d.warmup = fit.config.warmup;
  d.samples = fit.config.samples();
  const auto iters = static_cast<std::size_t>(d.iterations());
  d.values.assign(static_cast<std::size_t>(d.chains), std::vector<double>(iters * d.names.size()));
  d.divergent.assign(static_cast<std::size_t>(d.chains), std::vector<std::uint8_t>(iters, 0));
  d.treedepth.assign(static_cast<std::size_t>(d.chains), std::vector<std::uint8_t>(iters, 0));
  std::size_t count = 0;
  for (++i; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cells = split_cells(lines[i], ',');
    if (cells.size() != head.size()) fail(ErrorKind::io, fmt::format("fit file line {}: wrong cell count", i + 1));
    const int c = static_cast<int>(to_double(cells[0], "chain")) - 1;
    const int it = static_cast<int>(to_double(cells[1], "iteration")) - 1;
    if (c < 0 || c >= d.chains || it < 0 || it >= d.iterations())
      fail(ErrorKind::io, fmt::format("fit file line {}: chain or iteration out of range", i + 1));
    for (std::size_t k = 0; k < d.names.size(); ++k) d.at(c, it, k) = to_double(cells[k + 3], d.names[k]);
    ++count;
  }
  if (count != static_cast<std::size_t>(d.chains) * iters) fail(ErrorKind::io, "fit file draws table is incomplete");

  auto mark = [&](const char* key, std::vector<std::vector<std::uint8_t>>& flags, std::uint8_t value) {
    auto it = header.find(key);
    if (it == header.end()) return;
    for (const auto& item : split_top_level(it->second, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) fail(ErrorKind::io, fmt::format("bad '{}' entry", key));
      const int c = static_cast<int>(to_double(item.substr(0, colon), key)) - 1;
      const int k = static_cast<int>(to_double(item.substr(colon + 1), key)) - 1;
      if (c < 0 || c >= d.chains || k < 0 || k >= d.iterations()) fail(ErrorKind::io, fmt::format("bad '{}' entry", key));
      flags[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = value;
    }
  };
  mark("divergent", d.divergent, 1);
  mark("saturated", d.treedepth, static_cast<std::uint8_t>(fit.config.max_treedepth));
  if (auto it = header.find("step_size"); it != header.end()) {
    for (const auto& v : split_top_level(it->second, ',')) d.step_size.push_back(to_double(v, "step_size"));
  }
  return fit;
}

void save_fit(const Fit& fit, const std::string& path) { write_file_atomic(path, save_fit_text(fit)); }

Fit load_fit(const std::string& path) { return load_fit_text(read_file(path)); }

}  // namespace psybayes

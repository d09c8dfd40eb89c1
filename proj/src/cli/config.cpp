#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "ch2/cli.hpp"

namespace ch2::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError("key '" + key + "': expected a finite number, got '" + std::string(text) + "'");
  return v;
}

int parse_int(const std::string& key, std::string_view text) {
  text = trim(text);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + std::string(text) + "'");
  return v;
}

std::vector<double> parse_list(const std::string& key, std::string_view text) {
  std::vector<double> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    out.push_back(parse_double(key, item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "sigma",         "xi",           "alpha",       "a0",          "a1",
      "tol",           "t_end",        "t0",          "nt",          "nx",
      "x_min",         "x_max",        "levels",      "support_fraction",
      "x_extent",      "dispersion",   "conservation_times",          "decay_times",
      "velocity_scale", "order_tol",   "dispersion_tol", "mass_rel_tol", "drift_tol",
      "rate_tol",      "rate_floor",   "decay_tol"};
  return keys;
}

}  // namespace

std::vector<KeyValues> parse_blocks(std::string_view text) {
  std::vector<KeyValues> blocks(1);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line == "---") {
      blocks.emplace_back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!known_keys().contains(key))
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (blocks.back().contains(key))
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    blocks.back()[key] = value;
  }
  std::erase_if(blocks, [](const KeyValues& b) { return b.empty(); });
  return blocks;
}

RunConfig make_config(const KeyValues& kv, bool requires_case) {
  for (const auto& [key, value] : kv)
    if (!known_keys().contains(key)) throw ConfigError("unknown key '" + key + "'");

  auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto number = [&](const char* key, double& dst) {
    if (const auto* v = get(key)) dst = parse_double(key, *v);
  };
  auto integer = [&](const char* key, int& dst) {
    if (const auto* v = get(key)) dst = parse_int(key, *v);
  };
  auto opt_number = [&](const char* key, std::optional<double>& dst) {
    if (const auto* v = get(key)) dst = parse_double(key, *v);
  };
  auto list = [&](const char* key, std::vector<double>& dst) {
    if (const auto* v = get(key)) dst = parse_list(key, *v);
  };

  RunConfig c;
  if (!get("xi")) throw ConfigError("missing required key 'xi'");
  if (!get("a0")) throw ConfigError("missing required key 'a0'");
  if (const auto* v = get("sigma")) c.sigma = parse_int("sigma", *v);
  number("xi", c.xi);
  number("alpha", c.alpha);
  number("a0", c.a0);
  number("a1", c.a1);
  number("tol", c.tol);
  opt_number("t_end", c.t_end);
  number("t0", c.t0);
  integer("nt", c.nt);
  integer("nx", c.nx);
  opt_number("x_min", c.x_min);
  opt_number("x_max", c.x_max);
  integer("levels", c.levels);
  number("support_fraction", c.support_fraction);
  number("x_extent", c.x_extent);
  list("dispersion", c.dispersion);
  list("conservation_times", c.conservation_times);
  list("decay_times", c.decay_times);
  number("velocity_scale", c.velocity_scale);
  number("order_tol", c.tolerances.order_tol);
  number("dispersion_tol", c.tolerances.dispersion_abs);
  number("mass_rel_tol", c.tolerances.mass_rel);
  number("drift_tol", c.tolerances.drift_rel);
  number("rate_tol", c.tolerances.rate_rel);
  number("rate_floor", c.tolerances.rate_floor);
  number("decay_tol", c.tolerances.decay_rel);

  c.emden().validate();
  if (!(c.tol > 0.0)) throw ConfigError("tol must be > 0");
  if (c.t_end && !(*c.t_end > 0.0)) throw ConfigError("t_end must be > 0");
  if (c.t0 < 0.0) throw ConfigError("t0 must be >= 0");
  if (c.nt < 2 || c.nx < 2) throw ConfigError("grid needs nt >= 2 and nx >= 2");
  if (c.levels < 1) throw ConfigError("levels must be >= 1");
  if (!(c.support_fraction > 0.0 && c.support_fraction < 1.0))
    throw ConfigError("support_fraction must lie in (0, 1)");
  if (!(c.x_extent > 0.0)) throw ConfigError("x_extent must be > 0");
  if (std::any_of(c.dispersion.begin(), c.dispersion.end(), [](double d) { return d < 0.0; }))
    throw ConfigError("dispersion coefficients must be >= 0");
  if (c.x_min && c.x_max && !(*c.x_max > *c.x_min)) throw ConfigError("x_max must exceed x_min");
  if (requires_case) {
    if (!c.sigma) throw ConfigError("missing required key 'sigma'");
    if (!get("alpha")) throw ConfigError("missing required key 'alpha'");
    (void)c.solution_case();
  }
  return c;
}

selfsim::SolutionCase RunConfig::solution_case() const {
  if (!sigma) throw selfsim::InvalidCase("sigma is required to select a solution case");
  return selfsim::SolutionCase::make(*sigma, alpha, emden());
}

verify::SuiteOptions RunConfig::suite_options() const {
  verify::SuiteOptions o;
  o.grid_defaults.nt = nt;
  o.grid_defaults.nx = nx;
  o.grid_defaults.t_end = t_end.value_or(0.5);
  o.grid_defaults.support_fraction = support_fraction;
  o.grid_defaults.x_extent = x_extent;
  o.levels = levels;
  o.dispersion = dispersion;
  o.velocity_scale = velocity_scale;
  o.conservation_times = conservation_times;
  o.decay_times = decay_times;
  o.tol = tolerances;
  return o;
}

}  // namespace ch2::cli

#include "apsing/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "apsing/error.hpp"

namespace apsing {

namespace {

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
  throw Error(ErrorKind::Config, "config", source + ":" + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool bare_key(std::string_view k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

// Drop a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  char quote = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  std::string clean;
  for (char c : s)
    if (c != '_') clean += c;
  if (!clean.empty() && clean[0] == '+') clean.erase(0, 1);
  double v = 0.0;
  const char* end = clean.data() + clean.size();
  auto [ptr, ec] = std::from_chars(clean.data(), end, v);
  if (ec != std::errc() || ptr != end || clean.empty()) return std::nullopt;
  return v;
}

ConfigValue parse_value(std::string_view s, const std::string& source, int line) {
  if (s.empty()) fail(source, line, "missing value");
  if (s.front() == '"') {
    std::string out;
    size_t i = 1;
    for (; i < s.size() && s[i] != '"'; ++i) {
      if (s[i] == '\\') {
        if (++i >= s.size()) break;
        switch (s[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(source, line, std::string("unsupported escape \\") + s[i]);
        }
      } else {
        out += s[i];
      }
    }
    if (i != s.size() - 1) fail(source, line, "unterminated string or trailing text");
    return out;
  }
  if (s.front() == '\'') {
    const size_t close = s.find('\'', 1);
    if (close != s.size() - 1) fail(source, line, "unterminated string or trailing text");
    return std::string(s.substr(1, close - 1));
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') fail(source, line, "arrays must close on the same line");
    std::vector<double> out;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    while (!body.empty()) {
      const size_t comma = body.find(',');
      const std::string_view item = trim(body.substr(0, comma));
      if (item.empty() && comma == std::string_view::npos) break;
      const auto v = parse_number(item);
      if (!v) fail(source, line, "array items must be numbers");
      out.push_back(*v);
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return out;
  }
  if (const auto v = parse_number(s)) {
    if (!std::isfinite(*v)) fail(source, line, "value is not finite");
    return *v;
  }
  fail(source, line, "cannot parse value '" + std::string(s) + "'");
}

std::string render(const ConfigValue& v) {
  std::ostringstream os;
  os.precision(17);
  if (const bool* b = std::get_if<bool>(&v)) os << (*b ? "true" : "false");
  if (const double* d = std::get_if<double>(&v)) os << *d;
  if (const std::string* s = std::get_if<std::string>(&v)) os << '"' << *s << '"';
  if (const auto* a = std::get_if<std::vector<double>>(&v)) {
    os << '[';
    for (size_t i = 0; i < a->size(); ++i) os << (i ? ", " : "") << (*a)[i];
    os << ']';
  }
  return os.str();
}

// Typed access that records which keys were consumed.
class Reader {
 public:
  explicit Reader(const ConfigTable& t) : t_(t) {}

  bool has(const std::string& key) const { return t_.entries.count(key) > 0; }

  double number(const std::string& key, double fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (const double* d = std::get_if<double>(v)) return *d;
    bad(key, "a number");
  }
  int integer(const std::string& key, int fallback) {
    const double d = number(key, fallback);
    if (d != std::floor(d) || std::abs(d) > 1e9) bad(key, "an integer");
    return static_cast<int>(d);
  }
  double positive(const std::string& key, double fallback) {
    const double d = number(key, fallback);
    if (!(d > 0.0)) bad(key, "positive");
    return d;
  }
  std::string text(const std::string& key, const std::string& fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (const std::string* s = std::get_if<std::string>(v)) return *s;
    bad(key, "a string");
  }
  bool flag(const std::string& key, bool fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (const bool* b = std::get_if<bool>(v)) return *b;
    bad(key, "true or false");
  }

  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : t_.entries)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }
  void use(const std::string& key) { used_.insert(key); }

  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    const auto it = t_.lines.find(key);
    throw Error(ErrorKind::Config, "config",
                "line " + std::to_string(it == t_.lines.end() ? 0 : it->second) + ": '" + key +
                    "' must be " + what);
  }

 private:
  const ConfigValue* find(const std::string& key) {
    used_.insert(key);
    const auto it = t_.entries.find(key);
    return it == t_.entries.end() ? nullptr : &it->second;
  }

  const ConfigTable& t_;
  std::set<std::string> used_;
};

}  // namespace

ConfigTable parse_config(std::string_view text, const std::string& source) {
  ConfigTable t;
  std::string section;
  int line_no = 0;
  while (!text.empty()) {
    const size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) fail(source, line_no, "malformed section header");
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      size_t start = 0;
      while (start <= name.size()) {
        const size_t dot = name.find('.', start);
        if (!bare_key(name.substr(start, dot - start))) fail(source, line_no, "bad section name");
        if (dot == std::string_view::npos) break;
        start = dot + 1;
      }
      section = std::string(name);
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) fail(source, line_no, "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!bare_key(key)) fail(source, line_no, "bad key '" + std::string(key) + "'");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (t.entries.count(full)) fail(source, line_no, "duplicate key '" + full + "'");
    t.entries.emplace(full, parse_value(trim(line.substr(eq + 1)), source, line_no));
    t.lines.emplace(full, line_no);
  }
  return t;
}

ConfigTable load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "config", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

const std::vector<std::string>& pipeline_names() {
  static const std::vector<std::string> names = {"spectrum", "fiber",  "balance",
                                                 "four-preimages", "cusp", "classify"};
  return names;
}

RunConfig to_run_config(const ConfigTable& table, const std::string& pipeline) {
  Reader r(table);
  RunConfig c;
  c.pipeline = pipeline.empty() ? r.text("pipeline", "") : pipeline;
  r.use("pipeline");
  const auto& names = pipeline_names();
  if (std::find(names.begin(), names.end(), c.pipeline) == names.end()) {
    throw Error(ErrorKind::Config, "config", "unknown pipeline '" + c.pipeline + "'");
  }
  const double seed = r.number("seed", 1.0);
  if (seed < 0 || seed != std::floor(seed) || seed > 9007199254740992.0) r.bad("seed", "a non-negative integer");
  c.seed = static_cast<std::uint64_t>(seed);
  c.out = r.text("out", c.out);
  c.threads = r.integer("threads", 0);
  if (c.threads < 0) r.bad("threads", "non-negative");

  const std::string kind = r.text("domain.kind", "interval");
  Boundary bc;
  try {
    bc = boundary_from_string(r.text("domain.bc", "dirichlet"));
  } catch (const Error&) {
    r.bad("domain.bc", "dirichlet, neumann or periodic");
  }
  const int n = r.integer("domain.n", 199);
  try {
    if (kind == "interval") {
      c.domain = Domain::interval(r.number("domain.a", 0.0), r.number("domain.b", 1.0), bc, n);
    } else if (kind == "rectangle") {
      c.domain = Domain::rectangle(r.number("domain.ax", 0.0), r.number("domain.bx", 1.0),
                                   r.number("domain.ay", 0.0), r.number("domain.by", 1.0), bc, n);
    } else {
      r.bad("domain.kind", "interval or rectangle");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, "config", std::string("domain: ") + e.detail());
  }

  c.family = r.text("nonlinearity.family", c.pipeline == "cusp" || c.pipeline == "classify"
                                                ? "wiggle"
                                                : "sigmoid_bump");
  c.window.lo = r.number("nonlinearity.scan_lo", c.window.lo);
  c.window.hi = r.number("nonlinearity.scan_hi", c.window.hi);
  c.window.points = r.integer("nonlinearity.scan_points", c.window.points);
  if (!(c.window.hi > c.window.lo) || c.window.points < 3) {
    r.bad("nonlinearity.scan_hi", "above scan_lo with at least 3 scan points");
  }
  const std::string prefix = "nonlinearity.";
  for (const auto& [key, value] : table.entries) {
    if (key.rfind(prefix, 0) != 0) continue;
    const std::string name = key.substr(prefix.size());
    if (name == "family" || name.rfind("scan_", 0) == 0) continue;
    r.use(key);
    const double* d = std::get_if<double>(&value);
    if (!d) r.bad(key, "a number");
    c.parameters[name] = *d;
  }
  if (!table.entries.count("nonlinearity.family") && c.parameters.empty()) {
    // Built-in defaults: the nonconvex reference family, or the wiggle.
    if (c.family == "sigmoid_bump") {
      c.parameters = {{"m", 2.0}, {"M", 15.0}, {"bump_center", -3.0}, {"bump_width", 0.5},
                      {"bump_height", 5.0}};
    } else {
      c.parameters = {{"amplitude", 6.0}, {"center", 1.5}, {"width", 0.6}};
    }
  }
  c.auto_mu_k = c.family == "wiggle" && !c.parameters.count("mu_k");

  c.tol = r.positive("tolerances.tol", c.tol);
  c.tol_tau = r.positive("tolerances.tol_tau", c.tol_tau);
  c.tol_ind = r.positive("tolerances.tol_ind", c.tol_ind);
  c.accept = r.positive("tolerances.accept", c.accept);
  c.separation = r.positive("tolerances.separation", c.separation);
  c.balance_tol = r.positive("tolerances.balance", c.balance_tol);
  c.collapse_tol = r.positive("tolerances.collapse", c.collapse_tol);
  c.roughness_cap = r.positive("tolerances.roughness_cap", c.roughness_cap);

  c.count = r.integer("spectrum.count", c.count);
  if (c.count < 1 || c.count > c.domain.nodes()) r.bad("spectrum.count", "between 1 and the node count");

  c.t_lo = r.number("fiber.t_lo", c.t_lo);
  c.t_hi = r.number("fiber.t_hi", c.t_hi);
  if (!(c.t_hi > c.t_lo)) r.bad("fiber.t_hi", "above fiber.t_lo");
  c.z_amplitude = r.number("fiber.z_amplitude", c.z_amplitude);

  c.left = r.number("balance.left", c.left);
  c.right = r.number("balance.right", c.right);
  c.theta_samples = r.integer("balance.theta_samples", c.theta_samples);
  if (c.theta_samples < 2) r.bad("balance.theta_samples", "at least 2");
  if (c.pipeline == "balance" && !(r.has("balance.left") && r.has("balance.right"))) {
    throw Error(ErrorKind::Config, "config", "the balance pipeline needs balance.left and balance.right");
  }

  c.sigma = r.number("four_preimages.sigma", 0.0);
  if (c.sigma < 0.0) r.bad("four_preimages.sigma", "non-negative");
  if (c.pipeline == "cusp" || c.pipeline == "classify") {
    c.sigma = r.number("cusp.sigma", 0.0);
    if (c.sigma < 0.0) r.bad("cusp.sigma", "non-negative");
  } else {
    r.use("cusp.sigma");
  }
  c.recipe = r.text("cusp.recipe", c.recipe);
  if (c.recipe != "regular" && c.recipe != "hk") r.bad("cusp.recipe", "regular or hk");
  c.k = r.integer("cusp.k", c.k);
  if (c.k < 1) r.bad("cusp.k", "at least 1");
  if (c.recipe == "regular" && c.k != 1) r.bad("cusp.k", "1 for the regular recipe");
  c.per_side = r.integer("cusp.per_side", c.per_side);
  if (c.per_side < 1) r.bad("cusp.per_side", "at least 1");
  c.random_starts = r.integer("cusp.random_starts", c.random_starts);
  if (c.random_starts < 0) r.bad("cusp.random_starts", "non-negative");
  c.three_preimages = r.flag("cusp.three_preimages", c.three_preimages);

  if (const auto extra = r.unused(); !extra.empty()) {
    throw Error(ErrorKind::Config, "config", "unknown key '" + extra.front() + "'");
  }
  std::ostringstream canon;
  for (const auto& [k, v] : table.entries) canon << k << " = " << render(v) << '\n';
  c.canonical = canon.str();
  return c;
}

}  // namespace apsing

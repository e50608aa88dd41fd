#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dais/harness.hpp"

namespace dais {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

class Field {
 public:
  Field(std::string key, std::string_view value, std::size_t line)
      : key_(std::move(key)), value_(value), line_(line) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + key_ + ": " + msg,
                      line_, key_);
  }

  std::string string() const {
    std::string_view v = value_;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
      return std::string(v.substr(1, v.size() - 2));
    }
    if (v.find('"') != std::string_view::npos) fail("unbalanced quotes");
    return std::string(v);
  }

  std::uint64_t unsigned_int() const { return parse_unsigned(value_); }
  double number() const { return parse_number(value_); }

  std::vector<std::uint64_t> unsigned_list() const {
    std::vector<std::uint64_t> out;
    for (auto item : list_items()) out.push_back(parse_unsigned(item));
    return out;
  }
  std::vector<double> number_list() const {
    std::vector<double> out;
    for (auto item : list_items()) out.push_back(parse_number(item));
    return out;
  }

 private:
  std::vector<std::string_view> list_items() const {
    std::string_view v = value_;
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
      fail("expected a list like [1, 2, 3]");
    }
    v = trim(v.substr(1, v.size() - 2));
    std::vector<std::string_view> items;
    if (v.empty()) return items;
    while (true) {
      const auto comma = v.find(',');
      const auto item = trim(v.substr(0, comma));
      if (item.empty()) fail("empty list element");
      items.push_back(item);
      if (comma == std::string_view::npos) break;
      v = v.substr(comma + 1);
    }
    return items;
  }

  std::uint64_t parse_unsigned(std::string_view s) const {
    std::uint64_t x = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || end != s.data() + s.size()) {
      fail("expected a non-negative integer, got '" + std::string(s) + "'");
    }
    return x;
  }

  // Decimal or a fraction p/q.
  double parse_number(std::string_view s) const {
    const auto slash = s.find('/');
    if (slash != std::string_view::npos) {
      const double p = parse_number(trim(s.substr(0, slash)));
      const double q = parse_number(trim(s.substr(slash + 1)));
      if (q == 0.0) fail("division by zero");
      return p / q;
    }
    double x = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || end != s.data() + s.size()) {
      fail("expected a number, got '" + std::string(s) + "'");
    }
    return x;
  }

  std::string key_;
  std::string_view value_;
  std::size_t line_;
};

}  // namespace

std::string to_string(SweepMode mode) {
  switch (mode) {
    case SweepMode::exact: return "exact";
    case SweepMode::mc: return "mc";
    case SweepMode::theory: return "theory";
  }
  return "unknown";
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::additive ? "additive" : "minibatch";
}

ExperimentConfig ExperimentConfig::paper_scale() {
  ExperimentConfig c;
  c.n = 10000;
  c.d = 10;
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw ConfigError(field + ": " + msg, 0, field);
  };
  if (n < 1) fail("n", "must be >= 1");
  if (d < 1) fail("d", "must be >= 1");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) fail("sigma2", "must be positive");
  if (K_grid.empty()) fail("K_grid", "must not be empty");
  for (std::size_t i = 0; i < K_grid.size(); ++i) {
    if (K_grid[i] < 1) fail("K_grid", "entries must be >= 1");
    if (i > 0 && K_grid[i] <= K_grid[i - 1]) fail("K_grid", "must be strictly ascending");
  }
  if (c_list.empty()) fail("c_list", "must not be empty");
  for (double c : c_list) {
    if (!(c >= 0.0) || !std::isfinite(c)) fail("c_list", "entries must be >= 0");
  }
  if (a && !(*a > 0.0 && std::isfinite(*a))) fail("a", "must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma", "must lie in [0, 1]");
  if (mode == SweepMode::mc && mc_chains < 2) fail("mc_chains", "mc mode needs >= 2 chains");
  if (batch_size) {
    if (*batch_size < 1) fail("batch_size", "must be >= 1");
    if (static_cast<Index>(*batch_size) > n) fail("batch_size", "must not exceed n");
  }
  if (sigma_eps && !(*sigma_eps >= 0.0 && std::isfinite(*sigma_eps))) {
    fail("sigma_eps", "must be >= 0");
  }
  if (noise == NoiseKind::minibatch && !batch_size) {
    fail("noise", "minibatch noise needs batch_size");
  }
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      throw ConfigError("line " + std::to_string(line_no) +
                            ": tables are not supported; use flat keys",
                        line_no, "");
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                            ": expected 'key = value'",
                        line_no, "");
    }
    const std::string key(trim(line.substr(0, eq)));
    const Field f(key, trim(line.substr(eq + 1)), line_no);
    if (key.empty()) f.fail("missing key");
    if (!seen.insert(key).second) f.fail("duplicate key");

    if (key == "preset") {
      const std::string p = f.string();
      if (p != "paper-scale" && p != "desk-scale") f.fail("unknown preset '" + p + "'");
      cfg.n = p == "paper-scale" ? 10000 : 1000;
    } else if (key == "n") {
      cfg.n = static_cast<Index>(f.unsigned_int());
    } else if (key == "d") {
      cfg.d = static_cast<Index>(f.unsigned_int());
    } else if (key == "sigma2") {
      cfg.sigma2 = f.number();
    } else if (key == "seed") {
      cfg.seed = f.unsigned_int();
    } else if (key == "K_grid") {
      const auto ks = f.unsigned_list();
      cfg.K_grid.assign(ks.begin(), ks.end());
    } else if (key == "c_list") {
      cfg.c_list = f.number_list();
    } else if (key == "a") {
      cfg.a = f.number();
    } else if (key == "gamma") {
      cfg.gamma = f.number();
    } else if (key == "mode") {
      const std::string m = f.string();
      if (m == "exact") cfg.mode = SweepMode::exact;
      else if (m == "mc") cfg.mode = SweepMode::mc;
      else if (m == "theory") cfg.mode = SweepMode::theory;
      else f.fail("expected exact, mc or theory, got '" + m + "'");
    } else if (key == "mc_chains") {
      cfg.mc_chains = f.unsigned_int();
    } else if (key == "batch_size") {
      cfg.batch_size = f.unsigned_int();
    } else if (key == "sigma_eps") {
      cfg.sigma_eps = f.number();
    } else if (key == "noise") {
      const std::string k = f.string();
      if (k == "additive") cfg.noise = NoiseKind::additive;
      else if (k == "minibatch") cfg.noise = NoiseKind::minibatch;
      else f.fail("expected additive or minibatch, got '" + k + "'");
    } else if (key == "threads") {
      cfg.threads = static_cast<unsigned>(f.unsigned_int());
    } else {
      f.fail("unknown key");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path, 0, "");
  return parse_config(in);
}

}  // namespace dais

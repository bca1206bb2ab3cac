#pragma once

// Flat key=value experiment configuration. Every key can come from a file
// ("key = value" lines, '#' comments) or from the command line; command-line
// values win. Omitted keys take the published defaults.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "becp/simulation.hpp"

namespace becp {

/// Error that names the offending configuration key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class KeyScope { Any, Becp, Snow, Sweep };

struct ConfigKey {
  std::string_view name;
  KeyScope scope;
  std::string_view help;
};

// The documented key set. Flags are the same names with '-' for '_'.
inline constexpr ConfigKey kConfigKeys[] = {
    {"protocol", KeyScope::Any, "becp | snowman | avalanche"},
    {"nodes", KeyScope::Any, "network size N"},
    {"duration", KeyScope::Any, "simulated seconds"},
    {"seed", KeyScope::Any, "first seed; trial i uses seed + i"},
    {"trials", KeyScope::Any, "runs per configuration"},
    {"workers", KeyScope::Any, "parallel runs (0 = hardware threads)"},
    {"latency", KeyScope::Any, "uniform | pareto | zero"},
    {"alpha", KeyScope::Any, "pareto shape (4..8 unless unsafe)"},
    {"x_m", KeyScope::Any, "pareto scale, seconds"},
    {"unsafe", KeyScope::Any, "allow pareto alpha outside 4..8"},
    {"stagger", KeyScope::Any, "random per-node tick offsets"},
    {"out", KeyScope::Any, "output directory"},
    {"p_block", KeyScope::Any, "generation probability per slot"},
    {"t_block", KeyScope::Any, "generation slot length, seconds"},
    {"first_generation", KeyScope::Any, "time of the first slot"},
    {"generate_on_tick", KeyScope::Any, "attempt on the first tick after a slot instead of at it"},
    {"cycle", KeyScope::Any, "activation cycle, seconds"},
    {"d1", KeyScope::Any, "per-message processing delay, seconds"},
    {"epsilon", KeyScope::Becp, "relative estimation error bound"},
    {"psi", KeyScope::Becp, "consecutive converged cycles per phase"},
    {"n_cache", KeyScope::Becp, "peer cache capacity"},
    {"ncp_sample", KeyScope::Becp, "peer ids per message"},
    {"timeout_lo", KeyScope::Becp, "watchdog lower bound, seconds"},
    {"timeout_hi", KeyScope::Becp, "watchdog upper bound, seconds"},
    {"echo_cycles", KeyScope::Becp, "cycles a confirmed block keeps gossiping"},
    {"adopt_phase", KeyScope::Becp, "merged shares advance the local phase"},
    {"parent_rule", KeyScope::Becp, "parent_hash | creator_literal"},
    {"k", KeyScope::Snow, "sample size"},
    {"alpha1", KeyScope::Snow, "quorum (count)"},
    {"alpha1_fraction", KeyScope::Snow, "quorum as a fraction of responses received (0 = use alpha1)"},
    {"alpha2", KeyScope::Snow, "snowman finalisation threshold"},
    {"beta1", KeyScope::Snow, "early commitment threshold"},
    {"beta2", KeyScope::Snow, "consecutive threshold"},
    {"pipeline", KeyScope::Snow, "poll every undecided height, not just the frontier"},
    {"node_counts", KeyScope::Sweep, "sweep axis: comma-separated N values"},
    {"p_blocks", KeyScope::Sweep, "sweep axis: comma-separated p_block values"},
    {"alphas", KeyScope::Sweep, "sweep axis: comma-separated pareto alphas"},
};

inline const ConfigKey* findKey(std::string_view name) {
  for (const auto& k : kConfigKeys)
    if (k.name == name) return &k;
  return nullptr;
}

using RawConfig = std::map<std::string, std::string>;

struct ExperimentSpec {
  RunConfig run;
  std::vector<std::size_t> node_counts;
  std::vector<double> p_blocks;
  std::vector<double> alphas;
  std::string out_dir = "results";
  unsigned workers = 0;
  bool unsafe = false;

  /// One RunConfig per point of the (single) varying sweep axis.
  std::vector<RunConfig> expand() const {
    std::vector<RunConfig> out;
    if (!node_counts.empty()) {
      for (auto n : node_counts) {
        RunConfig c = run;
        c.n_nodes = n;
        out.push_back(c);
      }
    } else if (!p_blocks.empty()) {
      for (auto p : p_blocks) {
        RunConfig c = run;
        c.becp.p_block = p;
        c.snow.p_block = p;
        out.push_back(c);
      }
    } else if (!alphas.empty()) {
      for (auto a : alphas) {
        RunConfig c = run;
        c.latency = LatencyModel::pareto(a, run.latency.x_m);
        out.push_back(c);
      }
    } else {
      out.push_back(run);
    }
    return out;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parseDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end || !std::isfinite(out)) throw ConfigError(key, "not a number: '" + v + "'");
  return out;
}

inline std::uint64_t parseUnsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError(key, "not a non-negative integer: '" + v + "'");
  return out;
}

inline int parseInt(const std::string& key, const std::string& v) {
  const auto u = parseUnsigned(key, v);
  if (u > 1'000'000'000) throw ConfigError(key, "out of range: " + v);
  return static_cast<int>(u);
}

inline bool parseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "not a boolean: '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parseList(const std::string& key, const std::string& v, F&& one) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(one(key, item));
  }
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

}  // namespace detail

/// Reads "key = value" lines. Unknown keys and malformed lines are errors.
inline RawConfig readConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  RawConfig raw;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(std::string_view(line).substr(0, eq));
    if (!findKey(key)) throw ConfigError(key, "unknown key");
    raw[key] = detail::trim(std::string_view(line).substr(eq + 1));
  }
  return raw;
}

/// Resolves raw key/values into a validated spec.
inline ExperimentSpec parseConfig(const RawConfig& raw) {
  using namespace detail;
  for (const auto& [k, v] : raw)
    if (!findKey(k)) throw ConfigError(k, "unknown key");

  ExperimentSpec spec;
  RunConfig& c = spec.run;
  auto get = [&](const char* k) -> std::optional<std::string> {
    auto it = raw.find(k);
    if (it == raw.end()) return std::nullopt;
    return it->second;
  };

  if (auto v = get("protocol")) {
    try {
      c.protocol = parseProtocol(*v);
    } catch (const std::invalid_argument&) {
      throw ConfigError("protocol", "unknown value '" + *v + "'");
    }
  }
  const bool is_becp = c.protocol == Protocol::Becp;
  c.snow = c.protocol == Protocol::Avalanche ? SnowParams::avalanche() : SnowParams::snowman();

  for (const auto& [k, v] : raw) {
    const auto scope = findKey(k)->scope;
    if (scope == KeyScope::Becp && !is_becp)
      throw ConfigError(k, "only applies to protocol becp, not " + toString(c.protocol));
    if (scope == KeyScope::Snow && is_becp) throw ConfigError(k, "only applies to protocols snowman/avalanche");
  }

  if (auto v = get("nodes")) c.n_nodes = parseUnsigned("nodes", *v);
  if (auto v = get("duration")) c.duration = parseDouble("duration", *v);
  if (auto v = get("seed")) c.seed = parseUnsigned("seed", *v);
  if (auto v = get("trials")) c.trials = parseInt("trials", *v);
  if (auto v = get("workers")) spec.workers = static_cast<unsigned>(parseInt("workers", *v));
  if (auto v = get("unsafe")) spec.unsafe = parseBool("unsafe", *v);
  if (auto v = get("stagger")) c.stagger_ticks = parseBool("stagger", *v);
  if (auto v = get("out")) spec.out_dir = *v;

  const std::string latency = get("latency").value_or("uniform");
  const double x_m = get("x_m") ? parseDouble("x_m", *get("x_m")) : 0.05;
  if (latency == "uniform") {
    c.latency = LatencyModel::uniform();
  } else if (latency == "pareto") {
    c.latency = LatencyModel::pareto(get("alpha") ? parseDouble("alpha", *get("alpha")) : 5.0, x_m);
  } else if (latency == "zero") {
    c.latency = LatencyModel::zero();
  } else {
    throw ConfigError("latency", "unknown model '" + latency + "'");
  }
  if (latency != "pareto") {
    if (get("alpha")) throw ConfigError("alpha", "only applies to latency pareto");
    if (get("x_m")) throw ConfigError("x_m", "only applies to latency pareto");
    if (get("alphas")) throw ConfigError("alphas", "only applies to latency pareto");
  }
  if (!(x_m > 0.0)) throw ConfigError("x_m", "must be > 0");

  auto checkAlpha = [&](const std::string& key, double a) {
    if (!(a > 0.0)) throw ConfigError(key, "pareto alpha must be > 0");
    if (!spec.unsafe && (a < 4.0 || a > 8.0))
      throw ConfigError(key, "pareto alpha " + std::to_string(a) + " outside 4..8 (pass --unsafe to allow)");
  };
  if (latency == "pareto") checkAlpha("alpha", c.latency.alpha);

  // Keys shared by both protocol families.
  auto shared = [&](const char* key, double BecpParams::*b, double SnowParams::*s) {
    if (auto v = get(key)) {
      const double x = parseDouble(key, *v);
      c.becp.*b = x;
      c.snow.*s = x;
    }
  };
  shared("p_block", &BecpParams::p_block, &SnowParams::p_block);
  shared("t_block", &BecpParams::t_block, &SnowParams::t_block);
  shared("first_generation", &BecpParams::first_generation, &SnowParams::first_generation);
  shared("cycle", &BecpParams::cycle_time, &SnowParams::cycle_time);
  shared("d1", &BecpParams::d1, &SnowParams::d1);
  if (auto v = get("generate_on_tick")) c.becp.generate_on_tick = c.snow.generate_on_tick = parseBool("generate_on_tick", *v);

  if (auto v = get("epsilon")) c.becp.epsilon = parseDouble("epsilon", *v);
  if (auto v = get("psi")) c.becp.psi_cycles = parseInt("psi", *v);
  if (auto v = get("n_cache")) c.becp.n_cache = parseUnsigned("n_cache", *v);
  if (auto v = get("ncp_sample")) c.becp.ncp_sample = parseUnsigned("ncp_sample", *v);
  if (auto v = get("timeout_lo")) c.becp.timeout_lo = parseDouble("timeout_lo", *v);
  if (auto v = get("timeout_hi")) c.becp.timeout_hi = parseDouble("timeout_hi", *v);
  if (auto v = get("echo_cycles")) c.becp.echo_cycles = parseInt("echo_cycles", *v);
  if (auto v = get("adopt_phase")) c.becp.adopt_phase = parseBool("adopt_phase", *v);
  if (auto v = get("parent_rule")) {
    if (*v == "parent_hash")
      c.becp.parent_rule = ParentRule::ParentHash;
    else if (*v == "creator_literal")
      c.becp.parent_rule = ParentRule::CreatorLiteral;
    else
      throw ConfigError("parent_rule", "unknown value '" + *v + "'");
  }

  if (auto v = get("k")) c.snow.k = parseInt("k", *v);
  if (auto v = get("alpha1")) {
    c.snow.alpha1 = parseInt("alpha1", *v);
    if (!get("alpha1_fraction")) c.snow.alpha1_fraction = 0.0;
  }
  if (auto v = get("alpha1_fraction")) c.snow.alpha1_fraction = parseDouble("alpha1_fraction", *v);
  if (auto v = get("alpha2")) c.snow.alpha2 = parseInt("alpha2", *v);
  if (auto v = get("beta1")) c.snow.beta1 = parseInt("beta1", *v);
  if (auto v = get("beta2")) c.snow.beta2 = parseInt("beta2", *v);
  if (auto v = get("pipeline")) c.snow.pipeline = parseBool("pipeline", *v);

  if (auto v = get("node_counts"))
    spec.node_counts = parseList<std::size_t>("node_counts", *v, [](const std::string& k, const std::string& x) {
      return static_cast<std::size_t>(parseUnsigned(k, x));
    });
  if (auto v = get("p_blocks")) spec.p_blocks = parseList<double>("p_blocks", *v, parseDouble);
  if (auto v = get("alphas")) {
    spec.alphas = parseList<double>("alphas", *v, parseDouble);
    for (double a : spec.alphas) checkAlpha("alphas", a);
  }
  const int axes = !spec.node_counts.empty() + !spec.p_blocks.empty() + !spec.alphas.empty();
  if (axes > 1) throw ConfigError("node_counts", "at most one sweep axis may vary per invocation");

  // Range checks, attributed to the key that set them.
  if (c.n_nodes < 2) throw ConfigError("nodes", "must be >= 2");
  for (auto n : spec.node_counts)
    if (n < 2) throw ConfigError("node_counts", "every N must be >= 2");
  if (!(c.duration > 0.0)) throw ConfigError("duration", "must be > 0");
  if (c.trials < 1) throw ConfigError("trials", "must be >= 1");
  auto prob = [](const char* key, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(key, "must be in [0, 1]");
  };
  prob("p_block", c.becp.p_block);
  for (double p : spec.p_blocks) prob("p_blocks", p);
  if (!(c.becp.t_block > 0.0)) throw ConfigError("t_block", "must be > 0");
  if (!(c.becp.cycle_time > 0.0)) throw ConfigError("cycle", "must be > 0");
  if (c.becp.d1 < 0.0) throw ConfigError("d1", "must be >= 0");
  if (c.becp.first_generation < 0.0) throw ConfigError("first_generation", "must be >= 0");
  if (is_becp) {
    const auto& b = c.becp;
    if (!(b.epsilon > 0.0 && b.epsilon < 1.0)) throw ConfigError("epsilon", "must be in (0, 1)");
    if (b.psi_cycles < 1) throw ConfigError("psi", "must be >= 1");
    if (b.n_cache < 1) throw ConfigError("n_cache", "must be >= 1");
    if (!(b.timeout_lo > 0.0)) throw ConfigError("timeout_lo", "must be > 0");
    if (b.timeout_hi < b.timeout_lo) throw ConfigError("timeout_hi", "must be >= timeout_lo");
  } else {
    const auto& s = c.snow;
    if (s.k < 1) throw ConfigError("k", "must be >= 1");
    if (s.alpha1 < 1 || s.alpha1 > s.k) throw ConfigError("alpha1", "must be in [1, k]");
    if (s.alpha2 < 1 || s.alpha2 > s.k) throw ConfigError("alpha2", "must be in [1, k]");
    if (!(s.alpha1_fraction >= 0.0 && s.alpha1_fraction <= 1.0))
      throw ConfigError("alpha1_fraction", "must be in [0, 1]");
    if (s.beta1 < 1) throw ConfigError("beta1", "must be >= 1");
    if (s.beta2 < 1) throw ConfigError("beta2", "must be >= 1");
  }
  c.validate();
  return spec;
}

/// File values first, then `overrides` (command-line flags) on top.
inline ExperimentSpec parseConfig(const std::optional<std::string>& path, const RawConfig& overrides) {
  RawConfig raw = path ? readConfigFile(*path) : RawConfig{};
  for (const auto& [k, v] : overrides) raw[k] = v;
  return parseConfig(raw);
}

}  // namespace becp

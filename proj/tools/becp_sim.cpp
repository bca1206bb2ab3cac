// becp-sim: run, sweep and verify BECP / Snowman / Avalanche experiments.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "becp/config.hpp"
#include "becp/experiment.hpp"

namespace {

struct Options {
  std::string config_path;
  std::map<std::string, std::string> values;
  bool unsafe = false;
  bool inject_fault = false;
};

std::string flagName(std::string_view key) {
  std::string s(key);
  for (auto& ch : s)
    if (ch == '_') ch = '-';
  return "--" + s;
}

void addConfigFlags(CLI::App* app, Options& opt) {
  app->add_option("-c,--config", opt.config_path, "key = value config file")->check(CLI::ExistingFile);
  for (const auto& key : becp::kConfigKeys) {
    if (key.name == "unsafe") {
      app->add_flag("--unsafe", opt.unsafe, std::string(key.help));
      continue;
    }
    auto* o = app->add_option(flagName(key.name), opt.values[std::string(key.name)], std::string(key.help));
    o->type_name("VALUE");
  }
  app->add_flag("--inject-fault", opt.inject_fault, "corrupt one ledger per configuration (tests exit status)");
}

becp::ExperimentSpec resolve(const Options& opt) {
  becp::RawConfig flags;
  for (const auto& [k, v] : opt.values)
    if (!v.empty()) flags[k] = v;
  if (opt.unsafe) flags["unsafe"] = "true";
  const bool file_sets_out = [&] {
    if (opt.config_path.empty()) return false;
    return becp::readConfigFile(opt.config_path).count("out") > 0;
  }();
  if (!flags.count("out") && !file_sets_out)
    if (const char* env = std::getenv("BECP_OUT_DIR"); env && *env) flags["out"] = env;
  return becp::parseConfig(opt.config_path.empty() ? std::nullopt : std::optional<std::string>(opt.config_path),
                           flags);
}

bool hasSweepAxis(const becp::ExperimentSpec& s) {
  return !s.node_counts.empty() || !s.p_blocks.empty() || !s.alphas.empty();
}

int verify(const becp::ExperimentSpec& spec, bool fault) {
  const auto outcome = becp::executeExperiment(spec, fault);
  for (const auto& c : outcome.configs) {
    for (std::size_t i = 0; i < c.results.size(); ++i) {
      const auto& v = c.correctness.trials[i];
      std::cout << becp::toString(c.config.protocol) << " N=" << c.config.n_nodes << " seed=" << c.results[i].seed
                << " chains=" << (v.chains_valid ? "valid" : "BROKEN")
                << " prefix=" << (v.prefix_consistent ? "consistent" : "DIVERGED") << " blocks=" << v.common_blocks
                << '\n';
    }
    std::cout << c.correctness.summary() << (c.correctness.pass() ? " pass" : " FAIL") << '\n';
  }
  return outcome.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for BECP and Snow-family baselines"};
  app.require_subcommand(1);
  Options run_opt, sweep_opt, verify_opt;
  auto* run = app.add_subcommand("run", "run one configuration for --trials seeds");
  auto* sweep = app.add_subcommand("sweep", "run one sweep axis (--node-counts, --p-blocks or --alphas)");
  auto* ver = app.add_subcommand("verify", "run trials and report only the correctness test");
  addConfigFlags(run, run_opt);
  addConfigFlags(sweep, sweep_opt);
  addConfigFlags(ver, verify_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto spec = resolve(run_opt);
      if (hasSweepAxis(spec)) throw becp::ConfigError("node_counts", "sweep axes need the sweep subcommand");
      return becp::runExperiment(spec, run_opt.inject_fault, &std::cout);
    }
    if (*sweep) {
      const auto spec = resolve(sweep_opt);
      if (!hasSweepAxis(spec)) throw becp::ConfigError("node_counts", "sweep needs node_counts, p_blocks or alphas");
      return becp::runExperiment(spec, sweep_opt.inject_fault, &std::cout);
    }
    return verify(resolve(verify_opt), verify_opt.inject_fault);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

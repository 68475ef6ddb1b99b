// Command-line front end: run, sweep, sinr-cdf, switch.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "coexist/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<std::string> algo;
  std::optional<int> tc;
  std::optional<int> tc_before;
  std::optional<int> tc_after;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON configuration file")->required();
  cmd->add_option("--out", o.out, "output directory")->required();
}

int execute(coexist::SimConfig cfg, const Options& o) {
  const auto result = coexist::run_scenario(cfg, o.out);
  std::cout << coexist::to_string(cfg.run.scenario) << ": wrote " << result.files.size() << " files to "
            << o.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  using coexist::ScenarioKind;
  CLI::App app{"Radar waveform selection under cellular interference"};
  app.require_subcommand(1);
  Options o;

  auto* run = app.add_subcommand("run", "single configuration, one trace per seed");
  add_common(run, o);
  run->add_option("--seed", o.seed, "run only this seed");
  run->add_option("--steps", o.steps, "number of time steps")->check(CLI::PositiveNumber);
  run->add_option("--algo", o.algo, "thompson | ucb1 | eps_greedy | fixed_full_band");
  run->add_option("--tc", o.tc, "coherence time in steps")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "coherence-time sweep over algos and seeds");
  add_common(sweep, o);

  auto* cdf = app.add_subcommand("sinr-cdf", "SINR samples per algo for CDF plots");
  add_common(cdf, o);

  auto* sw = app.add_subcommand("switch", "coherence time changes at the midpoint");
  add_common(sw, o);
  sw->add_option("--tc-before", o.tc_before, "coherence time before the switch")->check(CLI::PositiveNumber);
  sw->add_option("--tc-after", o.tc_after, "coherence time after the switch")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    auto cfg = coexist::load_config(o.config);
    if (o.steps) cfg.run.steps = *o.steps;
    if (run->parsed()) {
      cfg.run.scenario = ScenarioKind::single_run;
      if (o.seed) cfg.run.seeds = {*o.seed};
      if (o.algo) cfg.agent.kind = coexist::parse_agent_kind(*o.algo);
      if (o.tc) cfg.channel.coherence_time = *o.tc;
    } else if (sweep->parsed()) {
      cfg.run.scenario = ScenarioKind::coherence_sweep;
    } else if (cdf->parsed()) {
      cfg.run.scenario = ScenarioKind::sinr_cdf;
    } else {
      cfg.run.scenario = ScenarioKind::coherence_switch;
      if (o.tc_before) cfg.run.tc_before = *o.tc_before;
      if (o.tc_after) cfg.run.tc_after = *o.tc_after;
    }
    return execute(std::move(cfg), o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "femtoho/cli.hpp"

namespace {

femtoho::PolicyKind to_policy(const std::string& name) {
  auto p = femtoho::parse_policy(name);
  if (!p) throw CLI::ValidationError("--policy", "unknown policy '" + name + "'");
  return *p;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace femtoho;
  CLI::App app{"Group-handover admission control simulator for mobile femtocells"};
  app.require_subcommand(1);

  std::optional<std::string> config, trace, loads;
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;
  std::optional<double> duration;
  std::string out;
  unsigned jobs = 0;

  auto* compare = app.add_subcommand("compare", "Sweep policies over load multipliers and seeds");
  compare->add_option("--config", config, "Scenario file (defaults when omitted)");
  compare->add_option("--policy", policies, "Policy to compare (repeatable)")->required();
  compare->add_option("--loads", loads, "Comma-separated load multipliers")->required();
  compare->add_option("--seed", seeds, "Seed (repeatable)")->required();
  compare->add_option("--out", out, "Per-run CSV path; summary goes to <stem>_summary.csv")->required();
  compare->add_option("--duration", duration, "Override simulated seconds");
  compare->add_option("--debug-trace", trace, "Event trace of the first run");
  compare->add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)");

  std::optional<std::string> run_policy;
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Single run; prints one CSV row");
  run->add_option("--config", config, "Scenario file (defaults when omitted)");
  run->add_option("--policy", run_policy, "Override the configured policy");
  run->add_option("--seed", run_seed, "Override the configured seed");
  run->add_option("--duration", duration, "Override simulated seconds");
  run->add_option("--debug-trace", trace, "Write the event trace here");

  auto* render = app.add_subcommand("render-config", "Print the canonical form of a scenario");
  render->add_option("--config", config, "Scenario file (defaults when omitted)");

  auto* oracle = app.add_subcommand("oracle", "Tabulate analytical oracle values");
  oracle->require_subcommand(1);
  std::string channels = "1..24", erlang_loads;
  auto* erlang = oracle->add_subcommand("erlang", "Erlang-B blocking table");
  erlang->add_option("--channels", channels, "Channel grid, e.g. 23, 1..24 or 1,5,10");
  erlang->add_option("--load", erlang_loads, "Comma-separated offered loads (erlangs)")->required();
  std::string ctmc_spec;
  auto* ctmc = oracle->add_subcommand("ctmc", "Multi-class CTMC per-class blocking");
  ctmc->add_option("--spec", ctmc_spec, "CTMC spec file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::ok : cli::usage_error;
  }

  try {
    auto config_path = config ? std::optional<std::filesystem::path>(*config) : std::nullopt;
    auto trace_path = trace ? std::optional<std::filesystem::path>(*trace) : std::nullopt;
    if (*compare) {
      cli::ExperimentSpec spec;
      spec.config_path = config_path;
      for (const auto& p : policies) spec.policies.push_back(to_policy(p));
      spec.loads = cli::parse_real_list(*loads);
      spec.seeds = seeds;
      spec.output = out;
      spec.duration = duration;
      spec.debug_trace = trace_path;
      spec.jobs = jobs;
      return cli::cmd_compare(spec);
    }
    if (*run) {
      std::optional<PolicyKind> p;
      if (run_policy) p = to_policy(*run_policy);
      return cli::cmd_run(config_path, p, run_seed, duration, trace_path, std::cout);
    }
    if (*render) {
      std::cout << render_config(cli::load_config(config_path));
      return cli::ok;
    }
    if (*erlang) return cli::cmd_oracle_erlang(channels, erlang_loads, std::cout);
    if (*ctmc) return cli::cmd_oracle_ctmc(ctmc_spec, std::cout);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::usage_error;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::usage_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::runtime_error;
  }
  return cli::usage_error;
}

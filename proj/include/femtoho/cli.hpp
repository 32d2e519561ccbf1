#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "femtoho/config.hpp"
#include "femtoho/oracle.hpp"
#include "femtoho/sweep.hpp"

namespace femtoho::cli {

enum ExitCode : int { ok = 0, usage_error = 1, runtime_error = 2 };

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kRunCsvHeader =
    "policy,load_multiplier,seed,handover_drop_prob,new_block_prob,utilization,"
    "mean_reserved_kbps,degradation_events";

inline constexpr std::string_view kSummaryCsvHeader =
    "policy,load_multiplier,runs,handover_drop_prob_mean,handover_drop_prob_ci95,"
    "new_block_prob_mean,new_block_prob_ci95,utilization_mean,utilization_ci95,"
    "mean_reserved_kbps_mean,mean_reserved_kbps_ci95,degradation_events_mean,"
    "degradation_events_ci95";

// Reals use the shortest representation that round-trips.
inline std::string format_run_row(PolicyKind policy, double load_multiplier, std::uint64_t seed,
                                  const MetricsReport& r) {
  return fmt::format("{},{},{},{},{},{},{},{}", to_string(policy), load_multiplier, seed,
                     r.handover_drop_prob, r.new_block_prob, r.utilization, r.mean_reserved_kbps,
                     r.degradation_events);
}

inline std::string format_summary_row(const AggregateRow& a) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}", to_string(a.policy),
                     a.load_multiplier, a.runs, a.handover_drop_prob.mean, a.handover_drop_prob.ci95,
                     a.new_block_prob.mean, a.new_block_prob.ci95, a.utilization.mean,
                     a.utilization.ci95, a.mean_reserved_kbps.mean, a.mean_reserved_kbps.ci95,
                     a.degradation_events.mean, a.degradation_events.ci95);
}

inline void write_runs_csv(std::ostream& out, const SweepTable& table) {
  out << kRunCsvHeader << '\n';
  for (const auto& row : table.rows)
    out << format_run_row(row.policy, row.load_multiplier, row.seed, row.report) << '\n';
}

inline void write_summary_csv(std::ostream& out, const SweepTable& table) {
  out << kSummaryCsvHeader << '\n';
  for (const auto& a : table.aggregates) out << format_summary_row(a) << '\n';
}

/// results.csv -> results_summary.csv; other names get the suffix appended.
inline std::filesystem::path summary_path_for(const std::filesystem::path& out) {
  std::filesystem::path p = out;
  if (p.extension() == ".csv") {
    p.replace_extension();
    return p.string() + "_summary.csv";
  }
  return p.string() + "_summary.csv";
}

struct ExperimentSpec {
  std::optional<std::filesystem::path> config_path;  // defaults when absent
  std::vector<PolicyKind> policies;
  std::vector<double> loads;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output;
  std::optional<Seconds> duration;
  std::optional<std::filesystem::path> debug_trace;
  unsigned jobs = 0;

  void validate() const {
    if (policies.empty()) throw ConfigError("at least one policy is required");
    if (loads.empty()) throw ConfigError("at least one load multiplier is required");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    for (double l : loads)
      if (!(l >= 0.0)) throw ConfigError("load multipliers must be non-negative");
  }
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig load_config(const std::optional<std::filesystem::path>& path) {
  return path ? parse_config(read_file(*path)) : parse_config("");
}

/// Comma-separated reals, e.g. "0.5,1,1.5".
inline std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string item(detail::trim(text.substr(pos, comma - pos)));
    IniEntry e{0, "", 0, "list", item};
    if (item.empty()) throw ConfigError("empty item in list '" + std::string(text) + "'");
    out.push_back(parse_real(e));
    pos = comma + 1;
    if (comma == text.size()) break;
  }
  return out;
}

/// "23", "1..24" or "1,5,10" (items may themselves be ranges).
inline std::vector<int> parse_channel_grid(std::string_view text) {
  std::vector<int> out;
  std::size_t pos = 0;
  auto to_int = [&](std::string_view s) {
    std::string item(detail::trim(s));
    IniEntry e{0, "", 0, "channels", item};
    const auto v = parse_unsigned(e);
    if (v < 1 || v > 1'000'000) throw ConfigError("channel count out of range: " + item);
    return static_cast<int>(v);
  };
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view item = text.substr(pos, comma - pos);
    if (auto dots = item.find(".."); dots != std::string_view::npos) {
      int lo = to_int(item.substr(0, dots));
      int hi = to_int(item.substr(dots + 2));
      if (hi < lo) throw ConfigError("empty channel range '" + std::string(item) + "'");
      for (int c = lo; c <= hi; ++c) out.push_back(c);
    } else {
      out.push_back(to_int(item));
    }
    pos = comma + 1;
    if (comma == text.size()) break;
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

/// Runs the sweep and writes the per-run and summary CSVs.  All writes
/// happen after every run has finished.
inline int cmd_compare(const ExperimentSpec& spec, std::ostream& err = std::cerr) {
  try {
    spec.validate();
    ScenarioConfig base = load_config(spec.config_path);
    if (spec.duration) {
      base.sim_duration = *spec.duration;
      base.validate();
    }
    // Fail on an unwritable destination before spending time on runs.
    write_text(spec.output, "");
    SweepTable table = sweep(base, spec.loads, spec.seeds, spec.policies, spec.jobs);

    if (spec.debug_trace) {
      ScenarioConfig first = with_load_multiplier(base, spec.loads.front());
      first.policy = spec.policies.front();
      first.seed = spec.seeds.front();
      std::ostringstream trace;
      Simulation sim(first);
      sim.set_trace(&trace);
      sim.run();
      write_text(*spec.debug_trace, trace.str());
    }

    std::ostringstream runs, summary;
    write_runs_csv(runs, table);
    write_summary_csv(summary, table);
    write_text(spec.output, runs.str());
    write_text(summary_path_for(spec.output), summary.str());
    return ok;
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return usage_error;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return runtime_error;
  }
}

/// Single run; prints the report as one CSV row (same schema as compare).
inline int cmd_run(const std::optional<std::filesystem::path>& config_path,
                   std::optional<PolicyKind> policy, std::optional<std::uint64_t> seed,
                   std::optional<Seconds> duration,
                   const std::optional<std::filesystem::path>& debug_trace, std::ostream& out,
                   std::ostream& err = std::cerr) {
  try {
    ScenarioConfig cfg = load_config(config_path);
    if (policy) cfg.policy = *policy;
    if (seed) cfg.seed = *seed;
    if (duration) cfg.sim_duration = *duration;
    cfg.validate();
    Simulation sim(cfg);
    std::ostringstream trace;
    if (debug_trace) sim.set_trace(&trace);
    MetricsReport r = sim.run();
    if (debug_trace) write_text(*debug_trace, trace.str());
    out << kRunCsvHeader << '\n' << format_run_row(cfg.policy, 1.0, cfg.seed, r) << '\n';
    if (cfg.debug_checks) {
      fmt::print(err, "events: {}  invariant violations: {}\n", r.events_executed,
                 r.invariant_violations);
      for (const auto& v : r.first_violations) fmt::print(err, "  {}\n", v);
      if (r.invariant_violations) return runtime_error;
    }
    return ok;
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return usage_error;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return runtime_error;
  }
}

inline int cmd_oracle_erlang(std::string_view channels, std::string_view loads, std::ostream& out,
                             std::ostream& err = std::cerr) {
  try {
    const auto grid = parse_channel_grid(channels);
    const auto load_list = parse_real_list(loads);
    out << "channels,offered_load,blocking\n";
    for (double a : load_list)
      for (int c : grid) out << fmt::format("{},{},{}\n", c, a, oracle::erlang_b(c, a));
    return ok;
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return usage_error;
  }
}

// CTMC spec file: top-level `capacity = N` and `rule = complete_sharing|guard`,
// then one [class] section per class with arrival_rate, service_rate,
// demand and optional guard.
inline oracle::CtmcSpec parse_ctmc_spec(std::string_view text) {
  const IniDocument doc = read_ini(text, {"class"});
  oracle::CtmcSpec spec;
  bool have_capacity = false;
  std::map<std::size_t, oracle::CtmcClass> classes;
  std::map<std::size_t, std::set<std::string>> keys;
  for (std::size_t i = 0; i < doc.sections.size(); ++i)
    if (doc.sections[i].name == "class") classes[i];
  for (const IniEntry& e : doc.entries) {
    if (e.section.empty()) {
      if (e.key == "capacity") {
        spec.capacity = static_cast<int>(parse_unsigned(e));
        have_capacity = true;
      } else if (e.key == "rule") {
        if (e.value == "complete_sharing") spec.rule = oracle::AdmissionRule::complete_sharing;
        else if (e.value == "guard") spec.rule = oracle::AdmissionRule::guard;
        else throw ParseError(e.line, e.key, "expected complete_sharing or guard");
      } else {
        throw ParseError(e.line, e.key, "unknown key");
      }
      continue;
    }
    auto& c = classes[e.section_index];
    keys[e.section_index].insert(e.key);
    if (e.key == "arrival_rate") c.arrival_rate = parse_real(e);
    else if (e.key == "service_rate") c.service_rate = parse_real(e);
    else if (e.key == "demand") c.demand = static_cast<int>(parse_unsigned(e));
    else if (e.key == "guard") c.guard = static_cast<int>(parse_unsigned(e));
    else throw ParseError(e.line, e.key, "unknown key in [class]");
  }
  if (!have_capacity) throw ParseError(0, "capacity", "missing required key");
  for (const auto& [index, c] : classes) {
    for (const char* k : {"arrival_rate", "service_rate", "demand"})
      if (!keys[index].count(k)) throw ParseError(doc.sections[index].line, k, "missing required key in [class]");
    spec.classes.push_back(c);
  }
  if (spec.classes.empty()) throw ParseError(0, "class", "missing required section");
  return spec;
}

inline int cmd_oracle_ctmc(const std::filesystem::path& spec_path, std::ostream& out,
                           std::ostream& err = std::cerr) {
  try {
    const auto spec = parse_ctmc_spec(read_file(spec_path));
    const auto result = oracle::ctmc_blocking(spec);
    out << "class,demand,arrival_rate,service_rate,blocking\n";
    for (std::size_t i = 0; i < spec.classes.size(); ++i) {
      const auto& c = spec.classes[i];
      out << fmt::format("{},{},{},{},{}\n", i, c.demand, c.arrival_rate, c.service_rate,
                         result.blocking[i]);
    }
    return ok;
  } catch (const oracle::StateSpaceTooLarge& e) {
    fmt::print(err, "refused: {}\n", e.what());
    return runtime_error;
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return usage_error;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return runtime_error;
  }
}

}  // namespace femtoho::cli

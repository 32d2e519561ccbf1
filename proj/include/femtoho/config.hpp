#pragma once

// Scenario file grammar
//
//   file    := { line }
//   line    := blank | comment | section | entry
//   comment := '#' anything
//   section := '[' name ']'        name in {run, policy, traffic, class, mobility}
//   entry   := key '=' value       optional trailing '# comment'
//
// Keys before the first section header are accepted and resolved by name.
// A key inside a section must belong to that section.  Each [class]
// section starts a new service class; when any is present they replace
// the default two-class mix and the traffic-level beta_kbps / xi /
// adaptive_mix keys are rejected.  Every key is optional; an empty file
// yields the defaults listed in kKeys.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "femtoho/engine.hpp"

namespace femtoho {

class ParseError : public ConfigError {
public:
  ParseError(std::size_t line, std::string key, const std::string& what)
      : ConfigError(fmt::format("line {}: {}{}", line, key.empty() ? "" : "'" + key + "': ", what)),
        line_(line),
        key_(std::move(key)) {}
  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }

private:
  std::size_t line_;
  std::string key_;
};

struct IniEntry {
  std::size_t line = 0;
  std::string section;  // empty before the first header
  std::size_t section_index = 0;  // ordinal of the enclosing header
  std::string key;
  std::string value;
};

struct IniSection {
  std::size_t line = 0;
  std::string name;
};

struct IniDocument {
  std::vector<IniSection> sections;  // index 0 is the implicit top level
  std::vector<IniEntry> entries;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline IniDocument read_ini(std::string_view text, const std::set<std::string>& section_names) {
  IniDocument doc;
  doc.sections.push_back({0, ""});
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "", "unterminated section header");
      std::string name(detail::trim(line.substr(1, line.size() - 2)));
      if (!section_names.count(name)) throw ParseError(line_no, name, "unknown section");
      doc.sections.push_back({line_no, name});
    } else {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError(line_no, "", "expected 'key = value'");
      std::string key(detail::trim(line.substr(0, eq)));
      std::string value(detail::trim(line.substr(eq + 1)));
      if (key.empty()) throw ParseError(line_no, "", "missing key");
      if (value.empty()) throw ParseError(line_no, key, "missing value");
      doc.entries.push_back(
          {line_no, doc.sections.back().name, doc.sections.size() - 1, key, value});
    }
    if (end == text.size()) break;
  }
  return doc;
}

inline double parse_real(const IniEntry& e) {
  double v = 0.0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ParseError(e.line, e.key, "expected a number, got '" + e.value + "'");
  return v;
}

inline std::uint64_t parse_unsigned(const IniEntry& e) {
  std::uint64_t v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ParseError(e.line, e.key, "expected a non-negative integer, got '" + e.value + "'");
  return v;
}

inline bool parse_bool(const IniEntry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ParseError(e.line, e.key, "expected true or false, got '" + e.value + "'");
}

namespace detail {

struct KeyInfo {
  const char* section;
  const char* key;
};

// Home section of every scenario key.  Defaults live in ScenarioConfig.
inline constexpr KeyInfo kKeys[] = {
    {"run", "seed"},
    {"run", "sim_duration_s"},
    {"run", "warmup_s"},
    {"run", "debug_checks"},
    {"policy", "policy"},
    {"policy", "capacity_kbps"},
    {"policy", "reservation_T_s"},
    {"traffic", "new_call_rate"},
    {"traffic", "macro_handover_rate"},
    {"traffic", "femto_handover_rate"},
    {"traffic", "ho_ratio"},
    {"traffic", "macro_to_femto_rate"},
    {"traffic", "mean_duration_s"},
    {"traffic", "mean_dwell_s"},
    {"traffic", "beta_kbps"},
    {"traffic", "xi"},
    {"traffic", "adaptive_mix"},
    {"mobility", "macrocells"},
    {"mobility", "vehicles"},
    {"mobility", "stop_period_s"},
    {"mobility", "lookahead_s"},
    {"mobility", "alight_fraction"},
    {"mobility", "board_mean"},
    {"mobility", "onboard_call_rate"},
    {"mobility", "station_pattern"},
    {"mobility", "backhaul_all_or_nothing"},
};

inline const char* home_section(std::string_view key) {
  for (const auto& k : kKeys)
    if (key == k.key) return k.section;
  return nullptr;
}

inline void require_range(const IniEntry& e, double v, double lo, double hi, bool lo_open = false) {
  if (lo_open ? !(v > lo) : !(v >= lo))
    throw ParseError(e.line, e.key, fmt::format("value {} out of range", e.value));
  if (!(v <= hi)) throw ParseError(e.line, e.key, fmt::format("value {} out of range", e.value));
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace detail

/// Parses and validates a scenario.  Errors name the line and key.
inline ScenarioConfig parse_config(std::string_view text) {
  using detail::kInf;
  using detail::require_range;
  const IniDocument doc = read_ini(text, {"run", "policy", "traffic", "class", "mobility"});

  ScenarioConfig cfg;
  std::set<std::string> seen;
  bool femto_rate_given = false;
  std::optional<double> ho_ratio;
  std::size_t ho_ratio_line = 0;
  std::optional<std::size_t> traffic_class_key_line;
  double beta = 256.0, xi = 0.5, adaptive_mix = 0.5;

  struct ClassDraft {
    std::size_t line = 0;
    std::optional<double> beta, xi, weight;
    std::optional<bool> adaptive;
  };
  std::map<std::size_t, ClassDraft> class_sections;
  for (std::size_t i = 0; i < doc.sections.size(); ++i)
    if (doc.sections[i].name == "class") class_sections[i].line = doc.sections[i].line;

  for (const IniEntry& e : doc.entries) {
    if (e.section == "class") {
      ClassDraft& c = class_sections[e.section_index];
      auto once = [&](auto& slot, auto value) {
        if (slot) throw ParseError(e.line, e.key, "duplicate key in [class]");
        slot = value;
      };
      if (e.key == "beta_kbps") {
        double v = parse_real(e);
        require_range(e, v, 0.0, kInf, true);
        once(c.beta, v);
      } else if (e.key == "xi") {
        double v = parse_real(e);
        require_range(e, v, 0.0, 1.0);
        once(c.xi, v);
      } else if (e.key == "weight") {
        double v = parse_real(e);
        require_range(e, v, 0.0, 1.0);
        once(c.weight, v);
      } else if (e.key == "adaptive") {
        once(c.adaptive, parse_bool(e));
      } else {
        throw ParseError(e.line, e.key, "unknown key in [class]");
      }
      continue;
    }

    const char* home = detail::home_section(e.key);
    if (!home) throw ParseError(e.line, e.key, "unknown key");
    if (!e.section.empty() && e.section != home)
      throw ParseError(e.line, e.key, fmt::format("key belongs in [{}], not [{}]", home, e.section));
    if (!seen.insert(e.key).second) throw ParseError(e.line, e.key, "duplicate key");

    const std::string& k = e.key;
    auto real = [&](double lo, double hi, bool lo_open = false) {
      double v = parse_real(e);
      require_range(e, v, lo, hi, lo_open);
      return v;
    };
    auto count = [&](std::uint64_t lo, std::uint64_t hi) {
      std::uint64_t v = parse_unsigned(e);
      if (v < lo || v > hi) throw ParseError(e.line, e.key, fmt::format("value {} out of range", e.value));
      return static_cast<int>(v);
    };

    if (k == "seed") cfg.seed = parse_unsigned(e);
    else if (k == "sim_duration_s") cfg.sim_duration = real(0.0, kInf, true);
    else if (k == "warmup_s") cfg.warmup = real(0.0, kInf);
    else if (k == "debug_checks") cfg.debug_checks = parse_bool(e);
    else if (k == "policy") {
      auto p = parse_policy(e.value);
      if (!p) throw ParseError(e.line, k, "unknown policy '" + e.value + "'");
      cfg.policy = *p;
    } else if (k == "capacity_kbps") cfg.capacity = real(0.0, kInf, true);
    else if (k == "reservation_T_s") cfg.reservation_time = real(0.0, kInf);
    else if (k == "new_call_rate") cfg.traffic.new_call_rate = real(0.0, kInf);
    else if (k == "macro_handover_rate") cfg.traffic.macro_handover_rate = real(0.0, kInf);
    else if (k == "femto_handover_rate") {
      cfg.traffic.femto_handover_rate = real(0.0, kInf);
      femto_rate_given = true;
    } else if (k == "ho_ratio") {
      ho_ratio = real(0.0, kInf, true);
      ho_ratio_line = e.line;
    }
    else if (k == "macro_to_femto_rate") cfg.traffic.macro_to_femto_rate = real(0.0, kInf);
    else if (k == "mean_duration_s") cfg.traffic.mean_call_duration = real(0.0, kInf, true);
    else if (k == "mean_dwell_s") cfg.traffic.mean_dwell_time = real(0.0, kInf, true);
    else if (k == "beta_kbps" || k == "xi" || k == "adaptive_mix") {
      if (k == "beta_kbps") beta = real(0.0, kInf, true);
      else if (k == "xi") xi = real(0.0, 1.0);
      else adaptive_mix = real(0.0, 1.0);
      if (!traffic_class_key_line) traffic_class_key_line = e.line;
    } else if (k == "macrocells") cfg.mobility.macrocells = count(1, 1024);
    else if (k == "vehicles") cfg.mobility.vehicles = count(0, 4096);
    else if (k == "stop_period_s") cfg.mobility.stop_period = real(0.0, kInf, true);
    else if (k == "lookahead_s") cfg.mobility.lookahead = real(0.0, kInf);
    else if (k == "alight_fraction") cfg.mobility.alight_fraction = real(0.0, 1.0);
    else if (k == "board_mean") cfg.mobility.board_mean = real(0.0, kInf);
    else if (k == "onboard_call_rate") cfg.mobility.onboard_call_rate = real(0.0, kInf);
    else if (k == "station_pattern") {
      if (e.value == "alternate") cfg.mobility.pattern = StationPattern::alternate;
      else if (e.value == "same_bs") cfg.mobility.pattern = StationPattern::same_bs;
      else if (e.value == "cross_bs") cfg.mobility.pattern = StationPattern::cross_bs;
      else throw ParseError(e.line, k, "expected alternate, same_bs or cross_bs");
    } else if (k == "backhaul_all_or_nothing") cfg.mobility.backhaul_all_or_nothing = parse_bool(e);
  }

  if (femto_rate_given && ho_ratio)
    throw ParseError(ho_ratio_line, "ho_ratio", "give either ho_ratio or femto_handover_rate, not both");
  if (ho_ratio) cfg.traffic.femto_handover_rate = cfg.traffic.macro_handover_rate / *ho_ratio;

  if (class_sections.empty()) {
    cfg.traffic.classes = default_classes(beta, xi, adaptive_mix);
  } else {
    if (traffic_class_key_line)
      throw ParseError(*traffic_class_key_line, "",
                       "beta_kbps/xi/adaptive_mix cannot be combined with [class] sections");
    cfg.traffic.classes.clear();
    int id = 0;
    for (const auto& [index, c] : class_sections) {
      if (!c.beta) throw ParseError(c.line, "beta_kbps", "missing required key in [class]");
      if (!c.weight) throw ParseError(c.line, "weight", "missing required key in [class]");
      const double cxi = c.xi.value_or(0.0);
      const bool adaptive = c.adaptive.value_or(cxi > 0.0);
      if (!adaptive && cxi != 0.0)
        throw ParseError(c.line, "xi", "non-adaptive class must have xi = 0");
      cfg.traffic.classes.push_back({ServiceClass{id++, *c.beta, adaptive, cxi}, *c.weight});
    }
  }
  cfg.validate();
  return cfg;
}

/// Canonical text form; parse_config(render_config(c)) == c.
inline std::string render_config(const ScenarioConfig& c) {
  std::string out;
  auto line = [&](std::string_view key, const auto& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  out += "[run]\n";
  line("seed", c.seed);
  line("sim_duration_s", c.sim_duration);
  line("warmup_s", c.warmup);
  line("debug_checks", c.debug_checks ? "true" : "false");
  out += "\n[policy]\n";
  line("policy", to_string(c.policy));
  line("capacity_kbps", c.capacity);
  line("reservation_T_s", c.reservation_time);
  out += "\n[traffic]\n";
  line("new_call_rate", c.traffic.new_call_rate);
  line("macro_handover_rate", c.traffic.macro_handover_rate);
  line("femto_handover_rate", c.traffic.femto_handover_rate);
  line("macro_to_femto_rate", c.traffic.macro_to_femto_rate);
  line("mean_duration_s", c.traffic.mean_call_duration);
  line("mean_dwell_s", c.traffic.mean_dwell_time);
  for (const auto& wc : c.traffic.classes) {
    out += "\n[class]\n";
    line("beta_kbps", wc.service.beta_requested);
    line("adaptive", wc.service.adaptive ? "true" : "false");
    line("xi", wc.service.xi);
    line("weight", wc.weight);
  }
  out += "\n[mobility]\n";
  line("macrocells", c.mobility.macrocells);
  line("vehicles", c.mobility.vehicles);
  line("stop_period_s", c.mobility.stop_period);
  line("lookahead_s", c.mobility.lookahead);
  line("alight_fraction", c.mobility.alight_fraction);
  line("board_mean", c.mobility.board_mean);
  line("onboard_call_rate", c.mobility.onboard_call_rate);
  line("station_pattern", to_string(c.mobility.pattern));
  line("backhaul_all_or_nothing", c.mobility.backhaul_all_or_nothing ? "true" : "false");
  return out;
}

}  // namespace femtoho

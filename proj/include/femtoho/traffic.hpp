#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "femtoho/core.hpp"
#include "femtoho/random.hpp"

namespace femtoho {

/// A traffic class.  Adaptive classes may be degraded by up to `xi` of
/// their requested bandwidth while admitted.
struct ServiceClass {
  int class_id = 0;
  Kbps beta_requested = 256.0;
  bool adaptive = false;
  double xi = 0.0;

  /// Lowest allocation an admitted call of this class may be held at.
  Kbps floor() const { return (1.0 - xi) * beta_requested; }

  void validate() const {
    if (!(beta_requested > 0.0) || !std::isfinite(beta_requested))
      throw ConfigError("class " + std::to_string(class_id) +
                        ": requested bandwidth must be positive");
    if (!(xi >= 0.0 && xi <= 1.0))
      throw ConfigError("class " + std::to_string(class_id) +
                        ": degradable fraction must lie in [0, 1]");
    if (!adaptive && xi != 0.0)
      throw ConfigError("class " + std::to_string(class_id) +
                        ": non-adaptive class must have xi = 0");
  }

  bool operator==(const ServiceClass&) const = default;
};

enum class CallOrigin { macro_new, macro_handover_in, femto_onboard, femto_alighted };

inline std::string_view to_string(CallOrigin o) {
  switch (o) {
    case CallOrigin::macro_new: return "macro_new";
    case CallOrigin::macro_handover_in: return "macro_handover_in";
    case CallOrigin::femto_onboard: return "femto_onboard";
    case CallOrigin::femto_alighted: return "femto_alighted";
  }
  return "?";
}

struct Call {
  CallId id = 0;
  ServiceClass service;
  Kbps alloc = 0.0;
  CallOrigin origin = CallOrigin::macro_new;
  Seconds start_time = 0.0;
  Seconds scheduled_end = 0.0;

  bool operator==(const Call&) const = default;
};

struct WeightedClass {
  ServiceClass service;
  double weight = 1.0;

  bool operator==(const WeightedClass&) const = default;
};

/// Arrival processes and holding-time parameters.  Every rate is per
/// macrocell, in calls per second.
struct TrafficConfig {
  std::vector<WeightedClass> classes;
  double new_call_rate = 0.0;
  double macro_handover_rate = 0.0;
  double femto_handover_rate = 0.0;
  // Individual macro-to-femtocell handovers out of a macrocell.
  double macro_to_femto_rate = 0.0;
  Seconds mean_call_duration = 120.0;
  Seconds mean_dwell_time = 540.0;

  void validate() const {
    if (classes.empty()) throw ConfigError("traffic: at least one service class is required");
    double total = 0.0;
    for (const auto& wc : classes) {
      wc.service.validate();
      if (!(wc.weight >= 0.0)) throw ConfigError("traffic: class weights must be non-negative");
      total += wc.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("traffic: class weights must sum to 1");
    for (double r : {new_call_rate, macro_handover_rate, femto_handover_rate, macro_to_femto_rate})
      if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("traffic: rates must be non-negative");
    if (!(mean_call_duration > 0.0) || !(mean_dwell_time > 0.0))
      throw ConfigError("traffic: mean call duration and dwell time must be positive");
  }

  bool operator==(const TrafficConfig&) const = default;
};

inline Seconds sample_exponential(Seconds mean, RandomStream& rng) {
  if (!(mean > 0.0)) throw ConfigError("exponential mean must be positive");
  // 1 - U lies in (0, 1], so the logarithm is finite.
  return -mean * std::log(1.0 - rng.uniform());
}

/// Picks a class with probability proportional to its mix weight.
inline const ServiceClass& draw_class(const TrafficConfig& config, RandomStream& rng) {
  if (config.classes.empty()) throw ConfigError("traffic: empty class list");
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& wc : config.classes) {
    acc += wc.weight;
    if (u < acc) return wc.service;
  }
  // Rounding left u above the running sum; take the last class with weight.
  for (auto it = config.classes.rbegin(); it != config.classes.rend(); ++it)
    if (it->weight > 0.0) return it->service;
  return config.classes.back().service;
}

class CallIdSource {
public:
  CallId next() { return ++last_; }
  CallId last() const { return last_; }

private:
  CallId last_ = 0;
};

/// Fresh call with a sampled class and duration, allocated at full rate.
inline Call spawn_call(const TrafficConfig& config, CallOrigin origin, Seconds now,
                       RandomStream& rng, CallIdSource& ids) {
  if (now < 0.0) throw ConfigError("spawn_call: negative time");
  Call call;
  call.id = ids.next();
  call.service = draw_class(config, rng);
  call.alloc = call.service.beta_requested;
  call.origin = origin;
  call.start_time = now;
  Seconds duration = sample_exponential(config.mean_call_duration, rng);
  // A zero draw would violate scheduled_end > start_time.
  if (!(duration > 0.0)) duration = std::nextafter(0.0, 1.0);
  call.scheduled_end = now + duration;
  if (!(call.scheduled_end > now)) call.scheduled_end = std::nextafter(now, now + 1.0);
  return call;
}

}  // namespace femtoho

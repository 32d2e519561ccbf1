#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "femtoho/capacity_ledger.hpp"
#include "femtoho/core.hpp"
#include "femtoho/mobility.hpp"
#include "femtoho/random.hpp"
#include "femtoho/traffic.hpp"

namespace femtoho {

enum class StationPattern { alternate, same_bs, cross_bs };

inline std::string_view to_string(StationPattern p) {
  switch (p) {
    case StationPattern::alternate: return "alternate";
    case StationPattern::same_bs: return "same_bs";
    case StationPattern::cross_bs: return "cross_bs";
  }
  return "?";
}

struct MobilityConfig {
  int macrocells = 3;
  int vehicles = 3;
  Seconds stop_period = 60.0;
  Seconds lookahead = 10.0;
  double alight_fraction = 0.5;
  double board_mean = 3.0;
  // New calls started by passengers while onboard, per vehicle.
  double onboard_call_rate = 0.01;
  StationPattern pattern = StationPattern::alternate;
  bool backhaul_all_or_nothing = false;

  bool operator==(const MobilityConfig&) const = default;
};

/// Two classes with equal requested rate, one adaptive, mixed by weight.
inline std::vector<WeightedClass> default_classes(Kbps beta = 256.0, double xi = 0.5,
                                                  double adaptive_mix = 0.5) {
  return {
      {ServiceClass{0, beta, true, xi}, adaptive_mix},
      {ServiceClass{1, beta, false, 0.0}, 1.0 - adaptive_mix},
  };
}

inline TrafficConfig default_traffic() {
  TrafficConfig t;
  t.classes = default_classes();
  t.new_call_rate = 0.08;
  t.macro_handover_rate = 0.02;
  t.femto_handover_rate = 0.02;
  t.macro_to_femto_rate = 0.02;
  t.mean_call_duration = 120.0;
  t.mean_dwell_time = 540.0;
  return t;
}

struct ScenarioConfig {
  TrafficConfig traffic = default_traffic();
  PolicyKind policy = PolicyKind::proposed;
  Kbps capacity = 6000.0;
  Seconds reservation_time = 10.0;
  MobilityConfig mobility;
  Seconds sim_duration = 2e5;
  Seconds warmup = 1e4;
  std::uint64_t seed = 1;
  bool debug_checks = false;

  void validate() const {
    traffic.validate();
    for (std::size_t i = 0; i < traffic.classes.size(); ++i)
      if (traffic.classes[i].service.class_id != static_cast<int>(i))
        throw ConfigError("traffic: class ids must be 0.." +
                          std::to_string(traffic.classes.size() - 1) + " in order");
    if (!(capacity > 0.0)) throw ConfigError("capacity must be positive");
    if (!(reservation_time >= 0.0)) throw ConfigError("reservation time must be non-negative");
    if (!(sim_duration > warmup) || !(warmup >= 0.0))
      throw ConfigError("require sim_duration > warmup >= 0");
    const auto& m = mobility;
    if (m.macrocells < 1) throw ConfigError("mobility: at least one macrocell is required");
    if (m.vehicles < 0) throw ConfigError("mobility: vehicle count must be non-negative");
    if (m.vehicles > 0) {
      if (!(m.stop_period > 0.0)) throw ConfigError("mobility: stop period must be positive");
      if (!(m.lookahead >= 0.0) || !(m.lookahead < m.stop_period))
        throw ConfigError("mobility: lookahead must lie in [0, stop period)");
      if (m.pattern != StationPattern::same_bs && m.macrocells < 2)
        throw ConfigError("mobility: cross-BS stops need at least two macrocells");
    }
    if (!(m.alight_fraction >= 0.0 && m.alight_fraction <= 1.0))
      throw ConfigError("mobility: alight fraction must lie in [0, 1]");
    if (!(m.board_mean >= 0.0)) throw ConfigError("mobility: board mean must be non-negative");
    if (!(m.onboard_call_rate >= 0.0))
      throw ConfigError("mobility: onboard call rate must be non-negative");
  }

  bool operator==(const ScenarioConfig&) const = default;
};

/// Scales every Poisson arrival stream of the traffic model.
inline ScenarioConfig with_load_multiplier(ScenarioConfig config, double multiplier) {
  auto& t = config.traffic;
  t.new_call_rate *= multiplier;
  t.macro_handover_rate *= multiplier;
  t.femto_handover_rate *= multiplier;
  t.macro_to_femto_rate *= multiplier;
  return config;
}

enum class EventKind {
  new_call_arrival,
  macro_handover_arrival,
  femto_handover_arrival,
  macro_to_femto_departure,
  onboard_call_arrival,
  call_end,
  dwell_expiry,
  station_approach,
  station_arrival,
  backhaul_handover,
  reservation_expiry,
};

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::new_call_arrival: return "new_call_arrival";
    case EventKind::macro_handover_arrival: return "macro_handover_arrival";
    case EventKind::femto_handover_arrival: return "femto_handover_arrival";
    case EventKind::macro_to_femto_departure: return "macro_to_femto_departure";
    case EventKind::onboard_call_arrival: return "onboard_call_arrival";
    case EventKind::call_end: return "call_end";
    case EventKind::dwell_expiry: return "dwell_expiry";
    case EventKind::station_approach: return "station_approach";
    case EventKind::station_arrival: return "station_arrival";
    case EventKind::backhaul_handover: return "backhaul_handover";
    case EventKind::reservation_expiry: return "reservation_expiry";
  }
  return "?";
}

struct Event {
  Seconds time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::new_call_arrival;
  std::uint32_t entity = 0;  // macrocell or vehicle, depending on kind
  CallId call = 0;
  std::uint64_t token = 0;
};

/// Min-queue on (time, seq); seq is assigned at insertion and breaks ties.
class EventQueue {
public:
  const Event& push(Seconds time, EventKind kind, std::uint32_t entity = 0, CallId call = 0,
                    std::uint64_t token = 0) {
    heap_.push(Event{time, next_seq_++, kind, entity, call, token});
    return heap_.top();
  }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const Event& top() const { return heap_.top(); }
  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    return e;
  }

private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

struct ClassCounts {
  std::uint64_t new_attempts = 0;
  std::uint64_t new_blocks = 0;
  std::uint64_t handover_attempts = 0;
  std::uint64_t handover_drops = 0;
};

struct MetricsAccumulator {
  std::uint64_t handover_attempts = 0;
  std::uint64_t handover_drops = 0;
  std::uint64_t new_attempts = 0;
  std::uint64_t new_blocks = 0;
  std::uint64_t degradation_events = 0;
  double occupied_time_integral = 0.0;  // kbps * s, summed over macrocells
  double reserved_time_integral = 0.0;  // kbps * s, summed over macrocells
  Seconds sim_time = 0.0;               // measured (post-warmup) time
  std::vector<ClassCounts> per_class;
};

/// Adds the ledger's occupancy (and live reservations) held over
/// [from, to) to the integrals.
inline void record_utilization_step(MetricsAccumulator& metrics, const CapacityLedger& ledger,
                                    Seconds from, Seconds to) {
  if (!(to > from)) return;
  const Seconds dt = to - from;
  metrics.occupied_time_integral += ledger.occupied() * dt;
  metrics.reserved_time_integral += ledger.vacant_reserved(from) * dt;
}

struct MetricsReport {
  double handover_drop_prob = 0.0;
  double new_block_prob = 0.0;
  double utilization = 0.0;
  double mean_reserved_kbps = 0.0;  // per macrocell, time-averaged
  std::uint64_t degradation_events = 0;
  std::uint64_t handover_attempts = 0;
  std::uint64_t handover_drops = 0;
  std::uint64_t new_attempts = 0;
  std::uint64_t new_blocks = 0;
  std::vector<ClassCounts> per_class;
  std::uint64_t events_executed = 0;
  std::uint64_t invariant_violations = 0;
  std::vector<std::string> first_violations;

  double class_new_block_prob(std::size_t i) const {
    const auto& c = per_class.at(i);
    return c.new_attempts ? static_cast<double>(c.new_blocks) / c.new_attempts : 0.0;
  }
};

/// One simulation run over a set of macrocells and femtocell-carrying
/// vehicles.  Strictly single-threaded; results depend only on the config.
class Simulation {
public:
  explicit Simulation(ScenarioConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto& mob = config_.mobility;
    net_.policy = config_.policy;
    net_.backhaul_all_or_nothing = mob.backhaul_all_or_nothing;
    for (int m = 0; m < mob.macrocells; ++m)
      net_.macros.emplace_back(config_.capacity, config_.reservation_time);
    routes_.resize(static_cast<std::size_t>(mob.vehicles));
    plans_.resize(static_cast<std::size_t>(mob.vehicles));
    for (int v = 0; v < mob.vehicles; ++v) {
      const auto home = static_cast<MacroId>(v % mob.macrocells);
      net_.vehicles.emplace_back(static_cast<VehicleId>(v), home);
      routes_[static_cast<std::size_t>(v)].macro = home;
    }
    metrics_.per_class.resize(config_.traffic.classes.size());
    reservation_log_.resize(net_.macros.size());
  }

  const ScenarioConfig& config() const { return config_; }
  const Network& network() const { return net_; }
  const MetricsAccumulator& metrics() const { return metrics_; }
  std::uint64_t events_executed() const { return events_executed_; }
  std::uint64_t live_calls() const { return live_calls_; }

  /// Writes one CSV line per executed event: time,kind,occupied_kbps,reserved_kbps
  /// (totals across macrocells, after the event).
  void set_trace(std::ostream* out) { trace_ = out; }

  /// Called after every executed event.
  void set_observer(std::function<void(const Event&, const Simulation&)> f) {
    observer_ = std::move(f);
  }

  MetricsReport run() {
    if (ran_) throw ConsistencyError("Simulation::run called twice");
    ran_ = true;
    seed_processes();
    if (trace_) *trace_ << "time,kind,occupied_kbps,reserved_kbps\n";
    Seconds last = 0.0;
    while (!queue_.empty() && queue_.top().time <= config_.sim_duration) {
      Event e = queue_.pop();
      if (e.time < last) violation("event causality: time went backwards");
      accumulate(last, e.time);
      last = e.time;
      dispatch(e);
      ++events_executed_;
      if (config_.debug_checks) check_all(e.time);
      if (trace_) {
        Kbps occ = 0.0, res = 0.0;
        for (const auto& l : net_.macros) {
          occ += l.occupied();
          res += l.vacant_reserved(e.time);
        }
        fmt::print(*trace_, "{:.6f},{},{:.3f},{:.3f}\n", e.time, to_string(e.kind), occ, res);
      }
      if (observer_) observer_(e, *this);
    }
    accumulate(last, config_.sim_duration);
    return report();
  }

private:
  struct Route {
    std::uint64_t stop_index = 0;
    MacroId macro = 0;  // attachment once pending backhaul handovers complete
  };

  // ---- setup -------------------------------------------------------------

  RandomStream& stream(StreamKind kind, std::uint64_t index) {
    const std::uint64_t key = (static_cast<std::uint64_t>(kind) << 32) | index;
    auto it = streams_.find(key);
    if (it == streams_.end()) it = streams_.emplace(key, RandomStream(config_.seed, kind, index)).first;
    return it->second;
  }

  void schedule_arrival(EventKind kind, StreamKind stream_kind, double rate, std::uint32_t entity,
                        Seconds now) {
    if (!(rate > 0.0)) return;
    queue_.push(now + sample_exponential(1.0 / rate, stream(stream_kind, entity)), kind, entity);
  }

  void seed_processes() {
    const auto& t = config_.traffic;
    for (std::uint32_t m = 0; m < net_.macros.size(); ++m) {
      schedule_arrival(EventKind::new_call_arrival, StreamKind::new_call_arrivals, t.new_call_rate, m, 0.0);
      schedule_arrival(EventKind::macro_handover_arrival, StreamKind::macro_handover_arrivals,
                       t.macro_handover_rate, m, 0.0);
      schedule_arrival(EventKind::femto_handover_arrival, StreamKind::femto_handover_arrivals,
                       t.femto_handover_rate, m, 0.0);
      schedule_arrival(EventKind::macro_to_femto_departure, StreamKind::macro_to_femto_arrivals,
                       t.macro_to_femto_rate, m, 0.0);
    }
    const auto& mob = config_.mobility;
    for (std::uint32_t v = 0; v < net_.vehicles.size(); ++v) {
      schedule_arrival(EventKind::onboard_call_arrival, StreamKind::onboard_call_arrivals,
                       mob.onboard_call_rate, v, 0.0);
      // Stagger first stops across the period.
      const Seconds first = mob.stop_period * (v + 1.0) / (net_.vehicles.size() + 1.0) + mob.lookahead;
      schedule_stop(v, first);
    }
  }

  void schedule_stop(std::uint32_t v, Seconds arrival) {
    const auto& mob = config_.mobility;
    Route& route = routes_[v];
    bool cross = false;
    switch (mob.pattern) {
      case StationPattern::alternate: cross = route.stop_index % 2 == 1; break;
      case StationPattern::same_bs: cross = false; break;
      case StationPattern::cross_bs: cross = true; break;
    }
    StationStop stop;
    stop.arrival_time = arrival;
    stop.macro_at_station = cross ? next_macro(route.macro) : route.macro;
    stop.lookahead = mob.lookahead;
    stop.alight_fraction = mob.alight_fraction;
    stop.board_count_mean = mob.board_mean;
    net_.vehicles[v].schedule().push_back(stop);
    ++route.stop_index;
    queue_.push(arrival - stop.lookahead, EventKind::station_approach, v);
    queue_.push(arrival, EventKind::station_arrival, v);
  }

  MacroId next_macro(MacroId m) const {
    return static_cast<MacroId>((m + 1) % net_.macros.size());
  }

  // ---- bookkeeping -------------------------------------------------------

  bool measuring(Seconds now) const { return now >= config_.warmup; }

  void accumulate(Seconds from, Seconds to) {
    from = std::max(from, config_.warmup);
    if (!(to > from)) return;
    for (const auto& ledger : net_.macros) record_utilization_step(metrics_, ledger, from, to);
    metrics_.sim_time += to - from;
  }

  void count_new(const Call& call, const AdmissionDecision& d, Seconds now) {
    if (!measuring(now)) return;
    auto& c = metrics_.per_class[static_cast<std::size_t>(call.service.class_id)];
    ++metrics_.new_attempts;
    ++c.new_attempts;
    if (!d.admitted()) {
      ++metrics_.new_blocks;
      ++c.new_blocks;
    }
  }

  void count_handover(const Call& call, bool admitted, Seconds now) {
    if (!measuring(now)) return;
    auto& c = metrics_.per_class[static_cast<std::size_t>(call.service.class_id)];
    ++metrics_.handover_attempts;
    ++c.handover_attempts;
    if (!admitted) {
      ++metrics_.handover_drops;
      ++c.handover_drops;
    }
  }

  void count_degradation(const AdmissionDecision& d, Seconds now) {
    if (measuring(now)) metrics_.degradation_events += d.degraded_calls.size();
  }

  void note_reservation(MacroId m, Kbps freed, Seconds now) {
    if (!reserves(config_.policy) || config_.reservation_time <= 0.0 || freed <= kBandwidthTolerance)
      return;
    if (config_.debug_checks) reservation_log_[m].push_back({now, freed});
    queue_.push(now + config_.reservation_time, EventKind::reservation_expiry, m);
  }

  void violation(std::string what) {
    ++violations_;
    if (first_violations_.size() < 20) first_violations_.push_back(std::move(what));
  }

  /// A call now lives in macrocell m: arm its dwell timer.
  void settle_in_macro(MacroId m, CallId id, Seconds dwell, Seconds now) {
    const std::uint64_t token = ++next_token_;
    dwell_token_[id] = token;
    queue_.push(now + dwell, EventKind::dwell_expiry, m, id, token);
  }

  template <class Admit>
  AdmissionDecision checked_admission(CapacityLedger& ledger, Admit&& admit) {
    if (!config_.debug_checks) return admit();
    const CapacityLedger before = ledger;
    AdmissionDecision d = admit();
    if (!d.admitted() && !(before == ledger)) violation("rejected admission mutated the ledger");
    if (!d.admitted() && (d.granted != 0.0 || !d.degraded_calls.empty()))
      violation("rejected admission reported grants");
    return d;
  }

  // ---- event handlers ----------------------------------------------------

  void dispatch(const Event& e) {
    // Purge expired reservations everywhere; freed bandwidth may restore
    // degraded calls.
    for (auto& ledger : net_.macros)
      if (ledger.expire_reservations(e.time) > 0.0) ledger.restore_degraded(e.time);

    switch (e.kind) {
      case EventKind::new_call_arrival: on_new_call(e); break;
      case EventKind::macro_handover_arrival:
        on_handover_arrival(e, CallOrigin::macro_handover_in, StreamKind::macro_handover_arrivals,
                            StreamKind::macro_handover_attributes, config_.traffic.macro_handover_rate);
        break;
      case EventKind::femto_handover_arrival:
        on_handover_arrival(e, CallOrigin::femto_alighted, StreamKind::femto_handover_arrivals,
                            StreamKind::femto_handover_attributes, config_.traffic.femto_handover_rate);
        break;
      case EventKind::macro_to_femto_departure: on_macro_to_femto(e); break;
      case EventKind::onboard_call_arrival: on_onboard_call(e); break;
      case EventKind::call_end: on_call_end(e); break;
      case EventKind::dwell_expiry: on_dwell_expiry(e); break;
      case EventKind::station_approach: on_station_approach(e); break;
      case EventKind::station_arrival: on_station_arrival(e); break;
      case EventKind::backhaul_handover: on_backhaul_handover(e); break;
      case EventKind::reservation_expiry: break;  // handled by the purge above
    }
  }

  void on_new_call(const Event& e) {
    const auto m = static_cast<MacroId>(e.entity);
    schedule_arrival(EventKind::new_call_arrival, StreamKind::new_call_arrivals,
                     config_.traffic.new_call_rate, m, e.time);
    RandomStream& attrs = stream(StreamKind::new_call_attributes, m);
    Call call = spawn_call(config_.traffic, CallOrigin::macro_new, e.time, attrs, ids_);
    const Seconds dwell = sample_exponential(config_.traffic.mean_dwell_time, attrs);
    CapacityLedger& ledger = net_.macros[m];
    AdmissionDecision d = checked_admission(
        ledger, [&] { return ledger.admit_new_call(call, e.time, config_.policy); });
    count_new(call, d, e.time);
    if (d.admitted()) admitted_to_macro(m, call, dwell, e.time);
  }

  void on_handover_arrival(const Event& e, CallOrigin origin, StreamKind arrivals,
                           StreamKind attributes, double rate) {
    const auto m = static_cast<MacroId>(e.entity);
    schedule_arrival(e.kind, arrivals, rate, m, e.time);
    RandomStream& attrs = stream(attributes, m);
    // Residual holding time is exponential with the same mean.
    Call call = spawn_call(config_.traffic, origin, e.time, attrs, ids_);
    const Seconds dwell = sample_exponential(config_.traffic.mean_dwell_time, attrs);
    CapacityLedger& ledger = net_.macros[m];
    AdmissionDecision d = checked_admission(
        ledger, [&] { return ledger.admit_handover_call(call, e.time, config_.policy); });
    count_handover(call, d.admitted(), e.time);
    count_degradation(d, e.time);
    if (d.admitted()) admitted_to_macro(m, call, dwell, e.time);
  }

  void admitted_to_macro(MacroId m, const Call& call, Seconds dwell, Seconds now) {
    ++live_calls_;
    queue_.push(call.scheduled_end, EventKind::call_end, m, call.id);
    settle_in_macro(m, call.id, dwell, now);
  }

  void terminate(CallId id) {
    --live_calls_;
    dwell_token_.erase(id);
  }

  void on_macro_to_femto(const Event& e) {
    const auto m = static_cast<MacroId>(e.entity);
    schedule_arrival(e.kind, StreamKind::macro_to_femto_arrivals,
                     config_.traffic.macro_to_femto_rate, m, e.time);
    CapacityLedger& ledger = net_.macros[m];
    RandomStream& pick = stream(StreamKind::macro_to_femto_selection, m);
    const double u = pick.uniform();
    if (ledger.active_calls().empty()) return;
    auto it = ledger.active_calls().begin();
    std::advance(it, static_cast<std::ptrdiff_t>(u * static_cast<double>(ledger.active_calls().size())));
    const CallId id = it->first;
    // The call leaves for a femtocell outside the modelled vehicles.
    const Kbps freed = ledger.release_call(id, e.time, ReleaseReason::macro_to_femto_handover, config_.policy);
    terminate(id);
    note_reservation(m, freed, e.time);
  }

  void on_onboard_call(const Event& e) {
    const auto v = static_cast<VehicleId>(e.entity);
    schedule_arrival(e.kind, StreamKind::onboard_call_arrivals, config_.mobility.onboard_call_rate,
                     v, e.time);
    Call call = spawn_call(config_.traffic, CallOrigin::femto_onboard, e.time,
                           stream(StreamKind::onboard_call_attributes, v), ids_);
    queue_.push(call.scheduled_end, EventKind::call_end, v, call.id);
    net_.vehicles[v].add(std::move(call));
    ++live_calls_;
  }

  void on_call_end(const Event& e) {
    for (auto& ledger : net_.macros) {
      if (ledger.contains(e.call)) {
        ledger.release_call(e.call, e.time, ReleaseReason::natural_end, config_.policy);
        terminate(e.call);
        return;
      }
    }
    for (auto& vehicle : net_.vehicles) {
      if (vehicle.carries(e.call)) {
        end_onboard_call(net_, vehicle.id(), e.call, e.time, ReleaseReason::natural_end);
        terminate(e.call);
        return;
      }
    }
    // Already gone (dropped, handed out, or dwelled out).
  }

  void on_dwell_expiry(const Event& e) {
    auto it = dwell_token_.find(e.call);
    if (it == dwell_token_.end() || it->second != e.token) return;
    CapacityLedger& ledger = net_.macros[e.entity];
    if (!ledger.contains(e.call)) return;
    // Onward macro-to-macro handover out of the modelled cell.
    ledger.release_call(e.call, e.time, ReleaseReason::dwell_out, config_.policy);
    terminate(e.call);
  }

  void on_station_approach(const Event& e) {
    const auto v = static_cast<VehicleId>(e.entity);
    const auto& vehicle = net_.vehicles[v];
    plans_[v] = on_station_approach_plan(vehicle, vehicle.schedule().front(), e.time);
  }

  static GroupHandoverPlan on_station_approach_plan(const MobileFemtocell& vehicle,
                                                    const StationStop& stop, Seconds now) {
    return femtoho::on_station_approach(vehicle, stop, now);
  }

  void on_station_arrival(const Event& e) {
    const auto v = static_cast<VehicleId>(e.entity);
    MobileFemtocell& vehicle = net_.vehicles[v];
    const StationStop stop = vehicle.schedule().front();
    vehicle.schedule().pop_front();
    GroupHandoverPlan plan = plans_[v].value_or(on_station_approach_plan(vehicle, stop, e.time));
    plans_[v].reset();

    RandomStream& alight_rng = stream(StreamKind::alighting, v);
    auto attempts = execute_alighting(net_, v, stop, plan, e.time, alight_rng);
    for (auto& a : attempts) {
      count_handover(a.call, a.decision.admitted(), e.time);
      count_degradation(a.decision, e.time);
      const Seconds dwell = sample_exponential(config_.traffic.mean_dwell_time, alight_rng);
      if (a.decision.admitted()) {
        settle_in_macro(stop.macro_at_station, a.call.id, dwell, e.time);
      } else {
        terminate(a.call.id);
      }
    }

    for (const auto& b : execute_boarding(net_, v, stop, e.time, stream(StreamKind::boarding, v))) {
      dwell_token_.erase(b.call);
      note_reservation(stop.macro_at_station, b.freed, e.time);
    }

    const auto& mob = config_.mobility;
    const bool cross = stop.macro_at_station != routes_[v].macro;
    if (cross) {
      routes_[v].macro = stop.macro_at_station;
      const Seconds gap = mob.stop_period - mob.lookahead;
      queue_.push(e.time + gap / 2.0, EventKind::backhaul_handover, v, 0, stop.macro_at_station);
    }
    schedule_stop(v, e.time + mob.stop_period);
  }

  void on_backhaul_handover(const Event& e) {
    const auto v = static_cast<VehicleId>(e.entity);
    MobileFemtocell& vehicle = net_.vehicles[v];
    const MacroId from = vehicle.attached_macro();
    const auto to = static_cast<MacroId>(e.token);
    const Kbps previous = net_.macros[from].backhaul_load(v);
    const CapacityLedger before = config_.debug_checks ? net_.macros[to] : CapacityLedger(1.0, 0.0);
    BackhaulResult r = backhaul_handover(net_, v, from, to, e.time);
    if (config_.debug_checks && r.shed.size() == r.attempts && r.attempts > 0 &&
        !(before == net_.macros[to]))
      violation("fully shed backhaul handover mutated the target ledger");
    if (measuring(e.time)) {
      for (const auto& [id, oc] : vehicle.onboard()) count_handover(oc.call, true, e.time);
      for (const auto& call : r.shed) count_handover(call, false, e.time);
    }
    count_degradation(r.decision, e.time);
    for (const auto& call : r.shed) terminate(call.id);
    note_reservation(from, previous, e.time);
  }

  // ---- checks ------------------------------------------------------------

  void check_all(Seconds now) {
    std::uint64_t census = 0;
    std::unordered_map<CallId, int> seen;
    for (std::size_t m = 0; m < net_.macros.size(); ++m) {
      const auto& ledger = net_.macros[m];
      for (auto& msg : ledger.check_invariants(now)) violation(fmt::format("macro {}: {}", m, msg));
      census += ledger.active_calls().size();
      for (const auto& [id, c] : ledger.active_calls()) ++seen[id];
      for (const auto& [v, load] : ledger.backhaul_loads())
        if (net_.vehicles.at(v).attached_macro() != m)
          violation(fmt::format("macro {} carries backhaul of detached vehicle {}", m, v));
      // Reservations never outlive the threshold time: live reserved
      // bandwidth is bounded by what was freed in the last T seconds.
      auto& log = reservation_log_[m];
      while (!log.empty() && log.front().first + config_.reservation_time <= now) log.pop_front();
      Kbps recent = 0.0;
      for (const auto& [t, amount] : log) recent += amount;
      if (ledger.vacant_reserved(now) > recent + kBandwidthTolerance)
        violation(fmt::format("macro {}: reserved bandwidth outlived its threshold time", m));
      for (const auto& r : ledger.reservations())
        if (r.expires_at <= now) violation(fmt::format("macro {}: expired reservation kept", m));
    }
    for (const auto& vehicle : net_.vehicles) {
      census += vehicle.onboard().size();
      for (const auto& [id, oc] : vehicle.onboard()) ++seen[id];
      if (std::abs(vehicle.recompute_aggregate() - vehicle.aggregate_demand()) > kBandwidthTolerance)
        violation(fmt::format("vehicle {}: aggregate demand drifted", vehicle.id()));
      const Kbps carried = net_.macros[vehicle.attached_macro()].backhaul_load(vehicle.id());
      if (std::abs(carried - vehicle.backhaul_charged()) > kBandwidthTolerance)
        violation(fmt::format("vehicle {}: backhaul load {} != charged calls {}", vehicle.id(),
                              carried, vehicle.backhaul_charged()));
    }
    if (census != live_calls_)
      violation(fmt::format("census: {} registered vs {} live calls", census, live_calls_));
    for (const auto& [id, n] : seen)
      if (n != 1) violation(fmt::format("call {} registered in {} places", id, n));
  }

  MetricsReport report() const {
    MetricsReport r;
    const auto& m = metrics_;
    r.handover_attempts = m.handover_attempts;
    r.handover_drops = m.handover_drops;
    r.new_attempts = m.new_attempts;
    r.new_blocks = m.new_blocks;
    r.handover_drop_prob = m.handover_attempts ? static_cast<double>(m.handover_drops) / m.handover_attempts : 0.0;
    r.new_block_prob = m.new_attempts ? static_cast<double>(m.new_blocks) / m.new_attempts : 0.0;
    const double cells = static_cast<double>(net_.macros.size());
    if (m.sim_time > 0.0) {
      r.utilization = m.occupied_time_integral / (config_.capacity * cells * m.sim_time);
      r.mean_reserved_kbps = m.reserved_time_integral / (cells * m.sim_time);
    }
    r.degradation_events = m.degradation_events;
    r.per_class = m.per_class;
    r.events_executed = events_executed_;
    r.invariant_violations = violations_;
    r.first_violations = first_violations_;
    return r;
  }

  ScenarioConfig config_;
  Network net_;
  EventQueue queue_;
  MetricsAccumulator metrics_;
  CallIdSource ids_;
  std::unordered_map<std::uint64_t, RandomStream> streams_;
  std::unordered_map<CallId, std::uint64_t> dwell_token_;
  std::uint64_t next_token_ = 0;
  std::vector<Route> routes_;
  std::vector<std::optional<GroupHandoverPlan>> plans_;
  std::vector<std::deque<std::pair<Seconds, Kbps>>> reservation_log_;
  std::uint64_t live_calls_ = 0;
  std::uint64_t events_executed_ = 0;
  std::uint64_t violations_ = 0;
  std::vector<std::string> first_violations_;
  std::ostream* trace_ = nullptr;
  std::function<void(const Event&, const Simulation&)> observer_;
  bool ran_ = false;
};

inline MetricsReport run(const ScenarioConfig& config) { return Simulation(config).run(); }

}  // namespace femtoho

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "femtoho/capacity_ledger.hpp"
#include "femtoho/core.hpp"
#include "femtoho/random.hpp"
#include "femtoho/traffic.hpp"

namespace femtoho {

/// One scheduled stop.  `lookahead` is how long before arrival the group
/// handover process starts; `macro_at_station` may differ from the
/// macrocell carrying the vehicle's backhaul (cross-BS alighting).
struct StationStop {
  Seconds arrival_time = 0.0;
  MacroId macro_at_station = 0;
  Seconds lookahead = 0.0;
  double alight_fraction = 0.0;
  double board_count_mean = 0.0;
};

struct OnboardCall {
  Call call;
  // True once the call is carried in the attached macrocell's backhaul
  // load.  Calls that start or board between backhaul handovers ride
  // uncharged until the next aggregate admission.
  bool on_backhaul = false;
};

class MobileFemtocell {
public:
  MobileFemtocell(VehicleId id, MacroId attached) : id_(id), attached_(attached) {}

  VehicleId id() const { return id_; }
  MacroId attached_macro() const { return attached_; }
  void attach(MacroId m) { attached_ = m; }

  const std::map<CallId, OnboardCall>& onboard() const { return onboard_; }
  bool carries(CallId id) const { return onboard_.count(id) != 0; }

  /// Incrementally maintained sum of onboard allocations.
  Kbps aggregate_demand() const { return aggregate_; }

  Kbps recompute_aggregate() const {
    Kbps sum = 0.0;
    for (const auto& [id, oc] : onboard_) sum += oc.call.alloc;
    return sum;
  }

  /// Sum of allocations the attached macrocell is carrying for this vehicle.
  Kbps backhaul_charged() const {
    Kbps sum = 0.0;
    for (const auto& [id, oc] : onboard_)
      if (oc.on_backhaul) sum += oc.call.alloc;
    return sum;
  }

  void add(Call call, bool on_backhaul = false) {
    if (onboard_.count(call.id))
      throw ConsistencyError("vehicle " + std::to_string(id_) + ": duplicate call " +
                             std::to_string(call.id));
    aggregate_ += call.alloc;
    onboard_.emplace(call.id, OnboardCall{std::move(call), on_backhaul});
  }

  std::optional<OnboardCall> remove(CallId id) {
    auto it = onboard_.find(id);
    if (it == onboard_.end()) return std::nullopt;
    OnboardCall oc = std::move(it->second);
    onboard_.erase(it);
    aggregate_ -= oc.call.alloc;
    if (onboard_.empty()) aggregate_ = 0.0;
    return oc;
  }

  void mark_all_on_backhaul() {
    for (auto& [id, oc] : onboard_) oc.on_backhaul = true;
  }

  std::deque<StationStop>& schedule() { return schedule_; }
  const std::deque<StationStop>& schedule() const { return schedule_; }

private:
  VehicleId id_;
  MacroId attached_;
  std::map<CallId, OnboardCall> onboard_;
  Kbps aggregate_ = 0.0;
  std::deque<StationStop> schedule_;
};

/// The macrocells and vehicles of one simulation run.
struct Network {
  std::vector<CapacityLedger> macros;
  std::vector<MobileFemtocell> vehicles;
  PolicyKind policy = PolicyKind::proposed;
  // Drop every onboard call when the full aggregate does not fit at the
  // target of a backhaul handover, instead of shedding newest-first.
  bool backhaul_all_or_nothing = false;

  CapacityLedger& macro(MacroId m) {
    if (m >= macros.size()) throw ConfigError("unknown macrocell " + std::to_string(m));
    return macros[m];
  }
  const CapacityLedger& macro(MacroId m) const {
    if (m >= macros.size()) throw ConfigError("unknown macrocell " + std::to_string(m));
    return macros[m];
  }
  MobileFemtocell& vehicle(VehicleId v) {
    if (v >= vehicles.size()) throw ConfigError("unknown vehicle " + std::to_string(v));
    return vehicles[v];
  }
};

struct GroupHandoverPlan {
  VehicleId vehicle = 0;
  Seconds approach_time = 0.0;
  Seconds arrival_time = 0.0;
  // Calls active onboard when the process started.
  std::vector<CallId> candidates;
};

struct HandoverAttempt {
  Call call;
  AdmissionDecision decision;
};

struct BackhaulResult {
  AdmissionDecision decision;
  std::size_t attempts = 0;
  std::vector<Call> shed;
};

/// Snapshot of the onboard calls at the start of the lookahead window.
inline GroupHandoverPlan on_station_approach(const MobileFemtocell& vehicle, const StationStop& stop,
                                             Seconds now) {
  GroupHandoverPlan plan;
  plan.vehicle = vehicle.id();
  plan.approach_time = now;
  plan.arrival_time = stop.arrival_time;
  plan.candidates.reserve(vehicle.onboard().size());
  for (const auto& [id, oc] : vehicle.onboard()) plan.candidates.push_back(id);
  return plan;
}

/// Candidates at arrival: planned calls still onboard plus calls that
/// joined during the lookahead window, in ascending id order.
inline std::vector<CallId> alighting_candidates(const MobileFemtocell& vehicle,
                                                const GroupHandoverPlan& plan) {
  std::set<CallId> ids;
  for (CallId id : plan.candidates)
    if (vehicle.carries(id)) ids.insert(id);
  for (const auto& [id, oc] : vehicle.onboard()) ids.insert(id);
  return {ids.begin(), ids.end()};
}

/// Each candidate alights independently with probability alight_fraction
/// and is submitted as a handover call to the station's macrocell.
/// Admitted calls join that macrocell's registry; rejected ones terminate.
inline std::vector<HandoverAttempt> execute_alighting(Network& net, VehicleId vid,
                                                      const StationStop& stop,
                                                      const GroupHandoverPlan& plan, Seconds now,
                                                      RandomStream& rng) {
  MobileFemtocell& vehicle = net.vehicle(vid);
  CapacityLedger& target = net.macro(stop.macro_at_station);
  CapacityLedger& backhaul = net.macro(vehicle.attached_macro());

  std::vector<CallId> leaving;
  for (CallId id : alighting_candidates(vehicle, plan))
    if (rng.bernoulli(stop.alight_fraction)) leaving.push_back(id);

  std::vector<HandoverAttempt> out;
  out.reserve(leaving.size());
  for (CallId id : leaving) {
    OnboardCall oc = *vehicle.remove(id);
    if (oc.on_backhaul)
      backhaul.release_backhaul(vid, oc.call.alloc, now, ReleaseReason::natural_end, net.policy,
                                /*restore=*/false);
    oc.call.origin = CallOrigin::femto_alighted;
    AdmissionDecision d = target.admit_handover_call(oc.call, now, net.policy);
    out.push_back({std::move(oc.call), std::move(d)});
  }
  backhaul.restore_degraded(now);
  if (&target != &backhaul) target.restore_degraded(now);
  return out;
}

struct Boarding {
  CallId call = 0;
  Kbps freed = 0.0;  // allocation released at the macrocell
};

/// A Poisson number of active calls at the station's macrocell hand over
/// into the vehicle.  The femtocell side never blocks.
inline std::vector<Boarding> execute_boarding(Network& net, VehicleId vid, const StationStop& stop,
                                            Seconds now, RandomStream& rng) {
  MobileFemtocell& vehicle = net.vehicle(vid);
  CapacityLedger& macro = net.macro(stop.macro_at_station);

  std::size_t wanted = 0;
  if (stop.board_count_mean > 0.0) {
    std::poisson_distribution<std::size_t> count(stop.board_count_mean);
    wanted = count(rng);
  }
  std::vector<CallId> pool;
  pool.reserve(macro.active_calls().size());
  for (const auto& [id, call] : macro.active_calls()) pool.push_back(id);
  const std::size_t k = std::min(wanted, pool.size());

  // Partial Fisher-Yates: the first k slots become a uniform sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);

  std::vector<Boarding> out;
  out.reserve(k);
  for (CallId id : pool) {
    Call call = *macro.find(id);
    const Kbps freed =
        macro.release_call(id, now, ReleaseReason::macro_to_femto_handover, net.policy);
    // The onboard air interface serves the call at its requested rate.
    call.alloc = call.service.beta_requested;
    vehicle.add(std::move(call));
    out.push_back({id, freed});
  }
  return out;
}

/// Removes a call that ended while onboard, returning its backhaul share.
inline std::optional<OnboardCall> end_onboard_call(Network& net, VehicleId vid, CallId id,
                                                   Seconds now, ReleaseReason reason) {
  MobileFemtocell& vehicle = net.vehicle(vid);
  auto oc = vehicle.remove(id);
  if (oc && oc->on_backhaul)
    net.macro(vehicle.attached_macro())
        .release_backhaul(vid, oc->call.alloc, now, reason, net.policy);
  return oc;
}

/// Moves the vehicle's backhaul from one macrocell to another.  The whole
/// onboard aggregate is admitted at the target as one handover request;
/// when it does not fit, calls are shed newest-first until it does.  The
/// source then releases the vehicle's previous load as a departing
/// femtocell.
inline BackhaulResult backhaul_handover(Network& net, VehicleId vid, MacroId from, MacroId to,
                                        Seconds now) {
  MobileFemtocell& vehicle = net.vehicle(vid);
  CapacityLedger& source = net.macro(from);
  CapacityLedger& target = net.macro(to);
  if (vehicle.attached_macro() != from)
    throw ConsistencyError("backhaul_handover: vehicle not attached to source macrocell");
  if (from == to) throw ConfigError("backhaul_handover: source and target coincide");

  BackhaulResult result;
  result.attempts = vehicle.onboard().size();

  const Kbps available = target.handover_capacity(net.policy);
  if (vehicle.aggregate_demand() > available + kBandwidthTolerance) {
    std::vector<const OnboardCall*> order;
    for (const auto& [id, oc] : vehicle.onboard()) order.push_back(&oc);
    std::sort(order.begin(), order.end(), [](const OnboardCall* a, const OnboardCall* b) {
      if (a->call.start_time != b->call.start_time) return a->call.start_time > b->call.start_time;
      return a->call.id > b->call.id;
    });
    std::vector<CallId> victims;
    Kbps demand = vehicle.aggregate_demand();
    for (const OnboardCall* oc : order) {
      if (!net.backhaul_all_or_nothing && demand <= available + kBandwidthTolerance) break;
      victims.push_back(oc->call.id);
      demand -= oc->call.alloc;
    }
    for (CallId id : victims) result.shed.push_back(vehicle.remove(id)->call);
  }

  const Kbps remainder = vehicle.aggregate_demand();
  if (remainder > kBandwidthTolerance) {
    result.decision = target.admit_backhaul(vid, remainder, now, net.policy);
    if (!result.decision.admitted())
      throw ConsistencyError("backhaul_handover: trimmed aggregate failed to fit");
  } else {
    result.decision.outcome = AdmissionOutcome::admitted;
  }
  source.release_backhaul(vid, -1.0, now, ReleaseReason::femtocell_departed, net.policy);
  vehicle.attach(to);
  vehicle.mark_all_on_backhaul();
  return result;
}

}  // namespace femtoho

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "femtoho/core.hpp"
#include "femtoho/traffic.hpp"

namespace femtoho {

enum class PolicyKind { proposed, no_priority, adaptation_only, reservation_only };

inline constexpr PolicyKind kAllPolicies[] = {PolicyKind::proposed, PolicyKind::no_priority,
                                              PolicyKind::adaptation_only,
                                              PolicyKind::reservation_only};

/// Whether freed handover bandwidth is held back for the threshold time.
constexpr bool reserves(PolicyKind p) {
  return p == PolicyKind::proposed || p == PolicyKind::reservation_only;
}

/// Whether handover calls may degrade adaptive calls.
constexpr bool adapts(PolicyKind p) {
  return p == PolicyKind::proposed || p == PolicyKind::adaptation_only;
}

inline std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::proposed: return "proposed";
    case PolicyKind::no_priority: return "no_priority";
    case PolicyKind::adaptation_only: return "adaptation_only";
    case PolicyKind::reservation_only: return "reservation_only";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy(std::string_view name) {
  for (PolicyKind p : kAllPolicies)
    if (to_string(p) == name) return p;
  return std::nullopt;
}

enum class ReservationSource { user_macro_to_femto, femtocell_departure };

struct ReservationEntry {
  Kbps amount = 0.0;
  Seconds created_at = 0.0;
  Seconds expires_at = 0.0;
  ReservationSource source = ReservationSource::user_macro_to_femto;

  bool operator==(const ReservationEntry&) const = default;
};

enum class AdmissionOutcome { admitted, blocked, dropped };

struct Degradation {
  CallId call = 0;
  Kbps amount = 0.0;

  bool operator==(const Degradation&) const = default;
};

struct AdmissionDecision {
  AdmissionOutcome outcome = AdmissionOutcome::blocked;
  Kbps granted = 0.0;
  std::vector<Degradation> degraded_calls;
  Kbps reserved_consumed = 0.0;

  bool admitted() const { return outcome == AdmissionOutcome::admitted; }
};

enum class ReleaseReason { natural_end, dwell_out, macro_to_femto_handover, femtocell_departed };

/// Bandwidth one call of this class can give up at full allocation.
inline Kbps per_call_releasable(const ServiceClass& service) {
  return service.adaptive ? service.xi * service.beta_requested : 0.0;
}

/// Bandwidth accounting for one macrocell: occupied bandwidth, timed
/// reservations of freed handover bandwidth, and the registry of admitted
/// calls.  Vehicles whose backhaul is attached here hold a non-adaptive
/// aggregate load alongside the individual calls.
///
/// Invariants (see check_invariants):
///   occupied == sum of call allocations + sum of backhaul loads
///   sum of reservation amounts <= capacity - occupied
///   adaptive allocations stay within [floor, beta]; others stay at beta
class CapacityLedger {
public:
  CapacityLedger(Kbps capacity, Seconds reservation_time)
      : capacity_(capacity), reservation_time_(reservation_time) {
    if (!(capacity > 0.0)) throw ConfigError("ledger capacity must be positive");
    if (!(reservation_time >= 0.0)) throw ConfigError("reservation time must be non-negative");
  }

  Kbps capacity() const { return capacity_; }
  Seconds reservation_time() const { return reservation_time_; }
  Kbps occupied() const { return occupied_; }
  Kbps free_bandwidth() const { return std::max(0.0, capacity_ - occupied_); }

  const std::map<CallId, Call>& active_calls() const { return calls_; }
  const std::deque<ReservationEntry>& reservations() const { return reservations_; }
  const std::map<VehicleId, Kbps>& backhaul_loads() const { return backhaul_; }
  const std::deque<Degradation>& degradation_log() const { return degradation_log_; }

  bool contains(CallId id) const { return calls_.count(id) != 0; }
  const Call* find(CallId id) const {
    auto it = calls_.find(id);
    return it == calls_.end() ? nullptr : &it->second;
  }
  Kbps backhaul_load(VehicleId v) const {
    auto it = backhaul_.find(v);
    return it == backhaul_.end() ? 0.0 : it->second;
  }

  /// C_vacant: total of reservation entries still live at `now`.
  Kbps vacant_reserved(Seconds now) const {
    Kbps sum = 0.0;
    for (const auto& e : reservations_)
      if (e.expires_at > now) sum += e.amount;
    return sum;
  }

  Kbps free_unreserved(Seconds now) const {
    return std::max(0.0, capacity_ - occupied_ - vacant_reserved(now));
  }

  /// Remaining headroom: sum over adaptive calls of what each can
  /// still give up.  Equals sum N_i xi_i beta_i when nothing is degraded.
  Kbps total_releasable() const {
    Kbps sum = 0.0;
    for (const auto& [id, call] : calls_)
      if (call.service.adaptive) sum += std::max(0.0, call.alloc - call.service.floor());
    return sum;
  }

  /// Bandwidth a handover request could obtain right now under `policy`.
  Kbps handover_capacity(PolicyKind policy) const {
    return free_bandwidth() + (adapts(policy) ? total_releasable() : 0.0);
  }

  /// Bandwidth a new call could obtain right now under `policy`.
  Kbps new_call_capacity(Seconds now, PolicyKind policy) const {
    return reserves(policy) ? free_unreserved(now) : free_bandwidth();
  }

  /// Drops entries with expires_at <= now; returns the amount returned to
  /// the general pool.
  Kbps expire_reservations(Seconds now) {
    Kbps released = 0.0;
    auto live = std::stable_partition(reservations_.begin(), reservations_.end(),
                                      [now](const ReservationEntry& e) { return e.expires_at > now; });
    for (auto it = live; it != reservations_.end(); ++it) released += it->amount;
    reservations_.erase(live, reservations_.end());
    return released;
  }

  /// New calls may use neither reserved nor releasable bandwidth.
  AdmissionDecision admit_new_call(const Call& call, Seconds now, PolicyKind policy) {
    require_absent(call.id);
    AdmissionDecision d;
    if (call.alloc > new_call_capacity(now, policy) + kBandwidthTolerance) {
      d.outcome = AdmissionOutcome::blocked;
      return d;
    }
    expire_reservations(now);
    calls_.emplace(call.id, call);
    occupied_ += call.alloc;
    d.outcome = AdmissionOutcome::admitted;
    d.granted = call.alloc;
    return d;
  }

  /// Handover calls draw on free unreserved bandwidth, then reservations
  /// (earliest expiry first), then degradation of adaptive calls.
  AdmissionDecision admit_handover_call(const Call& call, Seconds now, PolicyKind policy) {
    require_absent(call.id);
    AdmissionDecision d;
    if (call.alloc > handover_capacity(policy) + kBandwidthTolerance) {
      d.outcome = AdmissionOutcome::dropped;
      return d;
    }
    acquire_for_handover(call.alloc, now, policy, d);
    calls_.emplace(call.id, call);
    return d;
  }

  /// Aggregate admission of a vehicle's backhaul demand, treated as a
  /// handover request.
  AdmissionDecision admit_backhaul(VehicleId vehicle, Kbps amount, Seconds now, PolicyKind policy) {
    AdmissionDecision d;
    if (amount > handover_capacity(policy) + kBandwidthTolerance) {
      d.outcome = AdmissionOutcome::dropped;
      return d;
    }
    acquire_for_handover(amount, now, policy, d);
    backhaul_[vehicle] += amount;
    return d;
  }

  /// Degrades adaptive calls, largest remaining headroom first (ties by
  /// ascending id), until exactly `deficit` has been released.
  std::vector<Degradation> degrade_for(Kbps deficit) {
    std::vector<Degradation> out;
    if (deficit <= 0.0) return out;
    if (deficit > total_releasable() + kBandwidthTolerance)
      throw ConsistencyError("degrade_for: deficit exceeds releasable bandwidth");

    struct Candidate {
      Kbps headroom;
      CallId id;
    };
    std::vector<Candidate> order;
    for (const auto& [id, call] : calls_) {
      if (!call.service.adaptive) continue;
      Kbps headroom = call.alloc - call.service.floor();
      if (headroom > kBandwidthTolerance) order.push_back({headroom, id});
    }
    std::sort(order.begin(), order.end(), [](const Candidate& a, const Candidate& b) {
      return a.headroom != b.headroom ? a.headroom > b.headroom : a.id < b.id;
    });

    Kbps remaining = deficit;
    for (const auto& c : order) {
      if (remaining <= 0.0) break;
      Call& call = calls_.at(c.id);
      Kbps take = std::min(c.headroom, remaining);
      // Snap to the floor so repeated arithmetic cannot undershoot it.
      if (c.headroom - take <= kBandwidthTolerance) {
        take = c.headroom;
        call.alloc = call.service.floor();
      } else {
        call.alloc -= take;
      }
      remaining -= take;
      occupied_ -= take;
      out.push_back({c.id, take});
      degradation_log_.push_back({c.id, take});
    }
    return out;
  }

  /// Removes a call.  Bandwidth freed by a macro-to-femtocell handover or
  /// a departing femtocell is reserved for the threshold time under
  /// reserving policies; otherwise it rejoins the pool.  Degraded calls are
  /// then restored from free unreserved bandwidth.  Returns the freed amount.
  Kbps release_call(CallId id, Seconds now, ReleaseReason reason, PolicyKind policy) {
    auto it = calls_.find(id);
    if (it == calls_.end())
      throw ConsistencyError("release_call: unknown call " + std::to_string(id));
    const Kbps freed = it->second.alloc;
    calls_.erase(it);
    occupied_ -= freed;
    settle();
    maybe_reserve(freed, now, reason, policy);
    restore_degraded(now);
    return freed;
  }

  /// Releases up to `amount` of a vehicle's backhaul load (all of it when
  /// amount is negative).  Restoration can be deferred by the caller, e.g.
  /// while a batch of alighting handovers is still being placed.
  Kbps release_backhaul(VehicleId vehicle, Kbps amount, Seconds now, ReleaseReason reason,
                        PolicyKind policy, bool restore = true) {
    auto it = backhaul_.find(vehicle);
    if (it == backhaul_.end()) return 0.0;
    Kbps freed = amount < 0.0 ? it->second : std::min(amount, it->second);
    it->second -= freed;
    if (it->second <= kBandwidthTolerance) {
      freed += it->second;
      backhaul_.erase(it);
    }
    occupied_ -= freed;
    settle();
    maybe_reserve(freed, now, reason, policy);
    if (restore) restore_degraded(now);
    return freed;
  }

  /// Raises degraded calls back toward their requested rate, oldest
  /// degradation first, using free unreserved bandwidth only.
  Kbps restore_degraded(Seconds now) {
    Kbps available = free_unreserved(now);
    Kbps restored = 0.0;
    for (auto it = degradation_log_.begin(); it != degradation_log_.end();) {
      auto call_it = calls_.find(it->call);
      if (call_it == calls_.end()) {
        it = degradation_log_.erase(it);
        continue;
      }
      if (available <= kBandwidthTolerance) break;
      Call& call = call_it->second;
      Kbps gap = call.service.beta_requested - call.alloc;
      Kbps give = std::min({it->amount, gap, available});
      if (give > 0.0) {
        call.alloc += give;
        if (call.service.beta_requested - call.alloc <= kBandwidthTolerance)
          call.alloc = call.service.beta_requested;
        occupied_ += give;
        available -= give;
        restored += give;
        it->amount -= give;
      }
      if (it->amount <= kBandwidthTolerance || gap - give <= kBandwidthTolerance)
        it = degradation_log_.erase(it);
      else
        ++it;
    }
    return restored;
  }

  /// Violated invariants, one message each; empty when consistent.
  std::vector<std::string> check_invariants(Seconds now) const {
    std::vector<std::string> bad;
    Kbps sum = 0.0;
    for (const auto& [id, call] : calls_) {
      sum += call.alloc;
      if (id != call.id) bad.push_back("registry key mismatch for call " + std::to_string(id));
      const auto& s = call.service;
      if (s.adaptive) {
        if (call.alloc < s.floor() - kBandwidthTolerance ||
            call.alloc > s.beta_requested + kBandwidthTolerance)
          bad.push_back("adaptive call " + std::to_string(id) + " outside [floor, beta]");
      } else if (std::abs(call.alloc - s.beta_requested) > kBandwidthTolerance) {
        bad.push_back("non-adaptive call " + std::to_string(id) + " alloc changed");
      }
    }
    for (const auto& [v, load] : backhaul_) {
      sum += load;
      if (!(load > 0.0)) bad.push_back("empty backhaul load for vehicle " + std::to_string(v));
    }
    if (std::abs(sum - occupied_) > kBandwidthTolerance)
      bad.push_back("occupied " + std::to_string(occupied_) + " != sum of allocations " +
                    std::to_string(sum));
    if (occupied_ < -kBandwidthTolerance || occupied_ > capacity_ + kBandwidthTolerance)
      bad.push_back("occupied outside [0, capacity]");
    Kbps reserved = 0.0;
    for (const auto& e : reservations_) {
      reserved += e.amount;
      if (!(e.amount > 0.0)) bad.push_back("non-positive reservation entry");
      if (e.expires_at > e.created_at + reservation_time_ + 1e-9)
        bad.push_back("reservation outlives threshold time");
    }
    if (reserved > capacity_ - occupied_ + kBandwidthTolerance)
      bad.push_back("reservations exceed free bandwidth");
    (void)now;
    return bad;
  }

  bool operator==(const CapacityLedger&) const = default;

private:
  void require_absent(CallId id) const {
    if (calls_.count(id))
      throw ConsistencyError("admission: duplicate call id " + std::to_string(id));
  }

  void settle() {
    if (std::abs(occupied_) <= kBandwidthTolerance && calls_.empty() && backhaul_.empty())
      occupied_ = 0.0;
  }

  void maybe_reserve(Kbps freed, Seconds now, ReleaseReason reason, PolicyKind policy) {
    if (!reserves(policy) || reservation_time_ <= 0.0 || freed <= kBandwidthTolerance) return;
    if (reason == ReleaseReason::macro_to_femto_handover)
      reservations_.push_back({freed, now, now + reservation_time_,
                               ReservationSource::user_macro_to_femto});
    else if (reason == ReleaseReason::femtocell_departed)
      reservations_.push_back({freed, now, now + reservation_time_,
                               ReservationSource::femtocell_departure});
  }

  // Caller has checked that `amount` fits within handover_capacity.
  void acquire_for_handover(Kbps amount, Seconds now, PolicyKind policy, AdmissionDecision& d) {
    expire_reservations(now);
    const Kbps unreserved = free_unreserved(now);
    Kbps remaining = amount - std::min(amount, unreserved);

    if (remaining > 0.0) {
      // Entries are appended in creation order with a fixed lifetime, so
      // the front of the queue expires first.
      std::stable_sort(reservations_.begin(), reservations_.end(),
                       [](const ReservationEntry& a, const ReservationEntry& b) {
                         return a.expires_at < b.expires_at;
                       });
      while (remaining > 0.0 && !reservations_.empty()) {
        ReservationEntry& e = reservations_.front();
        Kbps take = std::min(e.amount, remaining);
        e.amount -= take;
        remaining -= take;
        d.reserved_consumed += take;
        if (e.amount <= kBandwidthTolerance) reservations_.pop_front();
      }
    }
    if (remaining > kBandwidthTolerance && adapts(policy)) {
      d.degraded_calls = degrade_for(std::min(remaining, total_releasable()));
      remaining = 0.0;
    }
    // Degradation already lowered occupied_ by the degraded total.
    occupied_ += amount;
    d.outcome = AdmissionOutcome::admitted;
    d.granted = amount;
  }

  Kbps capacity_;
  Seconds reservation_time_;
  Kbps occupied_ = 0.0;
  std::map<CallId, Call> calls_;
  std::map<VehicleId, Kbps> backhaul_;
  std::deque<ReservationEntry> reservations_;
  std::deque<Degradation> degradation_log_;
};

}  // namespace femtoho

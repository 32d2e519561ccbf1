#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "femtoho/capacity_ledger.hpp"

using namespace femtoho;

namespace {

const ServiceClass kAdaptive256{0, 256.0, true, 0.5};
const ServiceClass kPlain256{1, 256.0, false, 0.0};

Call make_call(CallId id, const ServiceClass& s, Seconds start = 0.0) {
  return Call{id, s, s.beta_requested, CallOrigin::macro_new, start, start + 100.0};
}

ServiceClass plain(Kbps beta, int class_id = 9) { return ServiceClass{class_id, beta, false, 0.0}; }

}  // namespace

// ---- releasable bandwidth ---------------------------------------------------

TEST(PerCallReleasable, HandEvaluated) {
  EXPECT_EQ(per_call_releasable(ServiceClass{0, 256.0, true, 0.5}), 128.0);
  EXPECT_EQ(per_call_releasable(ServiceClass{0, 256.0, false, 0.0}), 0.0);
  EXPECT_EQ(per_call_releasable(ServiceClass{0, 100.0, true, 1.0}), 100.0);
}

TEST(TotalReleasable, ThreeFullAdaptiveCalls) {
  CapacityLedger l(6000.0, 10.0);
  for (CallId id = 1; id <= 3; ++id) l.admit_new_call(make_call(id, kAdaptive256), 0.0, PolicyKind::proposed);
  EXPECT_EQ(l.total_releasable(), 384.0);
}

TEST(TotalReleasable, NoAdaptiveCalls) {
  CapacityLedger l(6000.0, 10.0);
  EXPECT_EQ(l.total_releasable(), 0.0);
  l.admit_new_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed);
  EXPECT_EQ(l.total_releasable(), 0.0);
}

TEST(TotalReleasable, DegradedCallContributesRemainingHeadroom) {
  CapacityLedger l(256.0 + 64.0, 10.0);
  l.admit_new_call(make_call(1, kAdaptive256), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(2, plain(64.0)), 0.0, PolicyKind::proposed);
  // Handover of 64 kbps into a full cell degrades call 1 to 192.
  auto d = l.admit_handover_call(make_call(3, plain(64.0)), 0.0, PolicyKind::proposed);
  ASSERT_TRUE(d.admitted());
  EXPECT_EQ(l.find(1)->alloc, 192.0);
  EXPECT_EQ(l.total_releasable(), 64.0);
}

// ---- reservations ------------------------------------------------------------

TEST(VacantReserved, SingleLiveEntry) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, plain(300.0)), 0.0, PolicyKind::proposed);
  l.release_call(1, 30.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);
  ASSERT_EQ(l.reservations().size(), 1u);
  EXPECT_EQ(l.reservations().front().expires_at, 40.0);
  EXPECT_EQ(l.vacant_reserved(30.0), 300.0);
  EXPECT_EQ(l.vacant_reserved(41.0), 0.0);
}

TEST(VacantReserved, EmptyLedger) {
  CapacityLedger l(6000.0, 10.0);
  EXPECT_EQ(l.vacant_reserved(0.0), 0.0);
}

TEST(ExpireReservations, ReleasesOnlyExpiredEntries) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, plain(300.0)), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(2, plain(100.0)), 0.0, PolicyKind::proposed);
  l.release_call(1, 30.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);  // expires 40
  l.release_call(2, 50.0, ReleaseReason::femtocell_departed, PolicyKind::proposed);      // expires 60
  EXPECT_EQ(l.expire_reservations(50.0), 300.0);
  ASSERT_EQ(l.reservations().size(), 1u);
  EXPECT_EQ(l.reservations().front().amount, 100.0);
  EXPECT_EQ(l.reservations().front().source, ReservationSource::femtocell_departure);
}

TEST(ExpireReservations, BoundaryIsInclusive) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, plain(300.0)), 0.0, PolicyKind::proposed);
  l.release_call(1, 30.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);
  EXPECT_EQ(l.vacant_reserved(40.0), 0.0);
  EXPECT_EQ(l.expire_reservations(40.0), 300.0);
  EXPECT_TRUE(l.reservations().empty());
}

TEST(ExpireReservations, NothingToExpire) {
  CapacityLedger l(6000.0, 10.0);
  EXPECT_EQ(l.expire_reservations(100.0), 0.0);
}

// ---- new-call admission ------------------------------------------------------

namespace {

// c_total 6000, c_occupied 5500, 300 reserved.
CapacityLedger nearly_full_with_reservation() {
  CapacityLedger l(6000.0, 10.0);
  for (CallId id = 1; id <= 11; ++id) l.admit_new_call(make_call(id, plain(500.0)), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(12, plain(300.0)), 0.0, PolicyKind::proposed);
  l.release_call(12, 1.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);
  return l;
}

}  // namespace

TEST(AdmitNewCall, BlockedByReservation) {
  CapacityLedger l = nearly_full_with_reservation();
  ASSERT_EQ(l.occupied(), 5500.0);
  ASSERT_EQ(l.vacant_reserved(2.0), 300.0);
  const CapacityLedger before = l;
  auto d = l.admit_new_call(make_call(100, kPlain256), 2.0, PolicyKind::proposed);
  EXPECT_EQ(d.outcome, AdmissionOutcome::blocked);
  EXPECT_EQ(d.granted, 0.0);
  EXPECT_EQ(l, before);
}

TEST(AdmitNewCall, EmptyLedgerAdmits) {
  CapacityLedger l(6000.0, 10.0);
  auto d = l.admit_new_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed);
  EXPECT_TRUE(d.admitted());
  EXPECT_EQ(d.granted, 256.0);
  EXPECT_EQ(l.occupied(), 256.0);
}

TEST(AdmitNewCall, NoPriorityIgnoresReservations) {
  CapacityLedger l = nearly_full_with_reservation();
  auto d = l.admit_new_call(make_call(100, kPlain256), 2.0, PolicyKind::no_priority);
  EXPECT_TRUE(d.admitted());
}

TEST(AdmitNewCall, DuplicateIdIsConsistencyError) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed);
  EXPECT_THROW(l.admit_new_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed), ConsistencyError);
  EXPECT_THROW(l.admit_handover_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed), ConsistencyError);
}

// ---- handover admission ------------------------------------------------------

TEST(AdmitHandoverCall, UsesReservedThenDegradation) {
  // Three adaptive calls (releasable 384) and exactly 100 kbps free, all reserved.
  CapacityLedger l(6000.0, 10.0);
  for (CallId id = 1; id <= 3; ++id) l.admit_new_call(make_call(id, kAdaptive256), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(4, plain(5132.0)), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(5, plain(100.0)), 0.0, PolicyKind::proposed);
  l.release_call(5, 0.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);
  ASSERT_EQ(l.free_bandwidth(), 100.0);
  ASSERT_EQ(l.vacant_reserved(1.0), 100.0);
  ASSERT_EQ(l.total_releasable(), 384.0);

  auto d = l.admit_handover_call(make_call(10, kPlain256), 1.0, PolicyKind::proposed);
  ASSERT_TRUE(d.admitted());
  EXPECT_EQ(d.granted, 256.0);
  EXPECT_EQ(d.reserved_consumed, 100.0);
  Kbps degraded = 0.0;
  for (const auto& g : d.degraded_calls) degraded += g.amount;
  EXPECT_NEAR(degraded, 156.0, 1e-9);
  // Equal headroom: ascending id.
  ASSERT_EQ(d.degraded_calls.size(), 2u);
  EXPECT_EQ(d.degraded_calls[0], (Degradation{1, 128.0}));
  EXPECT_EQ(d.degraded_calls[1].call, 2u);
  EXPECT_NEAR(d.degraded_calls[1].amount, 28.0, 1e-9);
  EXPECT_TRUE(l.reservations().empty());
  EXPECT_TRUE(l.check_invariants(1.0).empty());
}

TEST(AdmitHandoverCall, EmptyLedgerNeedsNothingElse) {
  CapacityLedger l(6000.0, 10.0);
  auto d = l.admit_handover_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed);
  EXPECT_TRUE(d.admitted());
  EXPECT_TRUE(d.degraded_calls.empty());
  EXPECT_EQ(d.reserved_consumed, 0.0);
}

TEST(AdmitHandoverCall, NoResourceAnywhereDrops) {
  CapacityLedger l(512.0, 10.0);
  l.admit_new_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(2, kPlain256), 0.0, PolicyKind::proposed);
  const CapacityLedger before = l;
  auto d = l.admit_handover_call(make_call(3, kPlain256), 0.0, PolicyKind::proposed);
  EXPECT_EQ(d.outcome, AdmissionOutcome::dropped);
  EXPECT_EQ(d.granted, 0.0);
  EXPECT_EQ(l, before);
}

TEST(AdmitHandoverCall, FreeUnreservedBeforeReserved) {
  CapacityLedger l(1000.0, 10.0);
  l.admit_new_call(make_call(1, plain(300.0)), 0.0, PolicyKind::proposed);
  l.release_call(1, 0.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);
  // 700 free unreserved, 300 reserved.
  auto d = l.admit_handover_call(make_call(2, kPlain256), 1.0, PolicyKind::proposed);
  EXPECT_TRUE(d.admitted());
  EXPECT_EQ(d.reserved_consumed, 0.0);
  EXPECT_EQ(l.vacant_reserved(1.0), 300.0);
}

TEST(AdmitHandoverCall, ConsumesEarliestExpiringReservationFirst) {
  CapacityLedger l(600.0, 10.0);
  l.admit_new_call(make_call(1, plain(200.0)), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(2, plain(200.0)), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(3, plain(200.0)), 0.0, PolicyKind::proposed);
  l.release_call(1, 1.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);  // exp 11
  l.release_call(2, 2.0, ReleaseReason::femtocell_departed, PolicyKind::proposed);      // exp 12
  auto d = l.admit_handover_call(make_call(4, plain(250.0)), 3.0, PolicyKind::proposed);
  ASSERT_TRUE(d.admitted());
  EXPECT_EQ(d.reserved_consumed, 250.0);
  ASSERT_EQ(l.reservations().size(), 1u);
  EXPECT_EQ(l.reservations().front().expires_at, 12.0);
  EXPECT_EQ(l.reservations().front().amount, 150.0);
  EXPECT_EQ(l.reservations().front().created_at, 2.0);
}

TEST(AdmitHandoverCall, ReservationOnlyNeverDegrades) {
  CapacityLedger l(512.0, 10.0);
  l.admit_new_call(make_call(1, kAdaptive256), 0.0, PolicyKind::reservation_only);
  l.admit_new_call(make_call(2, kAdaptive256), 0.0, PolicyKind::reservation_only);
  auto d = l.admit_handover_call(make_call(3, plain(128.0)), 0.0, PolicyKind::reservation_only);
  EXPECT_EQ(d.outcome, AdmissionOutcome::dropped);
  auto d2 = l.admit_handover_call(make_call(3, plain(128.0)), 0.0, PolicyKind::adaptation_only);
  EXPECT_TRUE(d2.admitted());
}

// ---- degradation -------------------------------------------------------------

TEST(DegradeFor, GreedyDescendingHeadroom) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(7, ServiceClass{2, 128.0, true, 0.5}), 0.0, PolicyKind::proposed);  // headroom 64
  l.admit_new_call(make_call(9, kAdaptive256), 0.0, PolicyKind::proposed);                        // headroom 128
  auto out = l.degrade_for(150.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (Degradation{9, 128.0}));
  EXPECT_EQ(out[1].call, 7u);
  EXPECT_NEAR(out[1].amount, 22.0, 1e-9);
  EXPECT_EQ(l.degradation_log().size(), 2u);
  EXPECT_TRUE(l.check_invariants(0.0).empty());
}

TEST(DegradeFor, ZeroDeficitChangesNothing) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, kAdaptive256), 0.0, PolicyKind::proposed);
  const CapacityLedger before = l;
  EXPECT_TRUE(l.degrade_for(0.0).empty());
  EXPECT_EQ(l, before);
}

TEST(DegradeFor, ExactHeadroomLandsOnFloor) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, kAdaptive256), 0.0, PolicyKind::proposed);
  auto out = l.degrade_for(128.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(l.find(1)->alloc, kAdaptive256.floor());
  EXPECT_EQ(l.total_releasable(), 0.0);
}

TEST(DegradeFor, DeficitBeyondReleasableIsContractViolation) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, kAdaptive256), 0.0, PolicyKind::proposed);
  EXPECT_THROW(l.degrade_for(200.0), ConsistencyError);
}

// ---- release -----------------------------------------------------------------

TEST(ReleaseCall, MacroToFemtoReservesForThresholdTime) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed);
  EXPECT_EQ(l.release_call(1, 5.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed), 256.0);
  ASSERT_EQ(l.reservations().size(), 1u);
  EXPECT_EQ(l.reservations().front(),
            (ReservationEntry{256.0, 5.0, 15.0, ReservationSource::user_macro_to_femto}));
}

TEST(ReleaseCall, NaturalEndGoesToPool) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, kPlain256), 0.0, PolicyKind::proposed);
  l.release_call(1, 5.0, ReleaseReason::natural_end, PolicyKind::proposed);
  EXPECT_TRUE(l.reservations().empty());
  EXPECT_EQ(l.free_unreserved(5.0), 6000.0);
}

TEST(ReleaseCall, NoPriorityNeverReserves) {
  CapacityLedger l(6000.0, 10.0);
  l.admit_new_call(make_call(1, kPlain256), 0.0, PolicyKind::no_priority);
  l.release_call(1, 5.0, ReleaseReason::femtocell_departed, PolicyKind::no_priority);
  EXPECT_TRUE(l.reservations().empty());
  l.admit_new_call(make_call(2, kPlain256), 0.0, PolicyKind::adaptation_only);
  l.release_call(2, 5.0, ReleaseReason::macro_to_femto_handover, PolicyKind::adaptation_only);
  EXPECT_TRUE(l.reservations().empty());
}

TEST(ReleaseCall, UnknownIdIsConsistencyError) {
  CapacityLedger l(6000.0, 10.0);
  EXPECT_THROW(l.release_call(42, 0.0, ReleaseReason::natural_end, PolicyKind::proposed), ConsistencyError);
}

// ---- restoration -------------------------------------------------------------

namespace {

// Call 1 (adaptive, beta 256) degraded to 128; 300 kbps held in a
// reservation created at t=0 that expires at t=10.
CapacityLedger degraded_behind_reservation() {
  CapacityLedger l(684.0, 10.0);
  l.admit_new_call(make_call(1, kAdaptive256), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(2, plain(300.0)), 0.0, PolicyKind::proposed);
  l.admit_new_call(make_call(3, plain(128.0)), 0.0, PolicyKind::proposed);
  l.admit_handover_call(make_call(4, plain(128.0)), 0.0, PolicyKind::proposed);
  l.release_call(2, 0.0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);
  return l;
}

}  // namespace

TEST(RestoreDegraded, RestoresFromFreeUnreserved) {
  CapacityLedger l = degraded_behind_reservation();
  ASSERT_EQ(l.find(1)->alloc, 128.0);
  l.expire_reservations(10.0);
  ASSERT_EQ(l.free_unreserved(10.0), 300.0);
  EXPECT_EQ(l.restore_degraded(10.0), 128.0);
  EXPECT_EQ(l.find(1)->alloc, 256.0);
  EXPECT_TRUE(l.degradation_log().empty());
  EXPECT_TRUE(l.check_invariants(10.0).empty());
}

TEST(RestoreDegraded, NeverTouchesReservedBandwidth) {
  CapacityLedger l = degraded_behind_reservation();
  ASSERT_EQ(l.free_unreserved(5.0), 0.0);
  EXPECT_EQ(l.restore_degraded(5.0), 0.0);
  EXPECT_EQ(l.find(1)->alloc, 128.0);
}

TEST(RestoreDegraded, SkipsAndPurgesDepartedCalls) {
  CapacityLedger l = degraded_behind_reservation();
  ASSERT_FALSE(l.degradation_log().empty());
  l.release_call(1, 1.0, ReleaseReason::natural_end, PolicyKind::proposed);
  l.restore_degraded(1.0);
  EXPECT_TRUE(l.degradation_log().empty());
}

// ---- backhaul loads ----------------------------------------------------------

TEST(Backhaul, AggregateAdmissionAndDepartureReservation) {
  CapacityLedger l(2000.0, 10.0);
  auto d = l.admit_backhaul(3, 1024.0, 0.0, PolicyKind::proposed);
  ASSERT_TRUE(d.admitted());
  EXPECT_EQ(l.backhaul_load(3), 1024.0);
  EXPECT_EQ(l.occupied(), 1024.0);
  l.release_backhaul(3, -1.0, 4.0, ReleaseReason::femtocell_departed, PolicyKind::proposed);
  EXPECT_EQ(l.backhaul_load(3), 0.0);
  ASSERT_EQ(l.reservations().size(), 1u);
  EXPECT_EQ(l.reservations().front(),
            (ReservationEntry{1024.0, 4.0, 14.0, ReservationSource::femtocell_departure}));
  EXPECT_TRUE(l.check_invariants(4.0).empty());
}

// ---- properties --------------------------------------------------------------

namespace {

struct Harness {
  std::mt19937_64 rng;
  CapacityLedger ledger;
  PolicyKind policy;
  CallId next_id = 1;
  Seconds now = 0.0;
  std::vector<ServiceClass> classes{
      ServiceClass{0, 256.0, true, 0.5}, ServiceClass{1, 256.0, false, 0.0},
      ServiceClass{2, 128.0, true, 0.25}, ServiceClass{3, 384.0, true, 1.0},
      ServiceClass{4, 64.0, false, 0.0}};

  Harness(std::uint64_t seed, PolicyKind p) : rng(seed), ledger(2048.0, 10.0), policy(p) {}

  Call random_call() {
    std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
    return make_call(next_id++, classes[pick(rng)], now);
  }

  CallId random_active() {
    std::uniform_int_distribution<std::size_t> pick(0, ledger.active_calls().size() - 1);
    auto it = ledger.active_calls().begin();
    std::advance(it, static_cast<std::ptrdiff_t>(pick(rng)));
    return it->first;
  }
};

}  // namespace

TEST(LedgerProperties, RandomOperationSequencesKeepInvariants) {
  for (PolicyKind policy : kAllPolicies) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Harness h(seed, policy);
      std::uniform_int_distribution<int> op(0, 5);
      std::uniform_real_distribution<double> dt(0.0, 4.0);
      for (int step = 0; step < 2000; ++step) {
        const int o = op(h.rng);
        if (o == 0 || o == 1) {
          const Call c = h.random_call();
          const CapacityLedger before = h.ledger;
          auto d = o == 0 ? h.ledger.admit_new_call(c, h.now, policy)
                          : h.ledger.admit_handover_call(c, h.now, policy);
          if (!d.admitted()) {
            ASSERT_EQ(h.ledger, before) << "rejection mutated the ledger";
            ASSERT_EQ(d.granted, 0.0);
          } else {
            ASSERT_EQ(d.granted, c.alloc);
          }
        } else if ((o == 2 || o == 3) && !h.ledger.active_calls().empty()) {
          std::uniform_int_distribution<int> reason(0, 3);
          h.ledger.release_call(h.random_active(), h.now, static_cast<ReleaseReason>(reason(h.rng)), policy);
        } else if (o == 4) {
          h.now += dt(h.rng);
          h.ledger.expire_reservations(h.now);
        } else {
          h.ledger.restore_degraded(h.now);
        }
        const auto bad = h.ledger.check_invariants(h.now);
        ASSERT_TRUE(bad.empty()) << to_string(policy) << " seed " << seed << ": " << bad.front();
        if (!adapts(policy)) ASSERT_TRUE(h.ledger.degradation_log().empty());
        if (!reserves(policy)) ASSERT_TRUE(h.ledger.reservations().empty());
      }
    }
  }
}

TEST(LedgerProperties, HandoverAdmitsWheneverNewCallWould) {
  for (PolicyKind policy : kAllPolicies) {
    Harness h(99, policy);
    std::uniform_real_distribution<double> dt(0.0, 3.0);
    for (int step = 0; step < 3000; ++step) {
      const Call probe = h.random_call();
      CapacityLedger as_new = h.ledger, as_handover = h.ledger;
      const bool new_ok = as_new.admit_new_call(probe, h.now, policy).admitted();
      const bool ho_ok = as_handover.admit_handover_call(probe, h.now, policy).admitted();
      if (new_ok) ASSERT_TRUE(ho_ok);
      if (policy == PolicyKind::no_priority) ASSERT_EQ(new_ok, ho_ok);
      // Evolve the state.
      if (h.rng() % 3 != 0) {
        h.ledger.admit_handover_call(h.random_call(), h.now, policy);
      } else if (!h.ledger.active_calls().empty()) {
        h.ledger.release_call(h.random_active(), h.now,
                              h.rng() % 2 ? ReleaseReason::macro_to_femto_handover : ReleaseReason::natural_end,
                              policy);
      }
      h.now += dt(h.rng);
      h.ledger.expire_reservations(h.now);
    }
  }
}

TEST(LedgerProperties, ReservationLivesExactlyThresholdTime) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> when(0.0, 1000.0), amount(1.0, 500.0), t_dist(0.5, 30.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Seconds T = t_dist(rng);
    CapacityLedger l(6000.0, T);
    const Seconds t0 = when(rng);
    const Kbps a = amount(rng);
    l.admit_new_call(make_call(1, plain(a)), 0.0, PolicyKind::proposed);
    l.release_call(1, t0, ReleaseReason::macro_to_femto_handover, PolicyKind::proposed);
    std::uniform_real_distribution<double> inside(t0, t0 + T);
    for (int q = 0; q < 20; ++q) {
      const Seconds tq = inside(rng);
      if (tq < t0 + T) ASSERT_EQ(l.vacant_reserved(tq), a);
    }
    ASSERT_EQ(l.vacant_reserved(t0 + T), 0.0);
    ASSERT_EQ(l.vacant_reserved(t0 + T + when(rng)), 0.0);
  }
}

TEST(LedgerProperties, AdaptiveFloorsHoldUnderHeavyDegradation) {
  CapacityLedger l(4096.0, 10.0);
  CallId id = 1;
  for (; id <= 16; ++id) l.admit_new_call(make_call(id, kAdaptive256), 0.0, PolicyKind::proposed);
  // Keep pushing handovers until no headroom remains.
  while (l.admit_handover_call(make_call(id, plain(100.0)), 0.0, PolicyKind::proposed).admitted()) ++id;
  for (const auto& [cid, call] : l.active_calls())
    if (call.service.adaptive) EXPECT_GE(call.alloc, call.service.floor() - kBandwidthTolerance);
  EXPECT_LE(l.total_releasable(), 100.0);
  EXPECT_TRUE(l.check_invariants(0.0).empty());
}

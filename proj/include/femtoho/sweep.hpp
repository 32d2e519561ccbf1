#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "femtoho/engine.hpp"

namespace femtoho {

struct SweepRow {
  PolicyKind policy = PolicyKind::proposed;
  double load_multiplier = 1.0;
  std::uint64_t seed = 0;
  MetricsReport report;
};

struct Estimate {
  double mean = 0.0;
  double ci95 = 0.0;  // half-width; 0 for a single sample
};

/// Sample mean and Student-t 95% confidence half-width.
inline Estimate estimate(std::span<const double> xs) {
  Estimate e;
  if (xs.empty()) return e;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) e.mean += x;
  e.mean /= n;
  if (xs.size() < 2) return e;
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  e.ci95 = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
  return e;
}

/// Standard error of the mean.
inline double standard_error(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

struct AggregateRow {
  PolicyKind policy = PolicyKind::proposed;
  double load_multiplier = 1.0;
  std::size_t runs = 0;
  Estimate handover_drop_prob;
  Estimate new_block_prob;
  Estimate utilization;
  Estimate mean_reserved_kbps;
  Estimate degradation_events;
};

struct SweepTable {
  std::vector<SweepRow> rows;           // policy-major, then load, then seed
  std::vector<AggregateRow> aggregates; // policy-major, then load
};

inline std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows) {
  std::vector<AggregateRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].policy == rows[i].policy &&
           rows[j].load_multiplier == rows[i].load_multiplier)
      ++j;
    std::vector<double> drop, block, util, reserved, degr;
    for (std::size_t k = i; k < j; ++k) {
      const auto& r = rows[k].report;
      drop.push_back(r.handover_drop_prob);
      block.push_back(r.new_block_prob);
      util.push_back(r.utilization);
      reserved.push_back(r.mean_reserved_kbps);
      degr.push_back(static_cast<double>(r.degradation_events));
    }
    AggregateRow a;
    a.policy = rows[i].policy;
    a.load_multiplier = rows[i].load_multiplier;
    a.runs = j - i;
    a.handover_drop_prob = estimate(drop);
    a.new_block_prob = estimate(block);
    a.utilization = estimate(util);
    a.mean_reserved_kbps = estimate(reserved);
    a.degradation_events = estimate(degr);
    out.push_back(a);
    i = j;
  }
  return out;
}

/// Runs every (policy, multiplier, seed) combination.  Runs are independent
/// and may execute on `jobs` threads; rows are ordered by input index.
inline SweepTable sweep(const ScenarioConfig& base, std::span<const double> multipliers,
                        std::span<const std::uint64_t> seeds, std::span<const PolicyKind> policies,
                        unsigned jobs = 0) {
  if (multipliers.empty() || seeds.empty() || policies.empty())
    throw ConfigError("sweep: need at least one load multiplier, seed, and policy");
  SweepTable table;
  for (PolicyKind p : policies)
    for (double mult : multipliers)
      for (std::uint64_t seed : seeds) {
        SweepRow row;
        row.policy = p;
        row.load_multiplier = mult;
        row.seed = seed;
        table.rows.push_back(row);
      }
  // Validate once up front so errors surface before any run starts.
  base.validate();

  auto run_one = [&](SweepRow& row) {
    ScenarioConfig cfg = with_load_multiplier(base, row.load_multiplier);
    cfg.policy = row.policy;
    cfg.seed = row.seed;
    row.report = run(cfg);
  };

  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, table.rows.size()));
  if (jobs <= 1) {
    for (auto& row : table.rows) run_one(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < table.rows.size();) {
          try {
            run_one(table.rows[k]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  table.aggregates = aggregate(table.rows);
  return table;
}

}  // namespace femtoho

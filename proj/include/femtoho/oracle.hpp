#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "femtoho/core.hpp"

namespace femtoho::oracle {

struct LossSystemSpec {
  int channels = 1;
  double offered_load = 0.0;  // erlangs
};

/// Erlang-B blocking via B(0) = 1, B(k) = a B(k-1) / (k + a B(k-1)).
inline double erlang_b(const LossSystemSpec& spec) {
  if (spec.channels < 1) throw ConfigError("erlang_b: channels must be >= 1");
  if (!(spec.offered_load >= 0.0) || !std::isfinite(spec.offered_load))
    throw ConfigError("erlang_b: offered load must be a non-negative number");
  const double a = spec.offered_load;
  double b = 1.0;
  for (int k = 1; k <= spec.channels; ++k) b = a * b / (k + a * b);
  return b;
}

inline double erlang_b(int channels, double offered_load) {
  return erlang_b(LossSystemSpec{channels, offered_load});
}

enum class AdmissionRule {
  complete_sharing,  // admit while the demand fits
  guard,             // admit while occupancy + demand <= capacity - guard_i
};

struct CtmcClass {
  double arrival_rate = 0.0;
  double service_rate = 1.0;
  int demand = 1;
  int guard = 0;
};

struct CtmcSpec {
  std::vector<CtmcClass> classes;
  int capacity = 1;
  AdmissionRule rule = AdmissionRule::complete_sharing;
};

inline constexpr std::uint64_t kMaxCtmcStates = 1'000'000;
inline constexpr std::size_t kDenseSolveLimit = 2'000;

class StateSpaceTooLarge : public std::runtime_error {
public:
  explicit StateSpaceTooLarge(std::uint64_t states)
      : std::runtime_error("CTMC state space of " + std::to_string(states) +
                           " states exceeds the bound of " + std::to_string(kMaxCtmcStates)),
        states_(states) {}
  std::uint64_t states() const { return states_; }

private:
  std::uint64_t states_;
};

struct CtmcResult {
  std::vector<double> blocking;  // per class
  std::size_t states = 0;
  double residual = 0.0;         // max |pi Q|
  double probability_mass = 0.0; // sum of pi
  double min_probability = 0.0;
};

/// Number of occupancy vectors n with sum n_i d_i <= capacity, saturating
/// just above the state bound.
inline std::uint64_t count_ctmc_states(const CtmcSpec& spec) {
  const auto cap = static_cast<std::size_t>(spec.capacity);
  std::vector<std::uint64_t> ways(cap + 1, 0);
  ways[0] = 1;
  const std::uint64_t ceiling = kMaxCtmcStates * 4;
  for (const auto& c : spec.classes) {
    std::vector<std::uint64_t> next(cap + 1, 0);
    for (std::size_t used = 0; used <= cap; ++used) {
      if (!ways[used]) continue;
      for (std::size_t u = used; u <= cap; u += static_cast<std::size_t>(c.demand))
        next[u] = std::min(ceiling, next[u] + ways[used]);
    }
    ways = std::move(next);
  }
  std::uint64_t total = 0;
  for (auto w : ways) total = std::min(ceiling, total + w);
  return total;
}

namespace detail {

inline void validate(const CtmcSpec& spec) {
  if (spec.classes.empty()) throw ConfigError("ctmc: at least one class is required");
  if (spec.capacity < 0) throw ConfigError("ctmc: capacity must be non-negative");
  for (const auto& c : spec.classes) {
    if (c.demand < 1) throw ConfigError("ctmc: demands must be positive integers");
    if (!(c.arrival_rate >= 0.0)) throw ConfigError("ctmc: arrival rates must be non-negative");
    if (!(c.service_rate > 0.0)) throw ConfigError("ctmc: service rates must be positive");
    if (c.guard < 0) throw ConfigError("ctmc: guard must be non-negative");
  }
}

inline bool admissible(const CtmcSpec& spec, int used, std::size_t cls) {
  const auto& c = spec.classes[cls];
  const int limit = spec.rule == AdmissionRule::guard ? spec.capacity - c.guard : spec.capacity;
  return used + c.demand <= limit;
}

}  // namespace detail

/// Steady-state per-class blocking of a multi-class loss system with a
/// state-dependent admission rule.  Arrivals are Poisson, so blocking is
/// the stationary mass of states where the class would be refused.
inline CtmcResult ctmc_blocking(const CtmcSpec& spec) {
  detail::validate(spec);
  const std::uint64_t size = count_ctmc_states(spec);
  if (size > kMaxCtmcStates) throw StateSpaceTooLarge(size);

  const std::size_t k = spec.classes.size();
  std::vector<std::uint64_t> radix(k);
  std::uint64_t stride = 1;
  std::vector<std::uint64_t> strides(k);
  for (std::size_t i = 0; i < k; ++i) {
    radix[i] = static_cast<std::uint64_t>(spec.capacity / spec.classes[i].demand) + 1;
    strides[i] = stride;
    if (stride > std::numeric_limits<std::uint64_t>::max() / radix[i])
      throw StateSpaceTooLarge(std::numeric_limits<std::uint64_t>::max());
    stride *= radix[i];
  }

  // Enumerate feasible occupancy vectors in lexicographic order.
  std::vector<std::vector<int>> states;
  std::vector<int> used_of;
  std::unordered_map<std::uint64_t, std::size_t> index;
  states.reserve(size);
  std::vector<int> n(k, 0);
  for (;;) {
    int used = 0;
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < k; ++i) {
      used += n[i] * spec.classes[i].demand;
      code += static_cast<std::uint64_t>(n[i]) * strides[i];
    }
    if (used <= spec.capacity) {
      index.emplace(code, states.size());
      states.push_back(n);
      used_of.push_back(used);
    }
    std::size_t i = 0;
    while (i < k && static_cast<std::uint64_t>(++n[i]) >= radix[i]) n[i++] = 0;
    if (i == k) break;
  }
  const std::size_t m = states.size();

  auto code_of = [&](const std::vector<int>& v) {
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < k; ++i) code += static_cast<std::uint64_t>(v[i]) * strides[i];
    return code;
  };

  struct Transition {
    std::size_t from, to;
    double rate;
  };
  std::vector<Transition> transitions;
  std::vector<double> outflow(m, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    std::vector<int> v = states[s];
    for (std::size_t i = 0; i < k; ++i) {
      const auto& c = spec.classes[i];
      if (c.arrival_rate > 0.0 && detail::admissible(spec, used_of[s], i)) {
        ++v[i];
        transitions.push_back({s, index.at(code_of(v)), c.arrival_rate});
        outflow[s] += c.arrival_rate;
        --v[i];
      }
      if (v[i] > 0) {
        --v[i];
        const double rate = (v[i] + 1) * c.service_rate;
        transitions.push_back({s, index.at(code_of(v)), rate});
        outflow[s] += rate;
        ++v[i];
      }
    }
  }

  std::vector<double> pi(m, 0.0);
  if (m == 1) {
    pi[0] = 1.0;
  } else if (m <= kDenseSolveLimit) {
    // Solve Q^T pi = 0 with the last balance equation replaced by sum = 1.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (const auto& t : transitions) a(static_cast<Eigen::Index>(t.to), static_cast<Eigen::Index>(t.from)) += t.rate;
    for (std::size_t s = 0; s < m; ++s) a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) -= outflow[s];
    a.row(static_cast<Eigen::Index>(m - 1)).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    rhs(static_cast<Eigen::Index>(m - 1)) = 1.0;
    Eigen::VectorXd x = a.partialPivLu().solve(rhs);
    for (std::size_t s = 0; s < m; ++s) pi[s] = std::max(0.0, x(static_cast<Eigen::Index>(s)));
  } else {
    // Gauss-Seidel on the global balance equations.
    std::vector<std::vector<std::pair<std::size_t, double>>> incoming(m);
    for (const auto& t : transitions) incoming[t.to].push_back({t.from, t.rate});
    std::fill(pi.begin(), pi.end(), 1.0 / static_cast<double>(m));
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double change = 0.0;
      for (std::size_t s = 0; s < m; ++s) {
        if (outflow[s] <= 0.0) continue;
        double in = 0.0;
        for (const auto& [from, rate] : incoming[s]) in += pi[from] * rate;
        const double updated = in / outflow[s];
        change = std::max(change, std::abs(updated - pi[s]));
        pi[s] = updated;
      }
      double total = 0.0;
      for (double p : pi) total += p;
      for (double& p : pi) p /= total;
      if (change < 1e-13) break;
    }
  }
  double total = 0.0;
  for (double p : pi) total += p;
  for (double& p : pi) p /= total;

  CtmcResult r;
  r.states = m;
  std::vector<double> balance(m, 0.0);
  for (const auto& t : transitions) balance[t.to] += pi[t.from] * t.rate;
  for (std::size_t s = 0; s < m; ++s) {
    balance[s] -= pi[s] * outflow[s];
    r.residual = std::max(r.residual, std::abs(balance[s]));
  }
  r.probability_mass = 0.0;
  r.min_probability = pi.empty() ? 0.0 : pi[0];
  for (double p : pi) {
    r.probability_mass += p;
    r.min_probability = std::min(r.min_probability, p);
  }
  r.blocking.assign(k, 0.0);
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t i = 0; i < k; ++i)
      if (!detail::admissible(spec, used_of[s], i)) r.blocking[i] += pi[s];
  return r;
}

}  // namespace femtoho::oracle

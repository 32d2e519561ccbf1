#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace femtoho {

// Process types that own an independent random substream.  New entries go
// at the end so existing substreams keep their seeds.
enum class StreamKind : std::uint64_t {
  new_call_arrivals = 1,
  new_call_attributes,
  macro_handover_arrivals,
  macro_handover_attributes,
  femto_handover_arrivals,
  femto_handover_attributes,
  macro_to_femto_arrivals,
  macro_to_femto_selection,
  onboard_call_arrivals,
  onboard_call_attributes,
  alighting,
  boarding,
  test,
};

// SplitMix64 finalizer, used only to derive substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Substream seed: a function of (run seed, process type, entity index) only.
constexpr std::uint64_t substream_seed(std::uint64_t seed, StreamKind kind,
                                       std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(kind)) ^ index);
}

// A seedable 64-bit Mersenne Twister stream.  Copying the object clones
// its state, which replays the same draws.
class RandomStream {
public:
  using result_type = std::mt19937_64::result_type;

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t seed, StreamKind kind, std::uint64_t index = 0)
      : engine_(substream_seed(seed, kind, index)) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  bool operator==(const RandomStream&) const = default;

private:
  std::mt19937_64 engine_;
};

}  // namespace femtoho

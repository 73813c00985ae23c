#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace wcs {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// What a stream is used for. Part of every key so that, for example, the
// plant roster and the training episodes never share draws even when the
// numeric seeds coincide.
enum class Purpose : std::uint64_t {
  Plants = 1,
  Init = 2,
  Train = 3,
  Pretrain = 4,
  Eval = 5,
  Policy = 6,
  Probe = 7,
  Step = 8,
  Observe = 9,
  Test = 10,
};

/**
 * Counter-based random stream.
 *
 * The stream is fully determined by a 64-bit key; the i-th output is
 * mix64(key + i * golden), i.e. SplitMix64 seeded with the key. Keys are
 * derived by hashing tuples like (purpose, seed, iteration, episode, step,
 * plant), so any draw can be reproduced without replaying earlier draws and
 * independent consumers never perturb each other.
 *
 * Satisfies UniformRandomBitGenerator, so the standard distributions apply.
 */
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0) noexcept : key_(key) {}

  static Stream keyed(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x6A09E667F3BCC909ULL;
    for (auto p : parts) h = mix64(h ^ mix64(p + 0x9E3779B97F4A7C15ULL));
    return Stream(h);
  }

  static Stream keyed(Purpose purpose, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(purpose) * 0xD1B54A32D192ED03ULL);
    for (auto p : parts) h = mix64(h ^ mix64(p + 0x9E3779B97F4A7C15ULL));
    return Stream(h);
  }

  // Child stream; independent of this stream's position.
  Stream substream(std::uint64_t index) const noexcept { return keyed({key_, index}); }
  Stream substream(std::uint64_t a, std::uint64_t b) const noexcept { return keyed({key_, a, b}); }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(*this);
  }

  double exponential(double rate) {
    std::exponential_distribution<double> dist(rate);
    return dist(*this);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace wcs

#pragma once

#include <cstdint>
#include <random>

namespace cordfo {

// Purpose tags keep streams for different jobs inside one run apart.
enum class StreamPurpose : std::uint64_t {
  run = 0,
  evaluation = 1,
  perturbation = 2,
  bootstrap = 3,
  coordinate = 4,
  spsa_direction = 5,
  line_search = 6,
  tuning = 7,
};

struct StreamKey {
  std::uint64_t replication = 0;
  std::uint64_t purpose = 0;
  std::uint64_t index = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (mix64(v + kGolden) + (h << 6) + (h >> 2)));
}

}  // namespace detail

/// Counter-based random stream. Draw number c of the stream keyed by
/// (seed, key) is mix64(base + c * golden), so any draw is a pure function of
/// (seed, key, c). Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, StreamKey key)
      : seed_(seed),
        key_(key),
        base_(detail::combine(
            detail::combine(detail::combine(detail::mix64(seed), key.replication), key.purpose),
            key.index)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return detail::mix64(base_ + (++counter_) * detail::kGolden); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal. A fresh distribution object per call keeps the stream
  /// free of cached state, so the counter alone fixes the position.
  double normal() { return std::normal_distribution<double>{}(*this); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>{0, n - 1}(*this);
  }

  /// Child stream with its own key; consumes one draw of this stream so that
  /// repeated forks with the same tag yield distinct children.
  RngStream fork(StreamPurpose purpose, std::uint64_t index = 0) {
    const std::uint64_t salt = (*this)();
    return RngStream(seed_, StreamKey{key_.replication, static_cast<std::uint64_t>(purpose),
                                      detail::combine(index, salt)});
  }

  std::uint64_t seed() const { return seed_; }
  const StreamKey& key() const { return key_; }
  std::uint64_t draw_counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  StreamKey key_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace cordfo

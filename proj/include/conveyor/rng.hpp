#pragma once

#include <cstdint>
#include <limits>

namespace conveyor {

// Counter-based random stream. The output is a keyed hash of (key, counter),
// so a stream is fully determined by its key and any number of streams can
// be created independently, in any order, on any thread.
// Satisfies UniformRandomBitGenerator for use with <random> distributions.
class RngStream
{
public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key) noexcept
    : key_(key)
  {
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept
  {
    std::uint64_t const x = mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
    return mix(x ^ key_);
  }

  // Uniform double in [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept
  {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Index used for per-shot draws (atom count, homogeneous noise) that belong to no atom.
inline constexpr std::uint64_t shot_level_index = std::numeric_limits<std::uint64_t>::max();

// Reproducible sub-stream for one (seed, point, shot, atom) tuple.
RngStream rng_stream(std::uint64_t seed, std::uint64_t point_index, std::uint64_t shot_index, std::uint64_t atom_index);

} // namespace conveyor

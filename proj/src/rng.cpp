#include "conveyor/rng.hpp"

namespace conveyor {

RngStream rng_stream(std::uint64_t seed, std::uint64_t point_index, std::uint64_t shot_index, std::uint64_t atom_index)
{
  // Chained absorption; each index passes through the full mixer so that
  // neighbouring tuples land on unrelated keys.
  std::uint64_t h = RngStream::mix(seed ^ 0x243f6a8885a308d3ULL);
  h = RngStream::mix(h ^ (point_index + 0x13198a2e03707344ULL));
  h = RngStream::mix(h ^ (shot_index + 0xa4093822299f31d0ULL));
  h = RngStream::mix(h ^ (atom_index + 0x082efa98ec4e6c89ULL));
  return RngStream{h};
}

} // namespace conveyor

#include "purcellsim/rng.hpp"

namespace purcellsim {

std::string_view stream_name(Stream s) {
  switch (s) {
    case Stream::ensemble: return "ensemble";
    case Stream::diffusion: return "diffusion";
    case Stream::decay: return "decay";
    case Stream::chain: return "chain";
    case Stream::dark: return "dark";
    case Stream::noise: return "noise";
    case Stream::bootstrap: return "bootstrap";
  }
  return "unknown";
}

Engine make_engine(std::uint64_t root_seed, Stream stream, std::uint64_t index,
                   std::uint64_t sub) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(root_seed), hi(root_seed), static_cast<std::uint32_t>(stream),
                    lo(index),     hi(index),     lo(sub),
                    hi(sub)};
  return Engine(seq);
}

}  // namespace purcellsim

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace purcellsim {

using Engine = std::mt19937_64;

// Named sub-streams of one root seed. Changing how one component consumes
// randomness leaves the other streams untouched.
enum class Stream : std::uint32_t {
  ensemble = 1,
  diffusion = 2,
  decay = 3,
  chain = 4,
  dark = 5,
  noise = 6,
  bootstrap = 7,
};

std::string_view stream_name(Stream s);

// Engine for (root seed, stream, index, sub-index). Work is partitioned into
// fixed-size blocks and each block owns an engine, so results do not depend
// on how blocks are scheduled onto threads.
Engine make_engine(std::uint64_t root_seed, Stream stream, std::uint64_t index = 0,
                   std::uint64_t sub = 0);

}  // namespace purcellsim

#pragma once

#include <cstdint>

#include "lowlat/archgraph.hpp"

namespace lowlat::testing {

// Encoder/decoder graphs shaped like the bundled variants but with random
// bands, strides, kernels, dilations and small widths.
ArchitectureSpec random_spec(uint64_t seed, bool noncausal = false);

} // namespace lowlat::testing

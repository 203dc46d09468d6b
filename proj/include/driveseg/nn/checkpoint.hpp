#pragma once

#include <cstdint>
#include <string>

#include "driveseg/nn/optimizer.hpp"

namespace driveseg::nn {

/// Self-describing JSON checkpoint: named shapes, row-major values at
/// round-trip precision, the RNG seed and the training step count.
void save_checkpoint(const ParameterSet& params, std::uint64_t seed, long step,
                     const std::string& path);

struct Checkpoint {
    ParameterSet params;
    std::uint64_t seed = 0;
    long step = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace driveseg::nn

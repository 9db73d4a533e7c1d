#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ecoperceiver/model.hpp"

namespace ecp {

// Versioned binary container "ECPT" v1, little-endian; holds the full model
// configuration, the active variable catalog, every parameter as named f32
// arrays, the training rng state, and the epoch counter. Layout documented
// in docs/formats.md.
struct CheckpointInfo {
    uint64_t seed = 0;
    std::array<uint64_t, 4> rng_state{};
    uint32_t epoch = 0;
};

void save_checkpoint(const std::string& path, const Model<float>& model, const CheckpointInfo& info);
Model<float> load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr);

}  // namespace ecp

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "srp/tensor.hpp"

namespace srp {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// On-disk layout: magic "SRPC", u32 version=1, u32 tensor count;
/// per tensor: u16 name length, name bytes, u8 dtype (0 = f32), u8 rank,
/// u32 per dim, little-endian f32 payload; then u64 rng seed state and a
/// u32-length-prefixed config snapshot text.
struct CheckpointContent {
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::vector<float> data;
    };
    std::vector<Entry> tensors;
    std::uint64_t seed_state = 0;
    std::string config_text;

    const Entry* find(const std::string& name) const {
        for (const auto& e : tensors)
            if (e.name == name) return &e;
        return nullptr;
    }
};

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr<float>>>& tensors,
                     std::uint64_t seed_state, const std::string& config_text);

CheckpointContent read_checkpoint(const std::string& path);

/// Copies checkpoint tensors into matching live tensors by name; every live
/// tensor must be present with an identical shape.
void load_state(const CheckpointContent& content,
                const std::vector<std::pair<std::string, TensorPtr<float>>>& tensors);

}  // namespace srp

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gatenet/data.hpp"
#include "gatenet/nn.hpp"

namespace gatenet {

/// Trained base network plus everything needed to reuse it: the input
/// normalization it was trained with and the class taxonomy.
struct BaseModel
{
    BaseParams<float> params;
    NormStats stats;
    Taxonomy taxonomy;
};

/// One task's trained gate biases, tied to the base they were trained on.
struct GateSet
{
    std::string task;
    std::vector<TensorF> biases;  // one 1 x N_h row per hidden layer
    std::uint64_t base_digest = 0;
};

/// Canonical checkpoint payload of a parameter set: every tensor, layer-major,
/// as little-endian IEEE-754 binary32.
std::vector<std::uint8_t> tensor_payload(std::span<const TensorF* const> tensors);

/// FNV-1a of the base checkpoint payload; gate sets record it to name the
/// base they belong to.
std::uint64_t base_digest(const BaseParams<float>& params);

}  // namespace gatenet

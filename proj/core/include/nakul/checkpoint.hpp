// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Binary tensor checkpoints: "NAKL", u32 version, u32 count, then per tensor
// u16 name length, name bytes, u8 rank, u32 dims, float32 values. All
// little-endian.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nakul/model.hpp"

namespace nakul {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void write_tensors(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_tensors(std::istream& in);

/// Model parameters plus the architecture under "hparam.*" entries, so a
/// checkpoint is enough to rebuild the model.
NamedTensors model_state(NakulModel& model);
void save_checkpoint(const std::string& path, NakulModel& model);

/// Rebuilds the architecture stored in `tensors`.
ModelConfig config_from_state(const NamedTensors& tensors);
/// Copies parameter values from `tensors`; throws ShapeError on any missing,
/// extra or mis-shaped entry.
void load_state(NakulModel& model, const NamedTensors& tensors);
NamedTensors load_tensors(const std::string& path);

}  // namespace nakul

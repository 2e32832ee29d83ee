#pragma once

#include <string>

#include "xraynet/model.hpp"

namespace xraynet {

// Binary checkpoint, little-endian throughout:
//   magic "XRN1"
//   u32 version (currently 1)
//   u32 config JSON length, UTF-8 JSON config blob
//   u32 tensor count
//   per tensor: u16 name length, name bytes, u8 dtype tag (0 = f32),
//               u8 ndim, u64 x ndim dims, raw f32 data
void saveCheckpoint(const ModelGraph& model, const std::string& path);
ModelGraph loadCheckpoint(const std::string& path);

std::string configToJson(const ModelConfig& config);
ModelConfig configFromJson(const std::string& json);

}  // namespace xraynet

#pragma once

#include <string>

#include "json.hpp"
#include "synctl/tensor.hpp"

namespace synctl {

// Flat binary checkpoint: magic string, u64 header length, JSON header
// (tensor names/shapes/offsets plus a free-form "meta" object), then the
// float64 payload, little-endian, in header order.
//
//   SYNCKPT1 | u64 header_len | header JSON | payload
inline constexpr char kCheckpointMagic[] = "SYNCKPT1";

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const nlohmann::json& meta);

// Returns the parameters; *meta (if non-null) receives the header's meta object.
ParameterSet load_checkpoint(const std::string& path, nlohmann::json* meta = nullptr);

}  // namespace synctl

#pragma once

#include <string>

#include "nlmi/json_io.hpp"
#include "nlmi/model.hpp"

namespace nlmi {

inline constexpr int kCheckpointFormatVersion = 1;

/// {"version", "config": {...}, "tensors": {"layers.0.A": {"shape": [...], "data": [...]}, ...}}
/// Tensor keys are "<module>.<index>.<name>"; data arrays are flat, row-major.
Json checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const Json& j);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace nlmi

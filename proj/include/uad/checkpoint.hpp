#pragma once

#include <filesystem>
#include <optional>

#include "uad/trainer.hpp"

namespace uad {

/// Single-file checkpoint: a magic line, one JSON header line (method,
/// architecture spec, training config, epochs and the tensor table), then raw
/// little-endian float32 parameter data in table order.
void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model);

/// Rebuilds the model from the embedded spec. When `expected` is given the
/// embedded spec must equal it (InvalidSpec otherwise). Throws UnreadableFile
/// on truncated or foreign files.
TrainedModel load_checkpoint(const std::filesystem::path& path, const std::optional<BottleneckSpec>& expected = {});

}  // namespace uad

#pragma once

#include <filesystem>

#include "mananet/core.hpp"
#include "mananet/model.hpp"

namespace mananet::model {

/// Everything needed to reproduce a trained window: configuration, the
/// feature normalization fitted on that window's training range, and the
/// parameter tensors.
struct Checkpoint {
  ModelConfig config;
  core::FeatureStats stats;
  ModelParams params;
};

/// Versioned text container; doubles are serialized as hex floats so the
/// round trip is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mananet::model

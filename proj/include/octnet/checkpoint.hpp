#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "octnet/models.hpp"
#include "octnet/network.hpp"

namespace octnet {

inline constexpr char kCheckpointMagic[4] = {'O', 'C', 'T', 'M'};
inline constexpr uint32_t kCheckpointVersion = 1;

// Header view of a checkpoint (everything except the parameter payload).
struct CheckpointInfo {
  uint32_t version = 0;
  std::string arch;
  int width_div = 1;
  Shape input_shape;  // per-sample
  std::vector<std::pair<std::string, Shape>> params;
  nlohmann::json config;  // training-config snapshot (may be null)
  uint64_t rng_state = 0;

  int64_t payload_bytes() const;
};

// Layout: magic "OCTM" | u32 version LE | u64 header length LE | JSON header |
// all parameter tensors (batch-norm running stats included) as little-endian
// f32 in the declared order. Writes go to a temp file renamed into place.
void save_checkpoint(Network<float>& net, ArchId arch, int width_div, const nlohmann::json& config,
                     uint64_t rng_state, const std::string& path);

struct LoadedCheckpoint {
  Network<float> net;
  CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::string& path);
CheckpointInfo peek_checkpoint(const std::string& path);

}  // namespace octnet

#pragma once

#include <string>
#include <vector>

#include "pearl/nn.hpp"
#include "pearl/train_state.hpp"

// Versioned model checkpoints: header (seed, resolved config echo + hash),
// train state, and every parameter tensor by registry name.
namespace pearl::ckpt {

struct ParamBlob {
  std::string name;
  ad::Mat value;
  bool trainable = true;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::string config_echo;  // resolved flat key=value text
  std::string config_hash;  // sha256 hex of config_echo
  train::TrainState state;
  std::vector<ParamBlob> params;  // registry order
};

// Captures the registry into a checkpoint struct (hash computed here).
Checkpoint snapshot(std::uint64_t seed, const std::string& config_echo,
                    const train::TrainState& state, const nn::ParamRegistry& reg);

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// Overwrites registry values and trainable flags from the checkpoint. The
// name sets and shapes must match exactly (same model configuration).
void apply_params(const Checkpoint& c, nn::ParamRegistry& reg);

}  // namespace pearl::ckpt

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "pearl/checkpoint.hpp"
#include "pearl/config.hpp"
#include "pearl/scoring.hpp"

// Command-line entry point: subcommand dispatch plus the checkpoint-to-model
// plumbing shared by score/evaluate/foil.
namespace pearl::cli {

// A model reconstructed from a checkpoint: config resolved from the stored
// echo, parameters applied on top of a same-seed skeleton.
struct LoadedModel {
  ckpt::Checkpoint checkpoint;
  scoring::ModelConfig model_config;
  std::unique_ptr<scoring::PearlModel> model;
};

LoadedModel load_model(const std::string& checkpoint_path,
                       std::optional<double> lambda_override);

// Runs one subcommand. Exit 0 on success, 1 on a runtime error (one JSON
// error line on stderr), 2 on usage errors or an unknown subcommand.
int dispatch(int argc, const char* const* argv);

}  // namespace pearl::cli

#pragma once

#include <vector>

// Training progress carried inside checkpoints.
namespace pearl::train {

struct TrainState {
  int epoch = 0;  // epochs completed
  std::vector<double> val_tau_c_history;
  int best_epoch = 0;  // 1-based index of the first maximum; 0 before epoch 1
  double best_val_tau_c = 0.0;
  bool stopped_early = false;
};

}  // namespace pearl::train

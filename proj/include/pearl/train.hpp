#pragma once

#include <string>
#include <vector>

#include "pearl/checkpoint.hpp"
#include "pearl/dataset.hpp"
#include "pearl/scoring.hpp"
#include "pearl/train_state.hpp"

// Single-model training over mixed reference-based/reference-free samples:
// Huber loss on the path scores, Adam, tau_c early stopping, and
// best-checkpoint selection.
namespace pearl::train {

enum class DatasetFilter { all, reference_based_only, reference_free_only };

std::string filter_name(DatasetFilter f);
DatasetFilter parse_filter(const std::string& s);  // all | ref-based | ref-free

struct TrainConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 16;
  int max_epochs = 5;
  double huber_delta = 1.0;
  std::uint64_t seed = 0;
  DatasetFilter dataset_filter = DatasetFilter::all;
};

// 0.5 e^2 inside |e| <= delta, delta (|e| - delta/2) outside, e = y - y_hat.
double huber_loss(double y, double y_hat, double delta);

// Loss on the pre-fusion path scores: reference-based averages the image and
// reference terms, reference-free uses the image term alone.
double sample_loss(const scoring::ScoreBreakdown& b, double y, double delta);
ad::Var sample_loss_var(const scoring::ScoreVars& v, double y, double delta);

// Early stopping on the validation history (most recent last): stop when the
// latest tau_c fails to improve on its predecessor.
bool should_stop(const std::vector<double>& history);
// 1-based index of the first maximum; 0 for an empty history.
int best_epoch_of(const std::vector<double>& history);

struct TrainResult {
  TrainState state;
  ckpt::Checkpoint best;                // parameters from the best epoch
  std::vector<double> epoch_mean_loss;  // mean training loss per epoch run
};

// Trains in place; the model is left holding the best epoch's parameters.
// config_echo is stored verbatim in the emitted checkpoint.
TrainResult train(scoring::PearlModel& model, const data::DatasetSplit& split,
                  const emb::ProviderSet& providers, const TrainConfig& cfg,
                  const std::string& config_echo = "");

}  // namespace pearl::train

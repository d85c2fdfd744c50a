#include "pearl/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "pearl/common.hpp"
#include "pearl/metrics.hpp"

namespace pearl::train {

using ad::Mat;
using ad::Var;

std::string filter_name(DatasetFilter f) {
  switch (f) {
    case DatasetFilter::all: return "all";
    case DatasetFilter::reference_based_only: return "ref-based";
    case DatasetFilter::reference_free_only: return "ref-free";
  }
  return "all";
}

DatasetFilter parse_filter(const std::string& s) {
  if (s == "all") return DatasetFilter::all;
  if (s == "ref-based") return DatasetFilter::reference_based_only;
  if (s == "ref-free") return DatasetFilter::reference_free_only;
  throw ConfigError("unknown dataset filter '" + s +
                    "' (expected all, ref-based, or ref-free)");
}

double huber_loss(double y, double y_hat, double delta) {
  if (delta <= 0.0) throw ValidationError("huber delta must be positive");
  const double e = std::abs(y - y_hat);
  return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

double sample_loss(const scoring::ScoreBreakdown& b, double y, double delta) {
  const double img = huber_loss(y, b.y_img, delta);
  if (b.setting == scoring::Setting::reference_free) return img;
  if (!b.y_ref.has_value()) {
    throw ValidationError("reference_based breakdown lacks y_ref");
  }
  return 0.5 * (img + huber_loss(y, *b.y_ref, delta));
}

Var sample_loss_var(const scoring::ScoreVars& v, double y, double delta) {
  if (delta <= 0.0) throw ValidationError("huber delta must be positive");
  const Mat target = Mat::Constant(1, 1, y);
  Var img = ad::huber_mean(v.y_img, target, delta);
  if (v.setting == scoring::Setting::reference_free) return img;
  if (!v.y_ref.has_value()) {
    throw ValidationError("reference_based score lacks y_ref");
  }
  return ad::scale(ad::add(img, ad::huber_mean(*v.y_ref, target, delta)), 0.5);
}

bool should_stop(const std::vector<double>& history) {
  const std::size_t n = history.size();
  return n >= 2 && history[n - 1] <= history[n - 2];
}

int best_epoch_of(const std::vector<double>& history) {
  if (history.empty()) return 0;
  const auto it = std::max_element(history.begin(), history.end());
  return int(it - history.begin()) + 1;
}

namespace {

bool keep_record(const data::CaptionRecord& r, DatasetFilter f) {
  switch (f) {
    case DatasetFilter::all: return true;
    case DatasetFilter::reference_based_only: return !r.references.empty();
    case DatasetFilter::reference_free_only: return r.references.empty();
  }
  return true;
}

void check_config(const TrainConfig& cfg) {
  if (cfg.lr <= 0.0) throw ConfigError("train.lr must be positive");
  if (cfg.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (cfg.huber_delta <= 0.0) throw ConfigError("train.huber_delta must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0,1)");
  }
}

void require_judgments(const std::vector<data::CaptionRecord>& records,
                       const char* which) {
  for (const auto& r : records) {
    if (!r.judgment.has_value()) {
      throw ValidationError(fmt::format(
          "{} record '{}' has no judgment", which, r.sample_id));
    }
  }
}

}  // namespace

TrainResult train(scoring::PearlModel& model, const data::DatasetSplit& split,
                  const emb::ProviderSet& providers, const TrainConfig& cfg,
                  const std::string& config_echo) {
  check_config(cfg);

  std::vector<data::CaptionRecord> train_set;
  for (const auto& r : split.train) {
    if (keep_record(r, cfg.dataset_filter)) train_set.push_back(r);
  }
  if (train_set.empty()) {
    throw ValidationError("training set is empty after filtering");
  }
  require_judgments(train_set, "training");
  require_judgments(split.validation, "validation");

  std::vector<double> val_judgments;
  for (const auto& r : split.validation) val_judgments.push_back(*r.judgment);
  if (val_judgments.size() < 2 ||
      std::all_of(val_judgments.begin(), val_judgments.end(),
                  [&](double v) { return v == val_judgments.front(); })) {
    throw ValidationError(
        "validation judgments are constant or too few; tau_c needs a richer "
        "validation set");
  }

  nn::ParamRegistry& reg = model.registry();
  if (model.config().arsm_mode == arsm::Mode::initial) {
    reg.set_trainable("img.arsm", false);
    reg.set_trainable("ref.arsm", false);
  }
  nn::Adam adam(reg, {cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  std::mt19937_64 shuffle_rng(derived_seed(cfg.seed, "train-shuffle"));

  TrainResult result;
  double best_tau = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t(0));

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t at = 0; at < order.size(); at += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), at + std::size_t(cfg.batch_size));
      reg.zero_grad();
      Var batch_loss;
      for (std::size_t i = at; i < end; ++i) {
        const auto& rec = train_set[order[i]];
        Var loss = sample_loss_var(model.score_vars(rec, providers),
                                   *rec.judgment, cfg.huber_delta);
        loss_sum += loss.scalar();
        batch_loss = (i == at) ? loss : ad::add(batch_loss, loss);
      }
      ad::backward(ad::scale(batch_loss, 1.0 / double(end - at)));
      adam.step();
    }
    result.epoch_mean_loss.push_back(loss_sum / double(train_set.size()));

    std::vector<double> val_scores;
    val_scores.reserve(split.validation.size());
    for (const auto& rec : split.validation) {
      val_scores.push_back(model.score(rec, providers).y_final);
    }
    // A collapsed epoch (all validation scores equal) carries no ranking
    // information; it counts as tau 0 so the stop rule sees no improvement.
    double tau = 0.0;
    try {
      tau = metrics::kendall_tau_c(val_scores, val_judgments);
    } catch (const UndefinedCorrelationError&) {
      tau = 0.0;
    }
    result.state.val_tau_c_history.push_back(tau);
    result.state.epoch = epoch;

    if (tau > best_tau) {
      best_tau = tau;
      result.best = ckpt::snapshot(cfg.seed, config_echo, result.state, reg);
    }
    if (should_stop(result.state.val_tau_c_history)) {
      result.state.stopped_early = true;
      break;
    }
  }

  result.state.best_epoch = best_epoch_of(result.state.val_tau_c_history);
  result.state.best_val_tau_c = best_tau;
  result.best.state = result.state;
  ckpt::apply_params(result.best, reg);
  return result;
}

}  // namespace pearl::train

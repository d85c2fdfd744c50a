#pragma once

#include <string>
#include <vector>

#include "pearl/dataset.hpp"
#include "pearl/metrics.hpp"
#include "pearl/scoring.hpp"
#include "pearl/train.hpp"

// Benchmark, FOIL, and ablation harnesses over trained models.
namespace pearl::eval {

struct BenchmarkResult {
  metrics::CorrelationReport report;
  double wall_seconds = 0.0;
  std::int64_t n_scored = 0;
};

// Scores every record and correlates y_final against the judgments.
BenchmarkResult run_benchmark(
    const scoring::PearlModel& model,
    const std::vector<data::CaptionRecord>& records,
    const emb::ProviderSet& providers,
    scoring::SettingPolicy policy = scoring::SettingPolicy::auto_detect);

// Percentage of pairs where the correct caption strictly outscores the foil;
// ties count as failures. n_refs picks how many of each pair's references are
// used (reference-based scoring); the reference-free policy ignores them.
double foil_accuracy(const scoring::PearlModel& model,
                     const std::vector<data::FoilPair>& pairs,
                     const emb::ProviderSet& providers,
                     scoring::SettingPolicy policy, int n_refs);

// One factor-at-a-time ablation grid: each axis value yields one row trained
// from the shared seed with that single field changed from the base.
struct AblationAxes {
  std::vector<arsm::Mode> arsm_modes;
  std::vector<std::vector<std::string>> encoder_subsets;  // encoder names kept
  std::vector<train::DatasetFilter> dataset_filters;
};

struct AblationRow {
  std::string label;
  metrics::CorrelationReport report;
  double best_val_tau_c = 0.0;
  double wall_seconds = 0.0;
};

// Restrict both encoder lists to the named subset. Throws ConfigError when a
// GEM would end up with zero encoders.
scoring::ModelConfig restrict_encoders(const scoring::ModelConfig& base,
                                       const std::vector<std::string>& keep);

std::vector<AblationRow> run_ablation(
    const scoring::ModelConfig& base_model,
    const train::TrainConfig& base_train,
    const arsm::HadamardWeights* pretrained, const data::DatasetSplit& split,
    const emb::ProviderSet& providers, const AblationAxes& axes);

// Line-delimited self-describing report. Every artifact carries a header with
// format version, config hash, and seed; timing lines are omitted when
// include_timing is false so identical runs stay byte-identical.
void write_benchmark_report(const std::string& path, const BenchmarkResult& result,
                            const std::string& config_echo, std::uint64_t seed,
                            bool include_timing);
void write_ablation_report(const std::string& path,
                           const std::vector<AblationRow>& rows,
                           const std::string& config_echo, std::uint64_t seed,
                           bool include_timing);

}  // namespace pearl::eval

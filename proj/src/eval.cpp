#include "pearl/eval.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <fmt/format.h>
#include "json.hpp"

#include "pearl/common.hpp"
#include "pearl/text_key.hpp"

namespace pearl::eval {

using nlohmann::json;

BenchmarkResult run_benchmark(const scoring::PearlModel& model,
                              const std::vector<data::CaptionRecord>& records,
                              const emb::ProviderSet& providers,
                              scoring::SettingPolicy policy) {
  std::vector<double> scores, judgments;
  scores.reserve(records.size());
  judgments.reserve(records.size());
  const auto start = std::chrono::steady_clock::now();
  for (const auto& rec : records) {
    if (!rec.judgment.has_value()) {
      throw ValidationError("record '" + rec.sample_id +
                            "' has no judgment; benchmarks need judged data");
    }
    scores.push_back(model.score(rec, providers, policy).y_final);
    judgments.push_back(*rec.judgment);
  }
  BenchmarkResult out;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  out.n_scored = std::int64_t(records.size());
  out.report = metrics::kendall_report(scores, judgments);
  return out;
}

double foil_accuracy(const scoring::PearlModel& model,
                     const std::vector<data::FoilPair>& pairs,
                     const emb::ProviderSet& providers,
                     scoring::SettingPolicy policy, int n_refs) {
  if (pairs.empty()) throw ValidationError("foil accuracy needs at least one pair");
  if (n_refs < 1) throw ValidationError("n_refs must be >= 1");

  std::vector<std::pair<double, double>> outcomes;
  outcomes.reserve(pairs.size());
  for (const auto& pair : pairs) {
    data::CaptionRecord rec;
    rec.image_key = pair.image_key;
    if (policy != scoring::SettingPolicy::force_reference_free) {
      if (std::size_t(n_refs) > pair.references.size()) {
        throw ValidationError(fmt::format(
            "foil pair for image '{}' has {} references but n_refs = {}",
            pair.image_key, pair.references.size(), n_refs));
      }
      rec.references.assign(pair.references.begin(),
                            pair.references.begin() + n_refs);
    }
    rec.sample_id = pair.image_key + "#correct";
    rec.candidate = pair.correct;
    const double correct_score = model.score(rec, providers, policy).y_final;
    rec.sample_id = pair.image_key + "#foil";
    rec.candidate = pair.foil;
    const double foil_score = model.score(rec, providers, policy).y_final;
    outcomes.emplace_back(correct_score, foil_score);
  }
  return metrics::pairwise_accuracy(outcomes);
}

scoring::ModelConfig restrict_encoders(const scoring::ModelConfig& base,
                                       const std::vector<std::string>& keep) {
  auto kept = [&](const emb::EncoderSpec& e) {
    return std::find(keep.begin(), keep.end(), e.name) != keep.end();
  };
  scoring::ModelConfig cfg = base;
  cfg.img_encoders.clear();
  cfg.ref_encoders.clear();
  for (const auto& e : base.img_encoders) {
    if (kept(e)) cfg.img_encoders.push_back(e);
  }
  for (const auto& e : base.ref_encoders) {
    if (kept(e)) cfg.ref_encoders.push_back(e);
  }
  if (cfg.img_encoders.empty() || cfg.ref_encoders.empty()) {
    throw ConfigError("encoder subset leaves a GEM with zero encoders");
  }
  return cfg;
}

namespace {

std::string mode_label(arsm::Mode m) {
  return m == arsm::Mode::ruse_fixed ? "RUSE-type" : arsm::mode_name(m);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::vector<AblationRow> run_ablation(const scoring::ModelConfig& base_model,
                                      const train::TrainConfig& base_train,
                                      const arsm::HadamardWeights* pretrained,
                                      const data::DatasetSplit& split,
                                      const emb::ProviderSet& providers,
                                      const AblationAxes& axes) {
  struct Variant {
    std::string label;
    scoring::ModelConfig model;
    train::TrainConfig train;
  };
  std::vector<Variant> variants;
  for (arsm::Mode mode : axes.arsm_modes) {
    scoring::ModelConfig cfg = base_model;
    cfg.arsm_mode = mode;
    variants.push_back({mode_label(mode), cfg, base_train});
  }
  for (const auto& subset : axes.encoder_subsets) {
    variants.push_back({"encoders:" + join(subset, "+"),
                        restrict_encoders(base_model, subset), base_train});
  }
  for (train::DatasetFilter f : axes.dataset_filters) {
    train::TrainConfig cfg = base_train;
    cfg.dataset_filter = f;
    variants.push_back({"filter:" + train::filter_name(f), base_model, cfg});
  }
  if (variants.empty()) throw ConfigError("ablation axes enumerate no configurations");

  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    const auto start = std::chrono::steady_clock::now();
    scoring::PearlModel model(v.model, base_train.seed, pretrained);
    train::TrainResult trained = train::train(model, split, providers, v.train);
    BenchmarkResult bench = run_benchmark(model, split.test, providers);
    AblationRow row;
    row.label = v.label;
    row.report = bench.report;
    row.best_val_tau_c = trained.state.best_val_tau_c;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    rows.push_back(row);
  }
  return rows;
}

namespace {

json header_line(const std::string& config_echo, std::uint64_t seed) {
  return json{{"type", "header"},
              {"format", "pearl-report"},
              {"version", 1},
              {"config_hash", emb::text_key(config_echo)},
              {"seed", seed}};
}

json correlation_line(const metrics::CorrelationReport& r, std::int64_t n_scored) {
  return json{{"type", "correlation"},
              {"tau_b", r.tau_b},
              {"tau_c", r.tau_c},
              {"n", n_scored},
              {"concordant", r.concordant},
              {"discordant", r.discordant},
              {"ties_x_only", r.ties_x_only},
              {"ties_y_only", r.ties_y_only},
              {"ties_both", r.ties_both}};
}

void write_lines(const std::string& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& line : lines) out << line.dump() << "\n";
  if (!out) throw IoError("cannot write '" + path + "'");
}

}  // namespace

void write_benchmark_report(const std::string& path, const BenchmarkResult& result,
                            const std::string& config_echo, std::uint64_t seed,
                            bool include_timing) {
  std::vector<json> lines;
  lines.push_back(header_line(config_echo, seed));
  lines.push_back(correlation_line(result.report, result.n_scored));
  if (include_timing) {
    const double sps = result.wall_seconds > 0.0
                           ? double(result.n_scored) / result.wall_seconds
                           : 0.0;
    lines.push_back(json{{"type", "timing"},
                         {"wall_seconds", result.wall_seconds},
                         {"samples_per_second", sps}});
  }
  write_lines(path, lines);
}

void write_ablation_report(const std::string& path,
                           const std::vector<AblationRow>& rows,
                           const std::string& config_echo, std::uint64_t seed,
                           bool include_timing) {
  std::vector<json> lines;
  lines.push_back(header_line(config_echo, seed));
  for (const auto& row : rows) {
    json line{{"type", "ablation_row"},
              {"label", row.label},
              {"tau_b", row.report.tau_b},
              {"tau_c", row.report.tau_c},
              {"best_val_tau_c", row.best_val_tau_c}};
    if (include_timing) line["wall_seconds"] = row.wall_seconds;
    lines.push_back(line);
  }
  write_lines(path, lines);
}

}  // namespace pearl::eval

#include "pearl/scoring.hpp"

#include <chrono>
#include <utility>

#include <fmt/format.h>

#include "pearl/common.hpp"

namespace pearl::scoring {

namespace {

Var row_of(const Eigen::VectorXd& v) { return Var::constant(v.transpose()); }

const emb::Provider& provider_for(const emb::ProviderSet& providers,
                                  const emb::EncoderSpec& spec) {
  if (!providers.has(spec.name)) {
    throw ConfigError("no embedding provider for encoder '" + spec.name + "'");
  }
  const emb::Provider& p = providers.get(spec.name);
  if (p.spec().dim != spec.dim) {
    throw ConfigError(fmt::format(
        "encoder '{}' provider dim {} does not match configured dim {}",
        spec.name, p.spec().dim, spec.dim));
  }
  return p;
}

void check_encoders(const ModelConfig& cfg) {
  if (cfg.img_encoders.empty() || cfg.ref_encoders.empty()) {
    throw ConfigError("both GEM paths need at least one encoder");
  }
  for (const auto& e : cfg.img_encoders) {
    if (e.modality != emb::Modality::both) {
      throw ConfigError("image-path encoder '" + e.name +
                        "' must embed both modalities");
    }
  }
  for (const auto& e : cfg.ref_encoders) {
    if (e.modality == emb::Modality::image) {
      throw ConfigError("reference-path encoder '" + e.name +
                        "' must embed text");
    }
  }
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
    throw ConfigError(fmt::format("lambda must lie in [0,1], got {}", cfg.lambda));
  }
}

}  // namespace

std::string setting_name(Setting s) {
  return s == Setting::reference_based ? "reference_based" : "reference_free";
}

std::string policy_name(SettingPolicy p) {
  switch (p) {
    case SettingPolicy::auto_detect: return "auto";
    case SettingPolicy::force_reference_based: return "reference-based";
    case SettingPolicy::force_reference_free: return "reference-free";
  }
  return "auto";
}

SettingPolicy parse_policy(const std::string& s) {
  if (s == "auto") return SettingPolicy::auto_detect;
  if (s == "reference-based") return SettingPolicy::force_reference_based;
  if (s == "reference-free") return SettingPolicy::force_reference_free;
  throw ConfigError("unknown setting '" + s +
                    "' (expected auto, reference-based, or reference-free)");
}

double fuse(double lambda, double y_img, const std::optional<double>& y_ref,
            Setting setting) {
  if (setting == Setting::reference_free) return y_img;
  if (!y_ref.has_value()) {
    throw ValidationError("reference_based fusion needs y_ref");
  }
  return lambda * y_img + (1.0 - lambda) * *y_ref;
}

PearlModel::PearlModel(ModelConfig cfg, std::uint64_t seed,
                       const arsm::HadamardWeights* pretrained)
    : cfg_(std::move(cfg)), reg_(seed) {
  check_encoders(cfg_);
  const arsm::ArsmSettings arsm_settings{cfg_.arsm_mode, cfg_.diff_init,
                                         cfg_.hadamard, pretrained};
  vss_img_.emplace(reg_, "img", cfg_.img_encoders, cfg_.vss, arsm_settings);
  vss_ref_.emplace(reg_, "ref", cfg_.ref_encoders, cfg_.vss, arsm_settings);
  head_img_.emplace(reg_, "img.head", cfg_.vss.d_model, cfg_.vss.d_model, 1);
  head_ref_.emplace(reg_, "ref.head", cfg_.vss.d_model, cfg_.vss.d_model, 1);
}

ScoreVars PearlModel::score_vars(const data::CaptionRecord& record,
                                 const emb::ProviderSet& providers,
                                 SettingPolicy policy) const {
  if (record.candidate.empty()) {
    throw ValidationError("record '" + record.sample_id + "' has an empty candidate");
  }
  bool use_refs = false;
  switch (policy) {
    case SettingPolicy::auto_detect:
      use_refs = !record.references.empty();
      break;
    case SettingPolicy::force_reference_based:
      if (record.references.empty()) {
        throw ConfigError("record '" + record.sample_id +
                          "' has no references but the setting forces reference_based");
      }
      use_refs = true;
      break;
    case SettingPolicy::force_reference_free:
      use_refs = false;
      break;
  }

  std::vector<std::pair<Var, Var>> img_pairs;
  img_pairs.reserve(cfg_.img_encoders.size());
  for (const auto& spec : cfg_.img_encoders) {
    const emb::Provider& p = provider_for(providers, spec);
    img_pairs.emplace_back(row_of(p.embed_text(record.candidate)),
                           row_of(p.embed_image(record.image_key)));
  }

  ScoreVars out;
  out.y_img = ad::sigmoid(head_img_->forward(vss_img_->forward(img_pairs)));
  out.setting = use_refs ? Setting::reference_based : Setting::reference_free;
  if (!use_refs) return out;

  std::vector<Var> cand;  // candidate text embedding per ref encoder, reused
  cand.reserve(cfg_.ref_encoders.size());
  for (const auto& spec : cfg_.ref_encoders) {
    cand.push_back(row_of(provider_for(providers, spec).embed_text(record.candidate)));
  }
  for (const auto& reference : record.references) {
    std::vector<std::pair<Var, Var>> ref_pairs;
    ref_pairs.reserve(cfg_.ref_encoders.size());
    for (std::size_t j = 0; j < cfg_.ref_encoders.size(); ++j) {
      const emb::Provider& p = provider_for(providers, cfg_.ref_encoders[j]);
      ref_pairs.emplace_back(cand[j], row_of(p.embed_text(reference)));
    }
    out.per_reference.push_back(
        ad::sigmoid(head_ref_->forward(vss_ref_->forward(ref_pairs))));
  }
  out.y_ref = ad::max_of(out.per_reference);
  return out;
}

ScoreBreakdown PearlModel::score(const data::CaptionRecord& record,
                                 const emb::ProviderSet& providers,
                                 SettingPolicy policy) const {
  ScoreVars vars = score_vars(record, providers, policy);
  ScoreBreakdown b;
  b.y_img = vars.y_img.scalar();
  for (const Var& v : vars.per_reference) b.per_reference.push_back(v.scalar());
  if (vars.y_ref.has_value()) b.y_ref = vars.y_ref->scalar();
  b.setting = vars.setting;
  b.y_final = fuse(cfg_.lambda, b.y_img, b.y_ref, b.setting);
  return b;
}

BatchResult PearlModel::score_batch(const std::vector<data::CaptionRecord>& records,
                                    const emb::ProviderSet& providers,
                                    const BatchOptions& options) const {
  BatchResult result;
  result.breakdowns.reserve(records.size());
  const auto start = std::chrono::steady_clock::now();
  for (const auto& record : records) {
    try {
      result.breakdowns.push_back(score(record, providers, options.policy));
    } catch (const Error& e) {
      const std::string msg =
          fmt::format("sample '{}': {}", record.sample_id, e.what());
      if (!options.skip_errors) throw Error(e.code, msg);
      result.errors.push_back(msg);
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (result.wall_seconds > 0.0) {
    result.samples_per_second =
        double(result.breakdowns.size()) / result.wall_seconds;
  }
  return result;
}

}  // namespace pearl::scoring

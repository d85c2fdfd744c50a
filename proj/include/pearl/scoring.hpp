#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pearl/arsm.hpp"
#include "pearl/dataset.hpp"
#include "pearl/embedding.hpp"
#include "pearl/vss.hpp"

// The full Pearl forward pass: Img-GEM and Ref-GEM features, sigmoid score
// heads, max pooling over references, and lambda fusion.
namespace pearl::scoring {

using ad::Var;

enum class Setting { reference_based, reference_free };

std::string setting_name(Setting s);

// How score() decides the setting. auto_detect keys off the record's
// reference list; the forced policies override it.
enum class SettingPolicy { auto_detect, force_reference_based, force_reference_free };

std::string policy_name(SettingPolicy p);
SettingPolicy parse_policy(const std::string& s);

struct ModelConfig {
  std::vector<emb::EncoderSpec> img_encoders;
  std::vector<emb::EncoderSpec> ref_encoders;
  vss::VssConfig vss;
  arsm::Mode arsm_mode = arsm::Mode::adaptive;
  arsm::DiffInit diff_init = arsm::DiffInit::identity;
  arsm::HadamardConfig hadamard;
  double lambda = 0.5;
};

struct ScoreBreakdown {
  double y_img = 0.0;
  std::vector<double> per_reference;
  std::optional<double> y_ref;  // max of per_reference, present iff N >= 1
  double y_final = 0.0;
  Setting setting = Setting::reference_free;
};

// Graph-bearing scores for the training loop. y_ref is the max over the
// per-reference sigmoid outputs.
struct ScoreVars {
  Var y_img;
  std::vector<Var> per_reference;
  std::optional<Var> y_ref;
  Setting setting = Setting::reference_free;
};

struct BatchOptions {
  SettingPolicy policy = SettingPolicy::auto_detect;
  bool skip_errors = false;  // false: fail fast with the sample id attached
};

struct BatchResult {
  std::vector<ScoreBreakdown> breakdowns;
  std::vector<std::string> errors;  // populated only under skip_errors
  double wall_seconds = 0.0;
  double samples_per_second = 0.0;
};

// Owns the parameter registry and both GEM paths. The two VSS instances and
// the two heads are independent parameter sets; ARSM parameters are likewise
// per path (prefixes img.* and ref.*).
class PearlModel {
 public:
  PearlModel(ModelConfig cfg, std::uint64_t seed,
             const arsm::HadamardWeights* pretrained);
  PearlModel(const PearlModel&) = delete;
  PearlModel& operator=(const PearlModel&) = delete;

  ScoreVars score_vars(const data::CaptionRecord& record,
                       const emb::ProviderSet& providers,
                       SettingPolicy policy = SettingPolicy::auto_detect) const;
  ScoreBreakdown score(const data::CaptionRecord& record,
                       const emb::ProviderSet& providers,
                       SettingPolicy policy = SettingPolicy::auto_detect) const;
  BatchResult score_batch(const std::vector<data::CaptionRecord>& records,
                          const emb::ProviderSet& providers,
                          const BatchOptions& options = {}) const;

  nn::ParamRegistry& registry() { return reg_; }
  const nn::ParamRegistry& registry() const { return reg_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  nn::ParamRegistry reg_;
  std::optional<vss::VssModule> vss_img_, vss_ref_;
  std::optional<nn::Mlp> head_img_, head_ref_;
};

// y_final from path scores: lambda * y_img + (1 - lambda) * y_ref when
// reference_based, y_img alone when reference_free.
double fuse(double lambda, double y_img, const std::optional<double>& y_ref,
            Setting setting);

}  // namespace pearl::scoring

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pearl/arsm.hpp"
#include "pearl/embedding.hpp"
#include "pearl/nn.hpp"

// Vector Similarity Scoring: fuses per-encoder ARSM features into one
// fixed-width evaluation feature via a transformer and learnable queries.
namespace pearl::vss {

using ad::Var;

struct VssConfig {
  Eigen::Index d_model = 256;
  Eigen::Index n_queries = 8;
  int layers_transformer = 2;
  int layers_qformer = 1;
  Eigen::Index mlp_hidden = 0;  // 0 means d_model
  int n_heads = 4;

  Eigen::Index head_hidden() const { return mlp_hidden > 0 ? mlp_hidden : d_model; }
};

// One feature extractor over M registered encoders. Per encoder: ARSM on the
// (candidate, counterpart) pair, affine projection to d_model, plus a learned
// encoder-identity embedding. The M tokens pass through layers_transformer
// self-attention blocks; n_queries learnable queries cross-attend over them in
// layers_qformer blocks; the flattened queries map through an MLP to a
// 1 x d_model feature. layers_qformer = 0 mean-pools tokens into every query
// slot so input content still reaches the head.
class VssModule {
 public:
  VssModule(nn::ParamRegistry& reg, std::string prefix,
            std::vector<emb::EncoderSpec> encoders, const VssConfig& cfg,
            const arsm::ArsmSettings& arsm_settings);

  // pairs[i] aligns with encoders()[i]; both entries are 1 x dim rows.
  Var forward(const std::vector<std::pair<Var, Var>>& pairs) const;

  const std::vector<emb::EncoderSpec>& encoders() const { return encoders_; }
  const VssConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  std::vector<emb::EncoderSpec> encoders_;
  VssConfig cfg_;
  std::vector<arsm::ArsmUnit> arsm_;
  std::vector<nn::Linear> proj_;
  std::vector<Var> ident_;
  std::vector<nn::TransformerLayer> transformer_;
  Var queries_;
  std::vector<nn::CrossAttentionLayer> qformer_;
  std::optional<nn::Mlp> head_;
};

}  // namespace pearl::vss

#include "pearl/vss.hpp"

#include <set>

#include <fmt/format.h>

#include "pearl/common.hpp"

namespace pearl::vss {

using ad::Mat;

namespace {

void check_config(const VssConfig& cfg) {
  if (cfg.d_model <= 0) throw ConfigError("vss.d_model must be positive");
  if (cfg.n_queries <= 0) throw ConfigError("vss.n_queries must be positive");
  if (cfg.layers_transformer < 0 || cfg.layers_qformer < 0) {
    throw ConfigError("vss layer counts must be non-negative");
  }
  if (cfg.n_heads <= 0 || cfg.d_model % cfg.n_heads != 0) {
    throw ConfigError(fmt::format("vss.n_heads ({}) must divide vss.d_model ({})",
                                  cfg.n_heads, cfg.d_model));
  }
  if (cfg.mlp_hidden < 0) throw ConfigError("vss.mlp_hidden must be non-negative");
}

}  // namespace

VssModule::VssModule(nn::ParamRegistry& reg, std::string prefix,
                     std::vector<emb::EncoderSpec> encoders,
                     const VssConfig& cfg, const arsm::ArsmSettings& s)
    : prefix_(std::move(prefix)), encoders_(std::move(encoders)), cfg_(cfg) {
  check_config(cfg_);
  if (encoders_.empty()) {
    throw ConfigError("vss module '" + prefix_ + "' needs at least one encoder");
  }
  std::set<std::string> seen;
  for (const auto& enc : encoders_) {
    if (enc.dim <= 0) {
      throw ConfigError("encoder '" + enc.name + "' has non-positive dim");
    }
    if (!seen.insert(enc.name).second) {
      throw ConfigError("duplicate encoder '" + enc.name + "' in vss module");
    }
  }

  const Eigen::Index ffn = 4 * cfg_.d_model;
  for (const auto& enc : encoders_) {
    arsm_.emplace_back(reg, prefix_ + ".arsm." + enc.name, enc.dim, s.mode,
                       s.diff_init, s.hadamard, s.pretrained);
    proj_.emplace_back(reg, prefix_ + ".proj." + enc.name, 2 * enc.dim,
                       cfg_.d_model);
    ident_.push_back(reg.create(prefix_ + ".ident." + enc.name, 1, cfg_.d_model,
                                nn::Init::normal(0.0, 0.02)));
  }
  for (int i = 0; i < cfg_.layers_transformer; ++i) {
    transformer_.emplace_back(reg, prefix_ + ".enc" + std::to_string(i),
                              cfg_.d_model, cfg_.n_heads, ffn);
  }
  if (cfg_.layers_qformer > 0) {
    queries_ = reg.create(prefix_ + ".queries", cfg_.n_queries, cfg_.d_model,
                          nn::Init::normal(0.0, 0.02));
    for (int i = 0; i < cfg_.layers_qformer; ++i) {
      qformer_.emplace_back(reg, prefix_ + ".qf" + std::to_string(i),
                            cfg_.d_model, cfg_.n_heads, ffn);
    }
  }
  head_.emplace(reg, prefix_ + ".out", cfg_.n_queries * cfg_.d_model,
                cfg_.head_hidden(), cfg_.d_model);
}

Var VssModule::forward(const std::vector<std::pair<Var, Var>>& pairs) const {
  if (pairs.size() != encoders_.size()) {
    throw ConfigError(fmt::format("vss module '{}' expects {} pairs, got {}",
                                  prefix_, encoders_.size(), pairs.size()));
  }
  std::vector<Var> tokens;
  tokens.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [c, h] = pairs[i];
    const Eigen::Index d = encoders_[i].dim;
    if (c.value().rows() != 1 || h.value().rows() != 1 ||
        c.value().cols() != d || h.value().cols() != d) {
      throw ConfigError(fmt::format(
          "vss pair for encoder '{}' must be 1x{} rows, got {}x{} and {}x{}",
          encoders_[i].name, d, c.value().rows(), c.value().cols(),
          h.value().rows(), h.value().cols()));
    }
    tokens.push_back(ad::add(proj_[i].forward(arsm_[i].forward(c, h)), ident_[i]));
  }

  Var x = ad::concat_rows(tokens);
  for (const auto& layer : transformer_) x = layer.forward(x);

  Var q;
  if (qformer_.empty()) {
    const auto m = static_cast<double>(tokens.size());
    Var mean = ad::matmul(
        Var::constant(Mat::Constant(1, Eigen::Index(tokens.size()), 1.0 / m)), x);
    q = ad::concat_rows(std::vector<Var>(std::size_t(cfg_.n_queries), mean));
  } else {
    q = queries_;
    for (const auto& layer : qformer_) q = layer.forward(q, x);
  }
  return head_->forward(ad::flatten_row(q));
}

}  // namespace pearl::vss

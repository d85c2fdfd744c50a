#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pearl/autodiff.hpp"

// Parameter management, layers, and the Adam optimizer. Layers create their
// parameters in a ParamRegistry at construction; forward passes only read
// them, so checkpoint IO and freezing operate on the registry alone.
namespace pearl::nn {

using ad::Mat;
using ad::Var;

struct Init {
  enum class Kind { zeros, ones, identity, neg_identity, normal, uniform, xavier };
  Kind kind = Kind::zeros;
  double a = 0.0;  // normal: mean; uniform: lower bound
  double b = 0.0;  // normal: stddev; uniform: upper bound

  static Init zeros() { return {Kind::zeros, 0, 0}; }
  static Init ones() { return {Kind::ones, 0, 0}; }
  static Init identity() { return {Kind::identity, 0, 0}; }
  static Init neg_identity() { return {Kind::neg_identity, 0, 0}; }
  static Init normal(double mean, double stddev) { return {Kind::normal, mean, stddev}; }
  static Init uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static Init xavier() { return {Kind::xavier, 0, 0}; }
};

// Named parameter store. Each parameter's initial values come from an RNG
// seeded by hash(master_seed, name), so initialization never depends on
// creation order or on which other parameters exist.
class ParamRegistry {
 public:
  explicit ParamRegistry(std::uint64_t master_seed = 0) : master_seed_(master_seed) {}

  Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
             const Init& init);
  Var create_fixed(const std::string& name, Mat value);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Var get(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  void zero_grad();
  // Toggles requires_grad on every parameter whose name starts with prefix.
  void set_trainable(const std::string& prefix, bool trainable);

 private:
  std::uint64_t master_seed_;
  std::vector<std::string> names_;
  std::vector<Var> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParamRegistry& registry, AdamConfig cfg) : reg_(registry), cfg_(cfg) {}
  // One update over all trainable parameters; absent gradients count as zero.
  void step();
  long step_count() const { return t_; }

 private:
  ParamRegistry& reg_;
  AdamConfig cfg_;
  long t_ = 0;
  std::unordered_map<std::string, Mat> m_, v_;
};

// y = x W + b with x: N x in, W: in x out, b: 1 x out.
struct Linear {
  Linear(ParamRegistry& reg, const std::string& prefix, Eigen::Index in,
         Eigen::Index out, const Init& w_init = Init::xavier());
  Var forward(const Var& x) const;
  Var w, b;
};

struct LayerNorm {
  LayerNorm(ParamRegistry& reg, const std::string& prefix, Eigen::Index dim);
  Var forward(const Var& x) const;
  Var gamma, beta;
};

// Scaled dot-product attention; queries may come from a different source
// than keys/values (cross-attention).
struct MultiHeadAttention {
  MultiHeadAttention(ParamRegistry& reg, const std::string& prefix,
                     Eigen::Index d_model, int n_heads);
  Var forward(const Var& q_in, const Var& kv_in) const;
  Linear wq, wk, wv, wo;
  Eigen::Index d_model;
  int n_heads;
};

// Pre-norm encoder block: x += MHA(LN(x)); x += FFN(LN(x)).
struct TransformerLayer {
  TransformerLayer(ParamRegistry& reg, const std::string& prefix,
                   Eigen::Index d_model, int n_heads, Eigen::Index ffn_hidden);
  Var forward(const Var& x) const;
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Linear ff1, ff2;
};

// Pre-norm cross-attention block: q += MHA(LN(q), ctx); q += FFN(LN(q)).
struct CrossAttentionLayer {
  CrossAttentionLayer(ParamRegistry& reg, const std::string& prefix,
                      Eigen::Index d_model, int n_heads, Eigen::Index ffn_hidden);
  Var forward(const Var& q, const Var& ctx) const;
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Linear ff1, ff2;
};

// Two-layer perceptron: in -> hidden -> out with GELU in between.
struct Mlp {
  Mlp(ParamRegistry& reg, const std::string& prefix, Eigen::Index in,
      Eigen::Index hidden, Eigen::Index out);
  Var forward(const Var& x) const;
  Linear fc1, fc2;
};

}  // namespace pearl::nn

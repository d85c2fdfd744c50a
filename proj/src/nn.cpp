#include "pearl/nn.hpp"

#include <cmath>
#include <random>

#include "pearl/common.hpp"

namespace pearl::nn {

namespace {

Mat draw(Eigen::Index rows, Eigen::Index cols, const Init& init,
         std::uint64_t seed) {
  switch (init.kind) {
    case Init::Kind::zeros:
      return Mat::Zero(rows, cols);
    case Init::Kind::ones:
      return Mat::Ones(rows, cols);
    case Init::Kind::identity:
      return Mat::Identity(rows, cols);
    case Init::Kind::neg_identity:
      return -Mat::Identity(rows, cols);
    case Init::Kind::normal: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> dist(init.a, init.b);
      Mat m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
      return m;
    }
    case Init::Kind::uniform: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> dist(init.a, init.b);
      Mat m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
      return m;
    }
    case Init::Kind::xavier: {
      double limit = std::sqrt(6.0 / double(rows + cols));
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> dist(-limit, limit);
      Mat m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
      return m;
    }
  }
  throw ConfigError("unknown parameter init kind");
}

}  // namespace

Var ParamRegistry::create(const std::string& name, Eigen::Index rows,
                          Eigen::Index cols, const Init& init) {
  return create_fixed(name, draw(rows, cols, init, derived_seed(master_seed_, name)));
}

Var ParamRegistry::create_fixed(const std::string& name, Mat value) {
  if (index_.count(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  Var p = Var::param(std::move(value));
  index_[name] = names_.size();
  names_.push_back(name);
  params_.push_back(p);
  return p;
}

Var ParamRegistry::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigError("unknown parameter name '" + name + "'");
  }
  return params_[it->second];
}

void ParamRegistry::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void ParamRegistry::set_trainable(const std::string& prefix, bool trainable) {
  bool any = false;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].rfind(prefix, 0) == 0) {
      params_[i].node()->requires_grad = trainable;
      any = true;
    }
  }
  if (!any) {
    throw ConfigError("no parameters match prefix '" + prefix + "'");
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (const auto& name : reg_.names()) {
    Var p = reg_.get(name);
    if (!p.requires_grad()) continue;
    const Mat& g = p.grad();  // zeros when the parameter was untouched
    Mat& m = m_.try_emplace(name, Mat::Zero(g.rows(), g.cols())).first->second;
    Mat& v = v_.try_emplace(name, Mat::Zero(g.rows(), g.cols())).first->second;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * g.array().square();
    Mat update = (m.array() / bc1) /
                 ((v.array() / bc2).sqrt() + cfg_.eps);
    p.mutable_value() -= cfg_.lr * update.matrix();
  }
}

Linear::Linear(ParamRegistry& reg, const std::string& prefix, Eigen::Index in,
               Eigen::Index out, const Init& w_init)
    : w(reg.create(prefix + ".w", in, out, w_init)),
      b(reg.create(prefix + ".b", 1, out, Init::zeros())) {}

Var Linear::forward(const Var& x) const {
  return ad::add_rowvec(ad::matmul(x, w), b);
}

LayerNorm::LayerNorm(ParamRegistry& reg, const std::string& prefix,
                     Eigen::Index dim)
    : gamma(reg.create(prefix + ".gamma", 1, dim, Init::ones())),
      beta(reg.create(prefix + ".beta", 1, dim, Init::zeros())) {}

Var LayerNorm::forward(const Var& x) const {
  return ad::add_rowvec(ad::mul_rowvec(ad::layer_norm_rows(x), gamma), beta);
}

MultiHeadAttention::MultiHeadAttention(ParamRegistry& reg,
                                       const std::string& prefix,
                                       Eigen::Index d_model_, int n_heads_)
    : wq(reg, prefix + ".wq", d_model_, d_model_),
      wk(reg, prefix + ".wk", d_model_, d_model_),
      wv(reg, prefix + ".wv", d_model_, d_model_),
      wo(reg, prefix + ".wo", d_model_, d_model_),
      d_model(d_model_),
      n_heads(n_heads_) {
  if (n_heads_ <= 0 || d_model_ % n_heads_ != 0) {
    throw ConfigError("attention heads must divide d_model");
  }
}

Var MultiHeadAttention::forward(const Var& q_in, const Var& kv_in) const {
  const Eigen::Index dh = d_model / n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));
  Var q = wq.forward(q_in);
  Var k = wk.forward(kv_in);
  Var v = wv.forward(kv_in);
  Var merged;
  for (int h = 0; h < n_heads; ++h) {
    Var qh = ad::slice_cols(q, h * dh, dh);
    Var kh = ad::slice_cols(k, h * dh, dh);
    Var vh = ad::slice_cols(v, h * dh, dh);
    Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dh);
    Var oh = ad::matmul(ad::softmax_rows(scores), vh);
    merged = h == 0 ? oh : ad::concat_cols(merged, oh);
  }
  return wo.forward(merged);
}

TransformerLayer::TransformerLayer(ParamRegistry& reg,
                                   const std::string& prefix,
                                   Eigen::Index d_model, int n_heads,
                                   Eigen::Index ffn_hidden)
    : ln1(reg, prefix + ".ln1", d_model),
      ln2(reg, prefix + ".ln2", d_model),
      attn(reg, prefix + ".attn", d_model, n_heads),
      ff1(reg, prefix + ".ff1", d_model, ffn_hidden),
      ff2(reg, prefix + ".ff2", ffn_hidden, d_model) {}

Var TransformerLayer::forward(const Var& x) const {
  Var n1 = ln1.forward(x);
  Var x1 = ad::add(x, attn.forward(n1, n1));
  Var f = ff2.forward(ad::gelu(ff1.forward(ln2.forward(x1))));
  return ad::add(x1, f);
}

CrossAttentionLayer::CrossAttentionLayer(ParamRegistry& reg,
                                         const std::string& prefix,
                                         Eigen::Index d_model, int n_heads,
                                         Eigen::Index ffn_hidden)
    : ln1(reg, prefix + ".ln1", d_model),
      ln2(reg, prefix + ".ln2", d_model),
      attn(reg, prefix + ".attn", d_model, n_heads),
      ff1(reg, prefix + ".ff1", d_model, ffn_hidden),
      ff2(reg, prefix + ".ff2", ffn_hidden, d_model) {}

Var CrossAttentionLayer::forward(const Var& q, const Var& ctx) const {
  Var q1 = ad::add(q, attn.forward(ln1.forward(q), ctx));
  Var f = ff2.forward(ad::gelu(ff1.forward(ln2.forward(q1))));
  return ad::add(q1, f);
}

Mlp::Mlp(ParamRegistry& reg, const std::string& prefix, Eigen::Index in,
         Eigen::Index hidden, Eigen::Index out)
    : fc1(reg, prefix + ".fc1", in, hidden), fc2(reg, prefix + ".fc2", hidden, out) {}

Var Mlp::forward(const Var& x) const {
  return fc2.forward(ad::gelu(fc1.forward(x)));
}

}  // namespace pearl::nn

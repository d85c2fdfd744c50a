#include "pearl/arsm.hpp"

#include <algorithm>
#include <random>

#include "pearl/binio.hpp"
#include "pearl/common.hpp"

namespace pearl::arsm {

namespace {

Eigen::Index layer_cin(const HadamardConfig& cfg, int i) {
  return i == 0 ? 2 : cfg.hidden_channels;
}

Eigen::Index layer_cout(const HadamardConfig& cfg, int i) {
  return i == cfg.layers - 1 ? 1 : cfg.hidden_channels;
}

void check_pair(const Var& x1, const Var& x2, Eigen::Index d) {
  if (x1.rows() != 1 || x2.rows() != 1) {
    throw DimensionError("similarity inputs must be 1xd rows");
  }
  if (x1.cols() != x2.cols() || (d > 0 && x1.cols() != d)) {
    throw DimensionError("similarity pair length mismatch: " +
                         std::to_string(x1.cols()) + " vs " +
                         std::to_string(x2.cols()) + " (expected " +
                         std::to_string(d) + ")");
  }
}

// Pairs stacked for the conv: row 0 carries x1 signals, row 1 carries x2.
struct PairBatch {
  Mat input;   // 2 x (n*d)
  Mat target;  // 1 x (n*d), exact elementwise product
};

PairBatch draw_pairs(std::mt19937_64& rng, int n, Eigen::Index d, double a,
                     double b) {
  std::uniform_real_distribution<double> dist(a, b);
  PairBatch batch;
  batch.input.resize(2, Eigen::Index(n) * d);
  batch.target.resize(1, Eigen::Index(n) * d);
  for (Eigen::Index c = 0; c < batch.input.cols(); ++c) {
    batch.input(0, c) = dist(rng);
    batch.input(1, c) = dist(rng);
    batch.target(0, c) = batch.input(0, c) * batch.input(1, c);
  }
  return batch;
}

double batched_mse(const HadamardNet& net, const PairBatch& data,
                   Eigen::Index d, int chunk_samples) {
  const Eigen::Index total = data.input.cols();
  const Eigen::Index chunk = Eigen::Index(chunk_samples) * d;
  double sq_sum = 0.0;
  for (Eigen::Index at = 0; at < total; at += chunk) {
    const Eigen::Index len = std::min(chunk, total - at);
    Var out = net.forward_stacked(
        Var::constant(data.input.middleCols(at, len)), d);
    sq_sum += (out.value() - data.target.middleCols(at, len)).squaredNorm();
  }
  return sq_sum / double(total);
}

}  // namespace

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::adaptive: return "adaptive";
    case Mode::initial: return "initial";
    case Mode::ruse_fixed: return "ruse_fixed";
    case Mode::none: return "none";
  }
  throw ConfigError("unknown similarity mode");
}

Mode parse_mode(const std::string& s) {
  if (s == "adaptive") return Mode::adaptive;
  if (s == "initial") return Mode::initial;
  if (s == "ruse_fixed") return Mode::ruse_fixed;
  if (s == "none") return Mode::none;
  throw ConfigError("unknown similarity mode '" + s + "'");
}

std::string diff_init_name(DiffInit i) {
  return i == DiffInit::identity ? "identity" : "paper_ones";
}

DiffInit parse_diff_init(const std::string& s) {
  if (s == "identity") return DiffInit::identity;
  if (s == "paper_ones") return DiffInit::paper_ones;
  throw ConfigError("unknown diff init '" + s + "'");
}

DiffNet::DiffNet(nn::ParamRegistry& reg, const std::string& prefix,
                 Eigen::Index d, DiffInit init)
    : w1(init == DiffInit::identity
             ? reg.create(prefix + ".w1", d, d, nn::Init::identity())
             : reg.create(prefix + ".w1", d, d, nn::Init::ones())),
      w2(init == DiffInit::identity
             ? reg.create(prefix + ".w2", d, d, nn::Init::neg_identity())
             : reg.create_fixed(prefix + ".w2", -Mat::Ones(d, d))),
      b(reg.create(prefix + ".b", 1, d, nn::Init::zeros())) {}

Var DiffNet::forward(const Var& x1, const Var& x2) const {
  check_pair(x1, x2, w1.rows());
  return ad::add(ad::add(ad::matmul(x1, w1), ad::matmul(x2, w2)), b);
}

HadamardNet::HadamardNet(nn::ParamRegistry& reg, const std::string& prefix,
                         const HadamardConfig& cfg,
                         const HadamardWeights* pretrained) {
  if (cfg.layers < 1) throw ConfigError("hadamard net needs at least one layer");
  if (pretrained && int(pretrained->w.size()) != cfg.layers) {
    throw ConfigError("pretrained hadamard weights have " +
                      std::to_string(pretrained->w.size()) + " layers, config " +
                      std::to_string(cfg.layers));
  }
  for (int i = 0; i < cfg.layers; ++i) {
    const Eigen::Index cin = layer_cin(cfg, i);
    const Eigen::Index cout = layer_cout(cfg, i);
    const std::string tag = prefix + ".conv" + std::to_string(i);
    if (pretrained) {
      if (pretrained->w[i].rows() != cout || pretrained->w[i].cols() != 3 * cin) {
        throw ConfigError("pretrained hadamard layer " + std::to_string(i) +
                          " has unexpected shape");
      }
      w.push_back(reg.create_fixed(tag + ".w", pretrained->w[i]));
      bias.push_back(reg.create_fixed(tag + ".b", pretrained->bias[i]));
    } else {
      w.push_back(reg.create(tag + ".w", cout, 3 * cin, nn::Init::xavier()));
      bias.push_back(reg.create(tag + ".b", cout, 1, nn::Init::zeros()));
    }
  }
}

Var HadamardNet::forward(const Var& x1, const Var& x2) const {
  check_pair(x1, x2, 0);
  return forward_stacked(ad::concat_rows({x1, x2}), x1.cols());
}

Var HadamardNet::forward_stacked(const Var& x, Eigen::Index seg_len) const {
  Var h = x;
  for (std::size_t i = 0; i < w.size(); ++i) {
    h = ad::conv1d_k3_seg(h, w[i], bias[i], seg_len);
    if (i + 1 < w.size()) h = ad::gelu(h);
  }
  return h;
}

PretrainResult pretrain_hadamardnet(Eigen::Index d, const HadamardConfig& cfg,
                                    int n_samples, std::uint64_t seed,
                                    const PretrainBudget& budget) {
  if (cfg.a >= cfg.b) throw ValidationError("pretraining range needs a < b");
  if (n_samples < 1) throw ValidationError("pretraining needs n_samples >= 1");
  if (d <= 0) throw ValidationError("pretraining dimension must be positive");

  nn::ParamRegistry reg(derived_seed(seed, "hadamard-init"));
  HadamardNet net(reg, "had", cfg, nullptr);
  nn::Adam opt(reg, {budget.lr, 0.9, 0.999, 1e-8});

  std::mt19937_64 rng(derived_seed(seed, "hadamard-data"));
  PairBatch heldout = draw_pairs(rng, budget.heldout_samples, d, cfg.a, cfg.b);
  PairBatch train = draw_pairs(rng, n_samples, d, cfg.a, cfg.b);

  PretrainResult result;
  result.config = cfg;
  result.tolerance = budget.tolerance;

  std::vector<int> order(static_cast<std::size_t>(n_samples), 0);
  for (int i = 0; i < n_samples; ++i) order[std::size_t(i)] = i;
  std::mt19937_64 shuffle_rng(derived_seed(seed, "hadamard-shuffle"));

  const int bs = std::max(1, budget.batch_size);
  Mat batch_in(2, Eigen::Index(bs) * d);
  Mat batch_tgt(1, Eigen::Index(bs) * d);
  bool done = false;
  for (int epoch = 0; epoch < budget.max_epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (int at = 0; at + bs <= n_samples; at += bs) {
      for (int k = 0; k < bs; ++k) {
        const Eigen::Index src = Eigen::Index(order[std::size_t(at + k)]) * d;
        batch_in.middleCols(Eigen::Index(k) * d, d) = train.input.middleCols(src, d);
        batch_tgt.middleCols(Eigen::Index(k) * d, d) =
            train.target.middleCols(src, d);
      }
      reg.zero_grad();
      Var out = net.forward_stacked(Var::constant(batch_in), d);
      Var err = ad::sub(out, Var::constant(batch_tgt));
      ad::backward(ad::mean_all(ad::hadamard(err, err)));
      opt.step();
      ++result.steps;
    }
    if (batched_mse(net, heldout, d, 512) <= budget.tolerance) done = true;
  }

  result.heldout_mse = batched_mse(net, heldout, d, 512);
  result.converged = result.heldout_mse <= budget.tolerance;
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    result.weights.w.push_back(net.w[i].value());
    result.weights.bias.push_back(net.bias[i].value());
  }
  return result;
}

void save_hadamard(const std::string& path, const PretrainResult& result) {
  io::ByteWriter out;
  out.raw("PHAD", 4);
  out.u8(0x01);
  out.u32(std::uint32_t(result.config.layers));
  out.u32(std::uint32_t(result.config.hidden_channels));
  out.f64(result.config.a);
  out.f64(result.config.b);
  out.f64(result.heldout_mse);
  out.f64(result.tolerance);
  out.u8(result.converged ? 1 : 0);
  out.u64(std::uint64_t(result.steps));
  for (int i = 0; i < result.config.layers; ++i) {
    out.mat(result.weights.w[std::size_t(i)]);
    out.mat(result.weights.bias[std::size_t(i)]);
  }
  out.write_file(path);
}

PretrainResult load_hadamard(const std::string& path) {
  io::ByteReader in = io::ByteReader::from_file(path);
  in.expect_magic("PHAD", 0x01, "hadamard weight");
  PretrainResult result;
  result.config.layers = int(in.u32());
  result.config.hidden_channels = int(in.u32());
  result.config.a = in.f64();
  result.config.b = in.f64();
  result.heldout_mse = in.f64();
  result.tolerance = in.f64();
  result.converged = in.u8() != 0;
  result.steps = long(in.u64());
  for (int i = 0; i < result.config.layers; ++i) {
    result.weights.w.push_back(in.mat());
    result.weights.bias.push_back(in.mat());
  }
  in.expect_end();
  return result;
}

ArsmUnit::ArsmUnit(nn::ParamRegistry& reg, std::string prefix, Eigen::Index d,
                   Mode mode, DiffInit diff_init, const HadamardConfig& cfg,
                   const HadamardWeights* pretrained)
    : prefix_(std::move(prefix)), d_(d), mode_(mode) {
  if (d <= 0) throw ConfigError("similarity input dimension must be positive");
  if (mode_ == Mode::adaptive || mode_ == Mode::initial) {
    diff_.emplace(reg, prefix_ + ".diff", d, diff_init);
    had_.emplace(reg, prefix_ + ".had", cfg, pretrained);
  }
}

Var ArsmUnit::forward(const Var& x1, const Var& x2) const {
  check_pair(x1, x2, d_);
  switch (mode_) {
    case Mode::adaptive:
    case Mode::initial:
      return ad::concat_cols(diff_->forward(x1, x2), had_->forward(x1, x2));
    case Mode::ruse_fixed:
      return ad::concat_cols(ad::sub(x1, x2), ad::hadamard(x1, x2));
    case Mode::none:
      return ad::concat_cols(x1, x2);
  }
  throw ConfigError("unknown similarity mode");
}

}  // namespace pearl::arsm

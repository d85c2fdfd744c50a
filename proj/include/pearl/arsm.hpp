#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pearl/nn.hpp"

// Adaptive similarity mechanism over embedding pairs: a learnable
// elementwise-difference layer (DiffNet) and a learnable Hadamard-product
// approximator (HadamardNet), with fixed and bypass fallbacks for ablations.
namespace pearl::arsm {

using ad::Mat;
using ad::Var;

enum class Mode { adaptive, initial, ruse_fixed, none };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);

// identity realizes x1 - x2 exactly; paper_ones is the all-ones variant
// that broadcasts the summed difference.
enum class DiffInit { identity, paper_ones };

std::string diff_init_name(DiffInit i);
DiffInit parse_diff_init(const std::string& s);

struct HadamardConfig {
  int layers = 8;             // conv layers including the linear output layer
  int hidden_channels = 16;
  double a = 0.0;             // pretraining inputs drawn from U(a, b)
  double b = 1.0;
};

// Conv-stack parameter values, independent of any registry. Kernel size 3
// keeps the weights valid for every signal length d.
struct HadamardWeights {
  std::vector<Mat> w;     // layer i: C_out x (3*C_in)
  std::vector<Mat> bias;  // layer i: C_out x 1
};

struct PretrainBudget {
  int batch_size = 64;
  int max_epochs = 20;
  double lr = 1e-3;
  double tolerance = 1e-3;   // held-out MSE target
  int heldout_samples = 2000;
};

struct PretrainResult {
  HadamardWeights weights;
  HadamardConfig config;
  double heldout_mse = 0.0;
  bool converged = false;
  double tolerance = 0.0;
  long steps = 0;
};

// Trains the conv stack to reproduce x1 (.) x2 on pairs drawn from U(a,b)^d.
// Never throws on a miss: non-convergence is reported through the result.
PretrainResult pretrain_hadamardnet(Eigen::Index d, const HadamardConfig& cfg,
                                    int n_samples, std::uint64_t seed,
                                    const PretrainBudget& budget = {});

void save_hadamard(const std::string& path, const PretrainResult& result);
PretrainResult load_hadamard(const std::string& path);

// o = x1 W1 + x2 W2 + b over 1xd rows.
struct DiffNet {
  DiffNet(nn::ParamRegistry& reg, const std::string& prefix, Eigen::Index d,
          DiffInit init);
  Var forward(const Var& x1, const Var& x2) const;
  Var w1, w2, b;
};

// Differentiable conv stack bound to a registry. When pretrained weights are
// given they become the initial parameter values; otherwise Xavier init.
struct HadamardNet {
  HadamardNet(nn::ParamRegistry& reg, const std::string& prefix,
              const HadamardConfig& cfg, const HadamardWeights* pretrained);
  // x1, x2: 1xd rows -> 1xd; d is free per call.
  Var forward(const Var& x1, const Var& x2) const;
  // Stacked form: x is 2 x (S*seg_len), segments independent -> 1 x (S*seg_len).
  Var forward_stacked(const Var& x, Eigen::Index seg_len) const;
  std::vector<Var> w, bias;
};

// Bundle consumed by modules that instantiate ArsmUnits. pretrained is only
// read during construction (weights are copied into the registry); null means
// fresh xavier convolutions for modes that need them.
struct ArsmSettings {
  Mode mode = Mode::adaptive;
  DiffInit diff_init = DiffInit::identity;
  HadamardConfig hadamard;
  const HadamardWeights* pretrained = nullptr;
};

// One ARSM instance for a fixed input dimension d. All modes emit 1 x 2d.
class ArsmUnit {
 public:
  ArsmUnit(nn::ParamRegistry& reg, std::string prefix, Eigen::Index d, Mode mode,
           DiffInit diff_init, const HadamardConfig& cfg,
           const HadamardWeights* pretrained);

  Var forward(const Var& x1, const Var& x2) const;
  Eigen::Index in_dim() const { return d_; }
  Eigen::Index out_dim() const { return 2 * d_; }
  Mode mode() const { return mode_; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  Eigen::Index d_;
  Mode mode_;
  std::optional<DiffNet> diff_;
  std::optional<HadamardNet> had_;
};

}  // namespace pearl::arsm

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

// Reverse-mode automatic differentiation on a dynamically built tape.
// Values are dense double matrices; scalars are 1x1. The graph is a DAG of
// shared Nodes; backward() walks it once in reverse topological order.
namespace pearl::ad {

using Mat = Eigen::MatrixXd;

struct Node {
  Mat value;
  Mat grad;  // allocated on first accumulation; same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backprop;

  void accumulate(const Mat& g);
  bool has_grad() const { return grad.size() != 0; }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Var constant(Mat v);
  static Var param(Mat v);  // leaf with requires_grad = true

  bool valid() const { return node_ != nullptr; }
  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  const Mat& grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  const std::shared_ptr<Node>& node() const { return node_; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const;  // value of a 1x1 Var

 private:
  std::shared_ptr<Node> node_;
};

// Seeds the root with d(root)/d(root) = 1 and propagates. Root must be 1x1.
void backward(const Var& root);

// Elementwise binary ops; shapes must match exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);

Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Broadcast a 1xN row across every row of a (MxN).
Var add_rowvec(const Var& a, const Var& row);
Var mul_rowvec(const Var& a, const Var& row);

Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index len);

// Row-major flatten of MxN into 1x(M*N).
Var flatten_row(const Var& a);

// Elementwise nonlinearities.
Var gelu(const Var& a);      // exact erf form
Var tanh_v(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);

// Numerically stable softmax over each row.
Var softmax_rows(const Var& a);

// Per-row standardization (x - mean) / sqrt(var + eps); no affine part.
Var layer_norm_rows(const Var& a, double eps = 1e-5);

Var sum_all(const Var& a);   // 1x1
Var mean_all(const Var& a);  // 1x1

// Max over 1x1 candidates; gradient flows to the first argmax only.
Var max_of(const std::vector<Var>& candidates);

// Elementwise Huber loss against a fixed target, averaged to 1x1.
Var huber_mean(const Var& pred, const Mat& target, double delta);

// 1-D convolution, kernel size 3, stride 1, zero padding 1, applied
// independently to each consecutive block of seg_len columns. x is
// C_in x (S*seg_len), w is C_out x (3*C_in), b is C_out x 1.
Var conv1d_k3_seg(const Var& x, const Var& w, const Var& b,
                  Eigen::Index seg_len);

}  // namespace pearl::ad

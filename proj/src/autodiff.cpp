#include "pearl/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "pearl/common.hpp"

namespace pearl::ad {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

std::shared_ptr<Node> wire(Mat value, std::vector<std::shared_ptr<Node>> parents) {
  auto out = std::make_shared<Node>();
  out->value = std::move(value);
  for (const auto& p : parents) {
    if (p->requires_grad) out->requires_grad = true;
  }
  out->parents = std::move(parents);
  return out;
}

}  // namespace

void Node::accumulate(const Mat& g) {
  if (g.rows() != value.rows() || g.cols() != value.cols()) {
    throw DimensionError("gradient shape mismatch");
  }
  if (!has_grad()) {
    grad = g;
  } else {
    grad += g;
  }
}

Var Var::constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return Var(n);
}

Var Var::param(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return Var(n);
}

const Mat& Var::grad() const {
  if (!node_->has_grad()) {
    node_->grad = Mat::Zero(node_->value.rows(), node_->value.cols());
  }
  return node_->grad;
}

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) {
    throw DimensionError("scalar() on non-1x1 value");
  }
  return node_->value(0, 0);
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw DimensionError("backward() root must be 1x1");
  }
  if (!root.node()->requires_grad) return;

  // Post-order DFS over the differentiable subgraph; reversed post-order
  // processes every node before any of its parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && node->has_grad()) {
      node->backprop(*node);
    }
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  auto out = wire(a.value() + b.value(), {a.node(), b.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), bn = b.node()](Node& self) {
      if (an->requires_grad) an->accumulate(self.grad);
      if (bn->requires_grad) bn->accumulate(self.grad);
    };
  }
  return Var(out);
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  auto out = wire(a.value() - b.value(), {a.node(), b.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), bn = b.node()](Node& self) {
      if (an->requires_grad) an->accumulate(self.grad);
      if (bn->requires_grad) bn->accumulate(-self.grad);
    };
  }
  return Var(out);
}

Var hadamard(const Var& a, const Var& b) {
  check_same_shape(a, b, "hadamard");
  auto out = wire(a.value().cwiseProduct(b.value()), {a.node(), b.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), bn = b.node()](Node& self) {
      if (an->requires_grad) an->accumulate(self.grad.cwiseProduct(bn->value));
      if (bn->requires_grad) bn->accumulate(self.grad.cwiseProduct(an->value));
    };
  }
  return Var(out);
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  auto out = wire(a.value() * s, {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), s](Node& self) {
      an->accumulate(self.grad * s);
    };
  }
  return Var(out);
}

Var add_scalar(const Var& a, double s) {
  auto out = wire(a.value().array() + s, {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node()](Node& self) { an->accumulate(self.grad); };
  }
  return Var(out);
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()));
  }
  auto out = wire(a.value() * b.value(), {a.node(), b.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), bn = b.node()](Node& self) {
      if (an->requires_grad) an->accumulate(self.grad * bn->value.transpose());
      if (bn->requires_grad) bn->accumulate(an->value.transpose() * self.grad);
    };
  }
  return Var(out);
}

Var transpose(const Var& a) {
  auto out = wire(a.value().transpose(), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node()](Node& self) {
      an->accumulate(self.grad.transpose());
    };
  }
  return Var(out);
}

Var add_rowvec(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_rowvec: row must be 1x" + std::to_string(a.cols()));
  }
  Mat v = a.value();
  v.rowwise() += row.value().row(0);
  auto out = wire(std::move(v), {a.node(), row.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), rn = row.node()](Node& self) {
      if (an->requires_grad) an->accumulate(self.grad);
      if (rn->requires_grad) {
        rn->accumulate(self.grad.colwise().sum());
      }
    };
  }
  return Var(out);
}

Var mul_rowvec(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("mul_rowvec: row must be 1x" + std::to_string(a.cols()));
  }
  Mat v = a.value().array().rowwise() * row.value().row(0).array();
  auto out = wire(std::move(v), {a.node(), row.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), rn = row.node()](Node& self) {
      if (an->requires_grad) {
        an->accumulate(self.grad.array().rowwise() *
                       rn->value.row(0).array());
      }
      if (rn->requires_grad) {
        rn->accumulate(self.grad.cwiseProduct(an->value).colwise().sum());
      }
    };
  }
  return Var(out);
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ");
  }
  Mat v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  auto out = wire(std::move(v), {a.node(), b.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), bn = b.node()](Node& self) {
      if (an->requires_grad) {
        an->accumulate(self.grad.leftCols(an->value.cols()));
      }
      if (bn->requires_grad) {
        bn->accumulate(self.grad.rightCols(bn->value.cols()));
      }
    };
  }
  return Var(out);
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: empty input");
  Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column counts differ");
    }
    rows += p.rows();
    parents.push_back(p.node());
  }
  Mat v(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  auto out = wire(std::move(v), std::move(parents));
  if (out->requires_grad) {
    out->backprop = [](Node& self) {
      Eigen::Index r = 0;
      for (const auto& p : self.parents) {
        if (p->requires_grad) {
          p->accumulate(self.grad.middleRows(r, p->value.rows()));
        }
        r += p->value.rows();
      }
    };
  }
  return Var(out);
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || len < 0 || start + len > a.cols()) {
    throw DimensionError("slice_cols: range out of bounds");
  }
  auto out = wire(a.value().middleCols(start, len), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), start](Node& self) {
      Mat g = Mat::Zero(an->value.rows(), an->value.cols());
      g.middleCols(start, self.value.cols()) = self.grad;
      an->accumulate(g);
    };
  }
  return Var(out);
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || len < 0 || start + len > a.rows()) {
    throw DimensionError("slice_rows: range out of bounds");
  }
  auto out = wire(a.value().middleRows(start, len), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), start](Node& self) {
      Mat g = Mat::Zero(an->value.rows(), an->value.cols());
      g.middleRows(start, self.value.rows()) = self.grad;
      an->accumulate(g);
    };
  }
  return Var(out);
}

Var flatten_row(const Var& a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  Mat v(1, r * c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      v(0, i * c + j) = a.value()(i, j);
    }
  }
  auto out = wire(std::move(v), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), r, c](Node& self) {
      Mat g(r, c);
      for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
          g(i, j) = self.grad(0, i * c + j);
        }
      }
      an->accumulate(g);
    };
  }
  return Var(out);
}

Var gelu(const Var& a) {
  Mat v = a.value().unaryExpr(
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  auto out = wire(std::move(v), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node()](Node& self) {
      Mat d = an->value.unaryExpr([](double x) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
               x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
      an->accumulate(self.grad.cwiseProduct(d));
    };
  }
  return Var(out);
}

Var tanh_v(const Var& a) {
  Mat v = a.value().array().tanh();
  auto out = wire(std::move(v), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node()](Node& self) {
      Mat d = 1.0 - self.value.array().square();
      an->accumulate(self.grad.cwiseProduct(d));
    };
  }
  return Var(out);
}

Var sigmoid(const Var& a) {
  Mat v = a.value().unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  });
  auto out = wire(std::move(v), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node()](Node& self) {
      Mat d = self.value.array() * (1.0 - self.value.array());
      an->accumulate(self.grad.cwiseProduct(d));
    };
  }
  return Var(out);
}

Var relu(const Var& a) {
  Mat v = a.value().cwiseMax(0.0);
  auto out = wire(std::move(v), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node()](Node& self) {
      Mat d = (an->value.array() > 0.0).cast<double>();
      an->accumulate(self.grad.cwiseProduct(d));
    };
  }
  return Var(out);
}

Var softmax_rows(const Var& a) {
  Mat v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp();
    v.row(i) /= v.row(i).sum();
  }
  auto out = wire(std::move(v), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node()](Node& self) {
      Mat g(self.value.rows(), self.value.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        double dot = self.grad.row(i).dot(self.value.row(i));
        g.row(i) =
            self.value.row(i).array() * (self.grad.row(i).array() - dot);
      }
      an->accumulate(g);
    };
  }
  return Var(out);
}

Var layer_norm_rows(const Var& a, double eps) {
  const Eigen::Index n = a.cols();
  Mat v(a.rows(), n);
  Eigen::VectorXd inv_sigma(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double mu = a.value().row(i).mean();
    double var = (a.value().row(i).array() - mu).square().sum() / double(n);
    inv_sigma(i) = 1.0 / std::sqrt(var + eps);
    v.row(i) = (a.value().row(i).array() - mu) * inv_sigma(i);
  }
  auto out = wire(std::move(v), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node(), inv_sigma, n](Node& self) {
      Mat g(self.value.rows(), n);
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        double gm = self.grad.row(i).mean();
        double gx = self.grad.row(i).cwiseProduct(self.value.row(i)).mean();
        g.row(i) = inv_sigma(i) *
                   (self.grad.row(i).array() - gm -
                    self.value.row(i).array() * gx);
      }
      an->accumulate(g);
    };
  }
  return Var(out);
}

Var sum_all(const Var& a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  auto out = wire(std::move(v), {a.node()});
  if (out->requires_grad) {
    out->backprop = [an = a.node()](Node& self) {
      an->accumulate(Mat::Constant(an->value.rows(), an->value.cols(),
                                   self.grad(0, 0)));
    };
  }
  return Var(out);
}

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0 / double(a.rows() * a.cols()));
}

Var max_of(const std::vector<Var>& candidates) {
  if (candidates.empty()) throw DimensionError("max_of: empty input");
  std::size_t best = 0;
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].rows() != 1 || candidates[i].cols() != 1) {
      throw DimensionError("max_of: candidates must be 1x1");
    }
    if (candidates[i].value()(0, 0) > candidates[best].value()(0, 0)) best = i;
    parents.push_back(candidates[i].node());
  }
  auto out = wire(candidates[best].value(), std::move(parents));
  if (out->requires_grad) {
    out->backprop = [best](Node& self) {
      const auto& winner = self.parents[best];
      if (winner->requires_grad) winner->accumulate(self.grad);
    };
  }
  return Var(out);
}

Var huber_mean(const Var& pred, const Mat& target, double delta) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("huber_mean: prediction/target shape mismatch");
  }
  Mat err = pred.value() - target;
  double total = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    double e = err.data()[i];
    double ae = std::abs(e);
    total += ae <= delta ? 0.5 * e * e : delta * (ae - 0.5 * delta);
  }
  Mat v(1, 1);
  v(0, 0) = total / double(err.size());
  auto out = wire(std::move(v), {pred.node()});
  if (out->requires_grad) {
    out->backprop = [pn = pred.node(), err = std::move(err), delta](Node& self) {
      Mat g = err.unaryExpr([delta](double e) {
        if (std::abs(e) <= delta) return e;
        return e > 0.0 ? delta : -delta;
      });
      g *= self.grad(0, 0) / double(err.size());
      pn->accumulate(g);
    };
  }
  return Var(out);
}

Var conv1d_k3_seg(const Var& x, const Var& w, const Var& b,
                  Eigen::Index seg_len) {
  const Eigen::Index cin = x.rows();
  const Eigen::Index total = x.cols();
  if (seg_len <= 0 || total % seg_len != 0) {
    throw DimensionError("conv1d_k3_seg: columns not divisible by seg_len");
  }
  if (w.cols() != 3 * cin) {
    throw DimensionError("conv1d_k3_seg: weight must be C_out x (3*C_in)");
  }
  const Eigen::Index cout = w.rows();
  if (b.rows() != cout || b.cols() != 1) {
    throw DimensionError("conv1d_k3_seg: bias must be C_out x 1");
  }

  // Patch matrix: column t holds the k=3 window around position t, zero
  // padded at segment boundaries; row layout is kernel-major (k*C_in + c).
  Mat patches = Mat::Zero(3 * cin, total);
  for (Eigen::Index t = 0; t < total; ++t) {
    const Eigen::Index pos = t % seg_len;
    for (Eigen::Index k = 0; k < 3; ++k) {
      const Eigen::Index src = pos + k - 1;
      if (src < 0 || src >= seg_len) continue;
      patches.block(k * cin, t, cin, 1) = x.value().col(t + k - 1);
    }
  }
  Mat v = w.value() * patches;
  v.colwise() += b.value().col(0);
  auto out = wire(std::move(v), {x.node(), w.node(), b.node()});
  if (out->requires_grad) {
    out->backprop = [xn = x.node(), wn = w.node(), bn = b.node(),
                     patches = std::move(patches), seg_len, cin](Node& self) {
      if (bn->requires_grad) bn->accumulate(self.grad.rowwise().sum());
      if (wn->requires_grad) wn->accumulate(self.grad * patches.transpose());
      if (xn->requires_grad) {
        Mat dp = wn->value.transpose() * self.grad;
        Mat dx = Mat::Zero(xn->value.rows(), xn->value.cols());
        for (Eigen::Index t = 0; t < dx.cols(); ++t) {
          const Eigen::Index pos = t % seg_len;
          for (Eigen::Index k = 0; k < 3; ++k) {
            const Eigen::Index src = pos + k - 1;
            if (src < 0 || src >= seg_len) continue;
            dx.col(t + k - 1) += dp.block(k * cin, t, cin, 1);
          }
        }
        xn->accumulate(dx);
      }
    };
  }
  return Var(out);
}

}  // namespace pearl::ad

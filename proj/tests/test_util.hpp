#pragma once

#include <functional>
#include <random>
#include <vector>

#include "pearl/autodiff.hpp"

// Shared helpers for numeric tests.
namespace testutil {

using pearl::ad::Mat;
using pearl::ad::Var;

inline Mat random_mat(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                      double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

// Compares the tape gradient of the scalar f() against central finite
// differences for every entry of every leaf; returns the worst relative
// error. f must rebuild the graph from the leaves' current values each call.
inline double max_grad_rel_error(std::vector<Var> leaves,
                                 const std::function<Var()>& f,
                                 double h = 1e-5) {
  for (auto& l : leaves) l.zero_grad();
  pearl::ad::backward(f());
  std::vector<Mat> analytic;
  analytic.reserve(leaves.size());
  for (auto& l : leaves) analytic.push_back(l.grad());

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Mat& v = leaves[li].mutable_value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const double orig = v(i, j);
        v(i, j) = orig + h;
        const double fp = f().scalar();
        v(i, j) = orig - h;
        const double fm = f().scalar();
        v(i, j) = orig;
        const double num = (fp - fm) / (2.0 * h);
        const double ana = analytic[li](i, j);
        const double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
        worst = std::max(worst, std::abs(num - ana) / denom);
      }
    }
  }
  return worst;
}

}  // namespace testutil

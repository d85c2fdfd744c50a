#pragma once

#include <cstdint>
#include <vector>

// Rank correlation and pairwise accuracy metrics.
namespace pearl::metrics {

struct CorrelationReport {
  double tau_b = 0.0;
  double tau_c = 0.0;
  std::int64_t n = 0;
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t ties_x_only = 0;
  std::int64_t ties_y_only = 0;
  std::int64_t ties_both = 0;
};

// Exact O(n^2) pair enumeration; the reference implementation.
CorrelationReport kendall_report_exact(const std::vector<double>& xs,
                                       const std::vector<double>& ys);

// O(n log n) merge-sort inversion counting with full tie bookkeeping.
CorrelationReport kendall_report_fast(const std::vector<double>& xs,
                                      const std::vector<double>& ys);

// Dispatches to exact enumeration for n <= 10^4 and the fast method above.
CorrelationReport kendall_report(const std::vector<double>& xs,
                                 const std::vector<double>& ys);

double kendall_tau_b(const std::vector<double>& xs, const std::vector<double>& ys);
double kendall_tau_c(const std::vector<double>& xs, const std::vector<double>& ys);

// 100 * #(correct > foil) / #pairs; ties count as failures.
double pairwise_accuracy(const std::vector<std::pair<double, double>>& correct_foil);

}  // namespace pearl::metrics

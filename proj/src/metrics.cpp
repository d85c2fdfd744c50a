#include "pearl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pearl/common.hpp"

namespace pearl::metrics {

namespace {

using std::int64_t;

void check_inputs(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw ValidationError("correlation inputs have different lengths");
  }
  if (xs.size() < 2) {
    throw ValidationError("correlation requires at least 2 observations");
  }
}

int64_t distinct_count(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::unique(v.begin(), v.end()) - v.begin();
}

// Fills tau_b/tau_c from the pair counts; throws when either is undefined.
void finalize(CorrelationReport& r, const std::vector<double>& xs,
              const std::vector<double>& ys) {
  const int64_t cd = r.concordant + r.discordant;
  const double denom_x = double(cd + r.ties_x_only);
  const double denom_y = double(cd + r.ties_y_only);
  if (denom_x == 0.0 || denom_y == 0.0) {
    throw UndefinedCorrelationError(
        "tau_b undefined: one input is constant (all pairs tied)");
  }
  const int64_t m = std::min(distinct_count(xs), distinct_count(ys));
  if (m < 2) {
    throw UndefinedCorrelationError("tau_c undefined: fewer than 2 distinct values");
  }
  const double diff = double(r.concordant - r.discordant);
  r.tau_b = diff / std::sqrt(denom_x * denom_y);
  const double n = double(r.n);
  r.tau_c = 2.0 * double(m) * diff / (n * n * double(m - 1));
}

// Counts inversions in v with merge sort; v is sorted in place.
int64_t merge_count_inversions(std::vector<double>& v, std::vector<double>& tmp,
                               std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  int64_t inv = merge_count_inversions(v, tmp, lo, mid) +
                merge_count_inversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += int64_t(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return inv;
}

// Sum of t(t-1)/2 over runs of equal keys in a sorted range.
template <typename It, typename Eq>
int64_t tie_pairs(It begin, It end, Eq eq) {
  int64_t total = 0;
  for (It run = begin; run != end;) {
    It next = run + 1;
    while (next != end && eq(*run, *next)) ++next;
    const int64_t t = next - run;
    total += t * (t - 1) / 2;
    run = next;
  }
  return total;
}

}  // namespace

CorrelationReport kendall_report_exact(const std::vector<double>& xs,
                                       const std::vector<double>& ys) {
  check_inputs(xs, ys);
  CorrelationReport r;
  r.n = int64_t(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      if (dx == 0.0 && dy == 0.0) {
        ++r.ties_both;
      } else if (dx == 0.0) {
        ++r.ties_x_only;
      } else if (dy == 0.0) {
        ++r.ties_y_only;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        ++r.concordant;
      } else {
        ++r.discordant;
      }
    }
  }
  finalize(r, xs, ys);
  return r;
}

CorrelationReport kendall_report_fast(const std::vector<double>& xs,
                                      const std::vector<double>& ys) {
  check_inputs(xs, ys);
  const std::size_t n = xs.size();
  CorrelationReport r;
  r.n = int64_t(n);
  const int64_t n0 = r.n * (r.n - 1) / 2;

  // Pairs sorted by (x, y); y-inversions in this order are exactly the
  // discordant-or-y-tied-broken pairs Knight's decomposition needs.
  std::vector<std::pair<double, double>> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {xs[i], ys[i]};
  std::sort(pts.begin(), pts.end());

  const int64_t tx = tie_pairs(pts.begin(), pts.end(),
                               [](auto& a, auto& b) { return a.first == b.first; });
  const int64_t txy = tie_pairs(pts.begin(), pts.end(),
                                [](auto& a, auto& b) { return a == b; });

  std::vector<double> y_sorted_by_x(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) y_sorted_by_x[i] = pts[i].second;
  const int64_t swaps = merge_count_inversions(y_sorted_by_x, tmp, 0, n);

  // y_sorted_by_x is now fully sorted; reuse it for y tie counting.
  const int64_t ty = tie_pairs(y_sorted_by_x.begin(), y_sorted_by_x.end(),
                               [](double a, double b) { return a == b; });

  const int64_t diff = n0 - tx - ty + txy - 2 * swaps;  // C - D
  const int64_t sum = n0 - tx - ty + txy;               // C + D
  r.concordant = (sum + diff) / 2;
  r.discordant = (sum - diff) / 2;
  r.ties_x_only = tx - txy;
  r.ties_y_only = ty - txy;
  r.ties_both = txy;
  finalize(r, xs, ys);
  return r;
}

CorrelationReport kendall_report(const std::vector<double>& xs,
                                 const std::vector<double>& ys) {
  return xs.size() <= 10000 ? kendall_report_exact(xs, ys)
                            : kendall_report_fast(xs, ys);
}

double kendall_tau_b(const std::vector<double>& xs, const std::vector<double>& ys) {
  return kendall_report(xs, ys).tau_b;
}

double kendall_tau_c(const std::vector<double>& xs, const std::vector<double>& ys) {
  return kendall_report(xs, ys).tau_c;
}

double pairwise_accuracy(const std::vector<std::pair<double, double>>& correct_foil) {
  if (correct_foil.empty()) {
    throw ValidationError("pairwise accuracy of an empty pair list");
  }
  int64_t wins = 0;
  for (const auto& [correct, foil] : correct_foil) {
    if (correct > foil) ++wins;
  }
  return 100.0 * double(wins) / double(correct_foil.size());
}

}  // namespace pearl::metrics

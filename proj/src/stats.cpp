#include "dgtta/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dgtta/error.hpp"

namespace dgtta {

WilcoxonResult wilcoxon_one_sided(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("paired samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InvalidArgument("paired samples must be finite");
    const double diff = x[i] - y[i];
    if (diff != 0.0) d.push_back(diff);
  }
  const std::size_t n = d.size();
  if (n < 5) {
    throw InsufficientData("signed-rank test needs at least 5 non-zero differences, got " + std::to_string(n));
  }
  // Doubled average ranks of |d| stay integral under ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long doubled = static_cast<long>(i + j + 2);  // 2 * mean of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long w2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w2 += rank2[i];
  }
  WilcoxonResult r;
  r.n = n;
  r.w_plus = static_cast<double>(w2) / 2.0;
  if (n <= kWilcoxonExactLimit) {
    const long total = std::accumulate(rank2.begin(), rank2.end(), 0L);
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    long reach = 0;
    for (long rk : rank2) {
      for (long s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + rk)] += ways[static_cast<std::size_t>(s)];
      reach += rk;
    }
    double tail = 0.0;
    for (long s = w2; s <= total; ++s) tail += ways[static_cast<std::size_t>(s)];
    r.p_value = tail / std::ldexp(1.0, static_cast<int>(n));
    r.method = WilcoxonMethod::Exact;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    r.p_value = var > 0.0 ? 0.5 * std::erfc((r.w_plus - mean) / std::sqrt(var) / std::sqrt(2.0)) : 0.5;
    r.method = WilcoxonMethod::Normal;
  }
  return r;
}

std::string significance_stars(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p-value must lie in [0, 1]");
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

}  // namespace dgtta

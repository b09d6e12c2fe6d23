#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace dgtta {

enum class WilcoxonMethod { Exact, Normal };

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;  ///< sum of (average) ranks of positive differences
  std::size_t n = 0;    ///< pairs left after dropping zero differences
  WilcoxonMethod method = WilcoxonMethod::Exact;
};

inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Signed-rank test of the alternative "x tends to exceed y". Zero differences
/// are dropped; ties share average ranks. Exact sign-flip distribution up to 25
/// pairs, tie-corrected normal approximation beyond.
WilcoxonResult wilcoxon_one_sided(std::span<const double> x, std::span<const double> y);

/// "***" for p < 0.001, "**" for p < 0.01, "*" for p < 0.05, "" otherwise.
std::string significance_stars(double p);

}  // namespace dgtta

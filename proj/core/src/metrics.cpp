#include "sirenrope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sirenrope {

namespace {

constexpr double kClip = 1e-15;

void check_inputs(std::span<const double> p, std::span<const double> y, const char* what) {
  if (p.size() != y.size()) {
    throw std::invalid_argument(std::string(what) + ": predictions and labels differ in length");
  }
  if (p.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument(std::string(what) + ": labels must be 0 or 1");
  }
}

std::size_t count_positive(std::span<const double> y) {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1.0));
}

}  // namespace

double mean_log_loss(std::span<const double> p, std::span<const double> y) {
  check_inputs(p, y, "log loss");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
      throw std::invalid_argument("log loss: probability outside [0, 1]");
    }
    const double q = std::clamp(p[i], kClip, 1.0 - kClip);
    total -= y[i] == 1.0 ? std::log(q) : std::log1p(-q);
  }
  return total / static_cast<double>(p.size());
}

double normalized_entropy(std::span<const double> p, std::span<const double> y) {
  check_inputs(p, y, "normalized entropy");
  const std::size_t pos = count_positive(y);
  if (pos == 0 || pos == y.size()) {
    throw std::invalid_argument("normalized entropy: labels contain a single class");
  }
  const double r = static_cast<double>(pos) / static_cast<double>(y.size());
  const double base_entropy = -(r * std::log(r) + (1.0 - r) * std::log(1.0 - r));
  return mean_log_loss(p, y) / base_entropy;
}

double auc(std::span<const double> p, std::span<const double> y) {
  check_inputs(p, y, "auc");
  const std::size_t n = p.size();
  const std::size_t n_pos = count_positive(y);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: labels contain a single class");
  for (double v : p) {
    if (std::isnan(v)) throw std::invalid_argument("auc: NaN score");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  // Twice the positive rank sum, with tied groups sharing their mid-rank
  // (1-based ranks lo+1 .. hi give 2*midrank = lo + hi + 1).
  std::uint64_t twice_rank_sum = 0;
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo + 1;
    while (hi < n && p[order[hi]] == p[order[lo]]) ++hi;
    std::uint64_t group_pos = 0;
    for (std::size_t i = lo; i < hi; ++i) group_pos += y[order[i]] == 1.0 ? 1 : 0;
    twice_rank_sum += group_pos * static_cast<std::uint64_t>(lo + hi + 1);
    lo = hi;
  }
  const std::uint64_t twice_u =
      twice_rank_sum - static_cast<std::uint64_t>(n_pos) * static_cast<std::uint64_t>(n_pos + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace sirenrope

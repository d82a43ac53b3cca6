#pragma once

#include <span>

namespace sirenrope {

/// Mean binary cross-entropy of p against y divided by the entropy of the
/// empirical base rate of y. Probabilities are clipped to [1e-15, 1 - 1e-15].
/// Throws std::invalid_argument on size mismatch, empty input, p outside
/// [0, 1] or single-class labels.
double normalized_entropy(std::span<const double> p, std::span<const double> y);

/// Probability that a random positive scores above a random negative, ties
/// counting one half, computed from mid-ranks in O(n log n). Exact: the
/// result equals pair counting bit-for-bit. Throws on single-class labels.
double auc(std::span<const double> p, std::span<const double> y);

/// Mean binary cross-entropy with the same clipping as normalized_entropy.
double mean_log_loss(std::span<const double> p, std::span<const double> y);

}  // namespace sirenrope

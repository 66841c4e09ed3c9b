#pragma once

#include <optional>
#include <span>
#include <vector>

namespace nftidx::stats {

double mean(std::span<const double> x);

/// Median of a copy of `x`. Throws ValidationError on empty input.
double median(std::span<const double> x);

/// Median absolute deviation around the median (unscaled).
double mad(std::span<const double> x);

/// Robust normal-consistent scale: 1.4826 * MAD.
double robust_scale(std::span<const double> x);

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending; 0 <= p <= 1.
double quantile_sorted(std::span<const double> sorted, double p);

/// Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

inline constexpr double kMadToSigma = 1.4826;

}  // namespace nftidx::stats

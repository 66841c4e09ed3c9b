#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nftindex/hedonic.hpp"

namespace nftidx {

enum class GammaSource { fitted, moving_average, intraday };

std::string to_string(GammaSource s);

/// Probability that a listing at `log_price` is undersold when fair log
/// prices are Normal(fair_log_price, sigma^2):
///   0.5 * erfc((log_price - fair_log_price) / (sigma * sqrt 2)).
/// Clamped into the open interval (0, 1).
double undersold_probability(double log_price, double fair_log_price, double sigma);

struct GammaEstimate {
    double gamma = 0.0;
    GammaSource source = GammaSource::fitted;
};

/// Mean of the last `window` fitted gammas strictly before `period`
/// (or of the last `window` overall when `period` is not given).
GammaEstimate estimate_gamma_moving_average(const HedonicParams& params, std::size_t window = 7,
                                            std::optional<std::int64_t> period = std::nullopt);

/// One same-day sale used for the intraday estimate.
struct IntradaySale {
    std::string collection;
    TraitFrequencyAggregate freq;
    double price_usd = 0.0;
};

/// Mean over the sales of log price minus every non-gamma term. Sales of
/// unfitted collections are ignored; throws ValidationError when none remain.
GammaEstimate estimate_gamma_intraday(const HedonicParams& params, std::span<const IntradaySale> sales);

struct MispricingAssessment {
    std::string collection;
    std::string token_id;
    std::int64_t period = 0;
    double listed_price = 0.0;
    double fair_log_price = 0.0;
    double p_under = 0.5;
    double p_over = 0.5;
    GammaSource gamma_source = GammaSource::fitted;
};

/// Uses the fitted gamma of `period` when present, else `gamma` when given,
/// else a 7-period moving average before `period`.
MispricingAssessment assess(const HedonicParams& params, const std::string& collection, const std::string& token_id,
                            const TraitFrequencyAggregate& freq, std::int64_t period, double listed_price,
                            const std::optional<GammaEstimate>& gamma = std::nullopt);

struct Listing {
    std::string collection;
    std::string token_id;
    TraitFrequencyAggregate freq;
    double price_usd = 0.0;
};

struct SkippedListing {
    Listing listing;
    std::string reason;
};

struct ListingRanking {
    std::vector<MispricingAssessment> ranked;  // p_under descending
    std::vector<SkippedListing> skipped;
};

/// Ties are broken by collection id, then token id.
ListingRanking rank_listings(const HedonicParams& params, std::span<const Listing> listings, std::int64_t period,
                             const std::optional<GammaEstimate>& gamma = std::nullopt);

}  // namespace nftidx

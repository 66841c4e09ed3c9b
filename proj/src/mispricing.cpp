#include "nftindex/mispricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nftindex/errors.hpp"

namespace nftidx {

std::string to_string(GammaSource s) {
    switch (s) {
        case GammaSource::fitted:
            return "fitted";
        case GammaSource::moving_average:
            return "moving_average";
        case GammaSource::intraday:
            return "intraday";
    }
    return "unknown";
}

double undersold_probability(double log_price, double fair_log_price, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("sigma must be > 0");
    // erfc keeps full relative accuracy in the upper tail, where 1 - erf cancels.
    const double p = 0.5 * std::erfc((log_price - fair_log_price) / (sigma * std::sqrt(2.0)));
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return std::clamp(p, lo, hi);
}

GammaEstimate estimate_gamma_moving_average(const HedonicParams& params, std::size_t window,
                                            std::optional<std::int64_t> period) {
    if (window < 1) throw ValidationError("moving-average window must be >= 1");
    std::vector<double> history;
    for (const auto& [t, g] : params.gamma) {
        if (!period || t < *period) history.push_back(g);
    }
    if (history.empty()) throw ValidationError("no fitted gamma available for a moving-average estimate");
    const std::size_t n = std::min(window, history.size());
    double sum = 0.0;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) sum += history[i];
    return {sum / static_cast<double>(n), GammaSource::moving_average};
}

GammaEstimate estimate_gamma_intraday(const HedonicParams& params, std::span<const IntradaySale> sales) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : sales) {
        if (!params.alpha.count(s.collection) || !(s.price_usd > 0.0)) continue;
        sum += std::log(s.price_usd) - structural_log_price(params, s.collection, s.freq);
        ++n;
    }
    if (n == 0) throw ValidationError("no same-day sale of a fitted collection for an intraday gamma estimate");
    return {sum / static_cast<double>(n), GammaSource::intraday};
}

MispricingAssessment assess(const HedonicParams& params, const std::string& collection, const std::string& token_id,
                            const TraitFrequencyAggregate& freq, std::int64_t period, double listed_price,
                            const std::optional<GammaEstimate>& gamma) {
    if (!(listed_price > 0.0)) throw ValidationError("listed price must be > 0");
    GammaEstimate g;
    if (const auto it = params.gamma.find(period); it != params.gamma.end()) {
        g = {it->second, GammaSource::fitted};
    } else if (gamma) {
        g = *gamma;
    } else {
        g = estimate_gamma_moving_average(params, 7, period);
    }
    MispricingAssessment a;
    a.collection = collection;
    a.token_id = token_id;
    a.period = period;
    a.listed_price = listed_price;
    a.fair_log_price = structural_log_price(params, collection, freq) + g.gamma;
    a.p_under = undersold_probability(std::log(listed_price), a.fair_log_price, params.sigma);
    a.p_over = 1.0 - a.p_under;
    a.gamma_source = g.source;
    return a;
}

ListingRanking rank_listings(const HedonicParams& params, std::span<const Listing> listings, std::int64_t period,
                             const std::optional<GammaEstimate>& gamma) {
    ListingRanking out;
    // Resolve the period's gamma once so every listing shares it.
    std::optional<GammaEstimate> shared = gamma;
    if (!params.gamma.count(period) && !shared) {
        try {
            shared = estimate_gamma_moving_average(params, 7, period);
        } catch (const ValidationError&) {
        }
    }
    for (const auto& l : listings) {
        try {
            out.ranked.push_back(assess(params, l.collection, l.token_id, l.freq, period, l.price_usd, shared));
        } catch (const ValidationError& e) {
            out.skipped.push_back({l, e.what()});
        }
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const auto& a, const auto& b) {
        if (a.p_under != b.p_under) return a.p_under > b.p_under;
        if (a.collection != b.collection) return a.collection < b.collection;
        return a.token_id < b.token_id;
    });
    return out;
}

}  // namespace nftidx

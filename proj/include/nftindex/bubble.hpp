#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nftidx {

/// Settings of the ADF regression
///   dy(t) = mu + nu * y(t-1) + sum_{i=1..k} psi_i * dy(t-i) + e(t).
/// The intercept mu is always included.
struct AdfConfig {
    int lag_order = 1;
};

/// Null model y(t+1) = d * (T+1)^(-eta) + y(t) + e(t), e ~ Normal(0, sigma^2), y(0) = 0.
struct NullParams {
    double eta = 1.0;
    double sigma = 1.0;
    double drift = 1.0;  // d
};

struct BsadfConfig {
    std::size_t min_window = 40;  // w
    std::size_t min_duration = 5;  // delta
    double confidence = 0.99;     // c used for dating
    int n_paths = 5000;           // N_MC
    std::uint64_t seed = 20220117;
    NullParams null;
    AdfConfig adf;
    bool use_log = false;  // test log levels instead of levels
    bool use_ma = false;   // test the 7-period moving average instead of raw levels

    /// Throws ValidationError when an invariant is broken.
    void validate() const;
};

/// ADF t-ratio of nu on the window {y[first], ..., y[last]}.
/// Throws ValidationError when the window has fewer than lag_order + 3 points
/// and NumericalError("degenerate regression") when the regression has no
/// residual degrees of freedom, zero regressor variance or a perfect fit.
double adf_statistic(std::span<const double> y, std::size_t first, std::size_t last, const AdfConfig& config = {});

struct BsadfPoint {
    double value = 0.0;
    std::size_t best_start = 0;   // start point attaining the sup
    std::size_t skipped = 0;      // degenerate windows left out of the sup
};

/// Backward sup: max over t' in {0, ..., t - w} of ADF(t' -> t).
/// Degenerate windows are skipped; if all are degenerate NumericalError is thrown.
BsadfPoint bsadf(std::span<const double> y, std::size_t t, std::size_t min_window, const AdfConfig& config = {});

/// BSADF for every t in [w, y.size() - 1]; entry i belongs to period w + i.
/// Periods whose windows are all degenerate hold nullopt.
std::vector<std::optional<double>> bsadf_signal(std::span<const double> y, std::size_t min_window,
                                                const AdfConfig& config = {});

/// Forward sup: entry i is max over t' in {w, ..., w + i} of ADF(0 -> t').
/// Degenerate windows are skipped (nullopt until the first valid one).
std::vector<std::optional<double>> sadf_curve(std::span<const double> y, std::size_t min_window,
                                              const AdfConfig& config = {});

/// Quantile curves of the forward-sup statistic under the null model.
struct CriticalValueTable {
    std::size_t horizon = 0;  // T
    std::size_t min_window = 0;
    int n_paths = 0;
    std::uint64_t seed = 0;
    NullParams null;
    int lag_order = 1;
    std::vector<double> confidences;          // ascending
    std::vector<std::vector<double>> curves;  // curves[j][t - w] at confidences[j]

    /// v^c_w(t). Throws ValidationError when t or c is not tabulated.
    double at(std::size_t t, double confidence) const;
    std::vector<double> curve(double confidence) const;
    bool has_confidence(double confidence) const;

    /// True when this table was produced with the given settings.
    bool matches(std::size_t horizon, std::size_t min_window, int n_paths, std::uint64_t seed,
                 const NullParams& null, int lag_order) const;

    nlohmann::json to_json() const;
    static CriticalValueTable from_json(const nlohmann::json& j);
};

/// Monte-Carlo critical values. Path i draws from its own stream derived from
/// (seed, i), and quantiles are taken over the sorted per-path values, so the
/// table is identical for every thread count.
CriticalValueTable critical_values(std::size_t horizon, std::size_t min_window, std::span<const double> confidences,
                                   int n_paths, std::uint64_t seed, const NullParams& null,
                                   const AdfConfig& config = {}, unsigned threads = 1);

/// Loads a cached table from `cache_path` when its key matches and it covers
/// every requested confidence; otherwise computes and writes it.
CriticalValueTable cached_critical_values(const std::string& cache_path, std::size_t horizon,
                                          std::size_t min_window, std::span<const double> confidences, int n_paths,
                                          std::uint64_t seed, const NullParams& null, const AdfConfig& config,
                                          unsigned threads, bool* cache_hit = nullptr);

struct BubbleEpisode {
    std::size_t start = 0;
    std::optional<std::size_t> end;  // nullopt: still running at T
    bool operator==(const BubbleEpisode&) const = default;
};

/// Dates episodes. `signal[i]` and `critical[i]` refer to period first_period + i.
/// Opens at the first period with signal > critical; closes at the first
/// period t >= start + min_duration with signal < critical; then repeats
/// from the period after the close.
std::vector<BubbleEpisode> detect_bubbles(std::span<const std::optional<double>> signal,
                                          std::span<const double> critical, std::size_t first_period,
                                          std::size_t min_duration);

struct BubbleReport {
    std::size_t first_period = 0;  // period of signal[0]
    std::vector<std::optional<double>> signal;
    std::vector<double> cv95;
    std::vector<double> cv99;
    std::vector<double> cv_dating;  // curve at config.confidence
    std::vector<BubbleEpisode> episodes;
    bool degenerate = false;  // every BSADF window was degenerate
    bool cache_hit = false;
};

/// BSADF on `levels` (optionally logged / smoothed per config), dated against
/// the critical table. Pass an empty cache path to always simulate.
BubbleReport analyze_bubbles(std::span<const double> levels, const BsadfConfig& config,
                             const std::string& cache_path = {}, unsigned threads = 1);

nlohmann::json to_json(const AdfConfig& c);
nlohmann::json to_json(const NullParams& p);
nlohmann::json to_json(const BsadfConfig& c);

}  // namespace nftidx

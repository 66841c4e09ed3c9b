#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nftindex/market_data.hpp"

namespace nftidx {

struct FitConfig {
    double huber_delta = 1.345;  // in robust-scale units
    int max_iterations = 200;
    double coef_tolerance = 1e-8;
    std::size_t min_sales_per_collection = 1;
    std::size_t min_sales_per_period = 1;
    unsigned threads = 1;  // never changes results

    void validate() const;
    nlohmann::json to_json() const;
};

/// One retained sale. Dummy indices are dense positions into
/// Design::collections / Design::periods.
struct DesignRow {
    std::size_t sale_index = 0;
    std::size_t collection = 0;
    std::size_t period = 0;
    TraitFrequencyAggregate freq;
    double target = 0.0;  // natural log of the USD price
};

struct Design {
    std::vector<DesignRow> rows;
    std::vector<std::string> collections;  // ascending ids; [0] is the reference
    std::vector<std::int64_t> periods;     // ascending grid periods; [0] is the reference
    PeriodGrid grid;
    std::size_t dropped_collection_rows = 0;
    std::size_t dropped_period_rows = 0;
    std::vector<std::string> warnings;
};

/// Builds one row per sale. Collections and periods below the min-sales
/// thresholds are dropped (iterated to a fixed point) and reported.
/// Throws ValidationError when sales lack a period or frequency entry, or
/// when no row survives.
Design build_design(std::span<const SaleRecord> sales, std::span<const PeriodAssignment> periods,
                    const std::map<AssetKey, TraitFrequencyAggregate>& frequencies, const PeriodGrid& grid,
                    const FitConfig& config = {});

/// Identifiability constraints applied by the fit.
struct Gauge {
    std::string reference_collection;  // alpha fixed at 0
    std::int64_t reference_period = 0;  // gamma fixed at 0
    std::vector<std::string> pinned;    // columns fixed at 0 because they are constant across rows
};

struct HedonicParams {
    double log_scale = 0.0;               // log P
    std::map<std::string, double> alpha;  // per collection
    double beta_min = 0.0;
    double beta_avg = 0.0;
    double beta_max = 0.0;
    std::map<std::int64_t, double> gamma;  // per grid period
    double sigma = 1.0;
    Gauge gauge;
    PeriodGrid grid;

    /// Same observables in another gauge: gamma + c, log_scale - c.
    HedonicParams shifted(double c) const;

    nlohmann::json to_json() const;
    static HedonicParams from_json(const nlohmann::json& j);
};

struct FitDiagnostics {
    int iterations = 0;
    bool converged = false;
    double last_step = 0.0;
    double residual_median = 0.0;
    double residual_mad = 0.0;
    std::size_t rows_used = 0;
    std::size_t dropped_collection_rows = 0;
    std::size_t dropped_period_rows = 0;
    double condition_number = 0.0;  // of the unit-diagonal normal matrix
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

struct FitResult {
    HedonicParams params;
    FitDiagnostics diagnostics;
};

/// Huber M-estimate by IRLS with the scale re-estimated as 1.4826*MAD each
/// iteration. Throws NumericalError naming the collinear columns when the
/// gauged design is rank deficient.
FitResult fit(const Design& design, const FitConfig& config = {});

/// log Pbar = log P + alpha_C + beta . f + gamma_t.
/// Throws ValidationError for an unknown collection or period.
double predict_log_price(const HedonicParams& params, const std::string& collection,
                         const TraitFrequencyAggregate& freq, std::int64_t period);

/// Every term of predict_log_price except gamma_t.
double structural_log_price(const HedonicParams& params, const std::string& collection,
                            const TraitFrequencyAggregate& freq);

/// Model document: params, diagnostics and config echo.
nlohmann::json model_to_json(const FitResult& result, const FitConfig& config);

}  // namespace nftidx

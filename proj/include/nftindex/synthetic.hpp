#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nftindex/hedonic.hpp"
#include "nftindex/market_data.hpp"
#include "nftindex/price_index.hpp"

namespace nftidx {

struct GammaPathSpec {
    enum class Kind { constant, random_walk, explosive_segment };
    Kind kind = Kind::random_walk;
    double drift = 0.0;  // per-period drift of the walk
    double vol = 0.02;   // per-period volatility of the walk
    // explosive_segment: log(1 + rate) is added to every increment in
    // (segment_start, segment_start + segment_length].
    std::size_t segment_start = 0;
    std::size_t segment_length = 0;
    double segment_rate = 0.0;
    // Periods after the segment over which its total gain is given back in
    // equal steps. 0 leaves the level where the segment ended.
    std::size_t collapse_length = 0;
};

struct TraitSpec {
    std::size_t names = 6;          // trait names per collection
    std::size_t min_values = 2;     // vocabulary size range per name
    std::size_t max_values = 12;
    double zipf_exponent = 1.2;     // value weights ~ 1 / rank^s
    double inclusion_probability = 0.75;  // chance an asset carries a given name
};

struct GeneratorSpec {
    std::size_t n_collections = 5;
    std::size_t assets_per_collection = 100;
    std::size_t n_periods = 30;  // periods 0 .. n_periods - 1
    TraitSpec traits;
    double log_scale = 6.907755278982137;  // log 1000
    double alpha_sd = 0.5;
    double beta_min = -0.8;
    double beta_avg = -0.4;
    double beta_max = -0.3;
    GammaPathSpec gamma;
    double sigma_noise = 0.3;
    double sales_per_collection_period = 5.0;  // Poisson mean
    bool full_panel = false;  // every asset sells exactly once per period
    std::uint64_t seed = 1;
    Date epoch = Date{std::chrono::year{2021} / 6 / 1};

    void validate() const;
    nlohmann::json to_json() const;
    static GeneratorSpec from_json(const nlohmann::json& j);
};

struct SyntheticMarket {
    std::vector<Asset> assets;
    std::vector<SaleRecord> sales;  // chronological
    std::vector<double> noise;      // chi of each sale
    std::map<AssetKey, TraitFrequencyAggregate> frequencies;
    HedonicParams truth;  // gauge of the fitter: alpha[first id] = 0, gamma[0] = 0
    IndexSeries true_index;
};

/// Draws a market from the multiplicative pricing model. Deterministic in spec.seed.
SyntheticMarket generate(const GeneratorSpec& spec);

/// Writes assets.<ext>, sales.<ext>, ground_truth.json and true_index.csv into `dir`.
void write_market(const SyntheticMarket& market, const GeneratorSpec& spec, const std::filesystem::path& dir,
                  FileFormat format = FileFormat::jsonl);

}  // namespace nftidx

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nftindex/dates.hpp"

namespace nftidx {

/// One (trait name, trait value) pair of an asset.
struct Trait {
    std::string name;
    std::string value;
    auto operator<=>(const Trait&) const = default;
};

struct Collection {
    std::string id;  // contract address or other opaque key
    std::string name;
};

struct AssetKey {
    std::string collection;
    std::string token_id;
    auto operator<=>(const AssetKey&) const = default;
};

struct Asset {
    std::string collection;
    std::string token_id;
    std::vector<Trait> traits;  // sorted, unique
    bool placeholder = false;   // created for a sale whose asset was not in the asset file

    AssetKey key() const { return {collection, token_id}; }
};

struct SaleRecord {
    std::string collection;
    std::string token_id;
    Timestamp timestamp;
    double price_usd = 0.0;

    AssetKey key() const { return {collection, token_id}; }
};

/// Daily period grid: period(ts) = floor((ts - epoch) / 1 day).
struct PeriodGrid {
    Date epoch;
    std::int64_t last_period = 1;  // T

    std::int64_t period_of(Timestamp ts) const;
    Date date_of(std::int64_t period) const { return epoch + std::chrono::days{period}; }
    bool contains(Timestamp ts) const;

    /// Smallest grid covering every sale (epoch = UTC day of the first sale,
    /// T at least 1). Throws ValidationError when `sales` is empty.
    static PeriodGrid covering(std::span<const SaleRecord> sales);
};

/// Scarcity features of one asset: min/mean/max of its trait frequencies.
struct TraitFrequencyAggregate {
    double f_min = 1.0;
    double f_avg = 1.0;
    double f_max = 1.0;
};

struct IngestReport {
    std::size_t asset_rows = 0;
    std::size_t assets_accepted = 0;
    std::size_t duplicate_asset_rows = 0;    // identical re-listing, merged
    std::size_t duplicate_trait_pairs = 0;   // repeated (p,v) within one asset, dropped
    std::size_t sale_rows = 0;
    std::size_t sales_accepted = 0;
    std::size_t rejected_nonpositive_price = 0;
    std::size_t rejected_missing_price = 0;
    std::size_t rejected_out_of_window = 0;
    std::size_t placeholder_assets = 0;
    std::vector<std::string> placeholder_keys;  // "collection/token_id"

    std::size_t rejected_total() const {
        return rejected_nonpositive_price + rejected_missing_price + rejected_out_of_window;
    }
    nlohmann::json to_json() const;
};

enum class FileFormat { jsonl, csv };

/// Parses "jsonl" / "csv"; throws ValidationError otherwise.
FileFormat parse_file_format(const std::string& name);

/// Guesses the format from the extension (".csv" is CSV, anything else JSONL).
FileFormat format_from_extension(const std::filesystem::path& path);

struct MarketData {
    std::vector<Collection> collections;  // sorted by id
    std::vector<Asset> assets;            // sorted by (collection, token_id)
    std::vector<SaleRecord> sales;        // chronological, stable for ties
    IngestReport report;

    const Asset* find(const AssetKey& key) const;

    /// Assets of one collection taken from the asset file (placeholders excluded).
    std::vector<Asset> collection_assets(const std::string& collection) const;
};

/// Reads the asset and sales files. Malformed rows and unknown timestamp
/// formats throw ValidationError naming the file and line; rows with a missing
/// or non-positive price are rejected and counted. When `window` is given,
/// sales outside it are rejected and counted. Sales whose asset is absent
/// from the asset file get a traitless placeholder asset.
MarketData ingest(const std::filesystem::path& assets_path, const std::filesystem::path& sales_path,
                  FileFormat format, const std::optional<PeriodGrid>& window = std::nullopt);

/// Parses an asset file on its own (same rules as ingest).
std::vector<Asset> read_assets(const std::filesystem::path& path, FileFormat format, IngestReport& report);

/// Serializers in the ingest schema.
std::string assets_to_jsonl(std::span<const Asset> assets);
std::string sales_to_jsonl(std::span<const SaleRecord> sales);
std::string assets_to_csv(std::span<const Asset> assets);
std::string sales_to_csv(std::span<const SaleRecord> sales);

/// Share of `collection_assets` carrying `trait`. Throws ValidationError
/// when the set is empty or spans several collections.
double trait_frequency(std::span<const Asset> collection_assets, const Trait& trait);

/// (min, mean, max) of the frequencies of the asset's own traits; (1,1,1)
/// for a traitless asset.
TraitFrequencyAggregate aggregate_frequencies(const Asset& asset, std::span<const Asset> collection_assets);

/// Integer trait counts for one collection; aggregates for many assets
/// without re-scanning the collection.
class FrequencyTable {
public:
    FrequencyTable() = default;
    explicit FrequencyTable(std::span<const Asset> collection_assets);

    std::size_t size() const { return n_assets_; }
    std::size_t count(const Trait& trait) const;
    double frequency(const Trait& trait) const;
    TraitFrequencyAggregate aggregate(const Asset& asset) const;

private:
    std::string collection_;
    std::size_t n_assets_ = 0;
    std::map<Trait, std::size_t> counts_;
};

/// Aggregates for every asset in `data`, keyed by asset. Placeholders (and
/// assets of collections absent from the asset file) get (1,1,1).
std::map<AssetKey, TraitFrequencyAggregate> compute_frequencies(const MarketData& data);

struct PeriodAssignment {
    std::size_t sale_index;  // position in the input span
    std::int64_t period;
};

/// Maps each sale to its grid period, preserving order. Throws
/// ValidationError listing sales outside [epoch, epoch + T + 1 days).
std::vector<PeriodAssignment> assign_periods(std::span<const SaleRecord> sales, const PeriodGrid& grid);

}  // namespace nftidx

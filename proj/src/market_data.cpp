#include "nftindex/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "nftindex/errors.hpp"
#include "nftindex/io.hpp"

namespace nftidx {

namespace fs = std::filesystem;
using nlohmann::json;

std::int64_t PeriodGrid::period_of(Timestamp ts) const {
    const Date day = std::chrono::floor<std::chrono::days>(ts);
    return (day - epoch).count();
}

bool PeriodGrid::contains(Timestamp ts) const {
    const std::int64_t p = period_of(ts);
    return p >= 0 && p <= last_period;
}

PeriodGrid PeriodGrid::covering(std::span<const SaleRecord> sales) {
    if (sales.empty()) throw ValidationError("cannot infer a period grid from zero sales");
    const auto [lo, hi] = std::minmax_element(sales.begin(), sales.end(), [](const auto& a, const auto& b) {
        return a.timestamp < b.timestamp;
    });
    PeriodGrid grid;
    grid.epoch = std::chrono::floor<std::chrono::days>(lo->timestamp);
    grid.last_period = std::max<std::int64_t>(1, grid.period_of(hi->timestamp));
    return grid;
}

json IngestReport::to_json() const {
    return {{"assets",
             {{"rows", asset_rows},
              {"accepted", assets_accepted},
              {"duplicate_rows_merged", duplicate_asset_rows},
              {"duplicate_trait_pairs_dropped", duplicate_trait_pairs}}},
            {"sales",
             {{"rows", sale_rows},
              {"accepted", sales_accepted},
              {"rejected", rejected_total()},
              {"rejected_by_reason",
               {{"nonpositive_price", rejected_nonpositive_price},
                {"missing_price", rejected_missing_price},
                {"out_of_window", rejected_out_of_window}}}}},
            {"placeholder_assets", {{"count", placeholder_assets}, {"keys", placeholder_keys}}}};
}

FileFormat parse_file_format(const std::string& name) {
    if (name == "jsonl") return FileFormat::jsonl;
    if (name == "csv") return FileFormat::csv;
    throw ValidationError("unknown file format '" + name + "' (expected jsonl or csv)");
}

FileFormat format_from_extension(const fs::path& path) {
    return path.extension() == ".csv" ? FileFormat::csv : FileFormat::jsonl;
}

const Asset* MarketData::find(const AssetKey& key) const {
    const auto it = std::lower_bound(assets.begin(), assets.end(), key,
                                     [](const Asset& a, const AssetKey& k) { return a.key() < k; });
    return it != assets.end() && it->key() == key ? &*it : nullptr;
}

std::vector<Asset> MarketData::collection_assets(const std::string& collection) const {
    std::vector<Asset> out;
    for (const auto& a : assets) {
        if (a.collection == collection && !a.placeholder) out.push_back(a);
    }
    return out;
}

namespace {

[[noreturn]] void malformed(const fs::path& path, std::size_t line, const std::string& what) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": malformed row: " + what);
}

std::string json_scalar_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    return v.dump();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

double parse_price(const std::string& text, const fs::path& path, std::size_t line) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
        malformed(path, line, "price_usd '" + text + "' is not a decimal number");
    }
    return v;
}

// Sorts and deduplicates, counting dropped repeats.
std::vector<Trait> normalize_traits(std::vector<Trait> traits, std::size_t& dropped) {
    std::sort(traits.begin(), traits.end());
    const auto last = std::unique(traits.begin(), traits.end());
    dropped += static_cast<std::size_t>(traits.end() - last);
    traits.erase(last, traits.end());
    return traits;
}

struct RawAsset {
    Asset asset;
    std::string collection_name;
    std::size_t line;
};

std::vector<RawAsset> parse_assets_jsonl(const fs::path& path, const std::string& text, IngestReport& report) {
    std::vector<RawAsset> out;
    const auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        if (trim(lines[i]).empty()) continue;
        ++report.asset_rows;
        json row;
        try {
            row = json::parse(lines[i]);
        } catch (const json::parse_error& e) {
            malformed(path, lineno, e.what());
        }
        if (!row.is_object()) malformed(path, lineno, "expected a JSON object");
        if (!row.contains("collection") || !row["collection"].is_string()) malformed(path, lineno, "missing collection");
        if (!row.contains("token_id")) malformed(path, lineno, "missing token_id");
        RawAsset ra;
        ra.line = lineno;
        ra.asset.collection = row["collection"].get<std::string>();
        ra.asset.token_id = json_scalar_string(row["token_id"]);
        if (ra.asset.collection.empty() || ra.asset.token_id.empty()) malformed(path, lineno, "empty collection or token_id");
        if (row.contains("collection_name") && row["collection_name"].is_string()) {
            ra.collection_name = row["collection_name"].get<std::string>();
        }
        std::vector<Trait> traits;
        if (row.contains("traits") && !row["traits"].is_null()) {
            if (!row["traits"].is_array()) malformed(path, lineno, "traits must be an array");
            for (const auto& t : row["traits"]) {
                if (!t.is_object() || !t.contains("trait_type") || !t.contains("value")) {
                    malformed(path, lineno, "trait entries need trait_type and value");
                }
                traits.push_back({json_scalar_string(t["trait_type"]), json_scalar_string(t["value"])});
            }
        }
        ra.asset.traits = normalize_traits(std::move(traits), report.duplicate_trait_pairs);
        out.push_back(std::move(ra));
    }
    return out;
}

std::map<std::string, std::size_t> csv_header(const fs::path& path, const std::vector<std::string>& lines,
                                              std::initializer_list<const char*> required) {
    if (lines.empty()) throw ValidationError(path.string() + ": empty CSV file (header required)");
    std::map<std::string, std::size_t> cols;
    const auto header = io::split_csv_line(lines[0]);
    for (std::size_t i = 0; i < header.size(); ++i) cols[trim(header[i])] = i;
    for (const char* name : required) {
        if (!cols.count(name)) throw ValidationError(path.string() + ":1: CSV header lacks column '" + name + "'");
    }
    return cols;
}

std::vector<RawAsset> parse_assets_csv(const fs::path& path, const std::string& text, IngestReport& report) {
    const auto lines = io::split_lines(text);
    const auto cols = csv_header(path, lines, {"collection", "token_id"});
    const auto traits_col = cols.count("traits") ? std::optional<std::size_t>(cols.at("traits")) : std::nullopt;
    const auto name_col =
        cols.count("collection_name") ? std::optional<std::size_t>(cols.at("collection_name")) : std::nullopt;
    const std::size_t width = io::split_csv_line(lines[0]).size();
    std::vector<RawAsset> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        if (trim(lines[i]).empty()) continue;
        ++report.asset_rows;
        std::vector<std::string> f;
        try {
            f = io::split_csv_line(lines[i]);
        } catch (const ValidationError& e) {
            malformed(path, lineno, e.what());
        }
        if (f.size() != width) malformed(path, lineno, "expected " + std::to_string(width) + " fields");
        RawAsset ra;
        ra.line = lineno;
        ra.asset.collection = trim(f[cols.at("collection")]);
        ra.asset.token_id = trim(f[cols.at("token_id")]);
        if (ra.asset.collection.empty() || ra.asset.token_id.empty()) malformed(path, lineno, "empty collection or token_id");
        if (name_col) ra.collection_name = f[*name_col];
        std::vector<Trait> traits;
        if (traits_col && !trim(f[*traits_col]).empty()) {
            std::stringstream ss(f[*traits_col]);
            std::string pair;
            while (std::getline(ss, pair, ';')) {
                if (trim(pair).empty()) continue;
                const auto eq = pair.find('=');
                if (eq == std::string::npos) malformed(path, lineno, "trait '" + pair + "' is not name=value");
                traits.push_back({trim(pair.substr(0, eq)), trim(pair.substr(eq + 1))});
            }
        }
        ra.asset.traits = normalize_traits(std::move(traits), report.duplicate_trait_pairs);
        out.push_back(std::move(ra));
    }
    return out;
}

struct RawSale {
    std::string collection;
    std::string token_id;
    std::string timestamp;
    std::optional<std::string> price;
};

std::vector<RawSale> parse_sales_rows(const fs::path& path, const std::string& text, FileFormat format,
                                      std::vector<std::size_t>& line_numbers) {
    std::vector<RawSale> out;
    const auto lines = io::split_lines(text);
    if (format == FileFormat::jsonl) {
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::size_t lineno = i + 1;
            if (trim(lines[i]).empty()) continue;
            json row;
            try {
                row = json::parse(lines[i]);
            } catch (const json::parse_error& e) {
                malformed(path, lineno, e.what());
            }
            if (!row.is_object()) malformed(path, lineno, "expected a JSON object");
            for (const char* key : {"collection", "token_id", "timestamp"}) {
                if (!row.contains(key) || row[key].is_null()) malformed(path, lineno, std::string("missing ") + key);
            }
            RawSale s{json_scalar_string(row["collection"]), json_scalar_string(row["token_id"]),
                      json_scalar_string(row["timestamp"]), std::nullopt};
            if (row.contains("price_usd") && !row["price_usd"].is_null()) {
                const auto& p = row["price_usd"];
                if (!p.is_string() && !p.is_number()) malformed(path, lineno, "price_usd must be a decimal string");
                s.price = p.is_string() ? p.get<std::string>() : p.dump();
                if (trim(*s.price).empty()) s.price.reset();
            }
            out.push_back(std::move(s));
            line_numbers.push_back(lineno);
        }
        return out;
    }
    const auto cols = csv_header(path, lines, {"collection", "token_id", "timestamp", "price_usd"});
    const std::size_t width = io::split_csv_line(lines[0]).size();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        if (trim(lines[i]).empty()) continue;
        std::vector<std::string> f;
        try {
            f = io::split_csv_line(lines[i]);
        } catch (const ValidationError& e) {
            malformed(path, lineno, e.what());
        }
        if (f.size() != width) malformed(path, lineno, "expected " + std::to_string(width) + " fields");
        RawSale s{trim(f[cols.at("collection")]), trim(f[cols.at("token_id")]), trim(f[cols.at("timestamp")]),
                  std::nullopt};
        const std::string price = trim(f[cols.at("price_usd")]);
        if (!price.empty()) s.price = price;
        out.push_back(std::move(s));
        line_numbers.push_back(lineno);
    }
    return out;
}

std::vector<Asset> merge_assets(const fs::path& path, std::vector<RawAsset> raw, IngestReport& report,
                                std::map<std::string, std::string>* names) {
    std::map<AssetKey, std::pair<Asset, std::size_t>> merged;
    for (auto& ra : raw) {
        const AssetKey key = ra.asset.key();
        if (names && !ra.collection_name.empty()) names->emplace(key.collection, ra.collection_name);
        const auto it = merged.find(key);
        if (it == merged.end()) {
            merged.emplace(key, std::make_pair(std::move(ra.asset), ra.line));
            continue;
        }
        if (it->second.first.traits != ra.asset.traits) {
            throw ValidationError(path.string() + ":" + std::to_string(ra.line) + ": asset " + key.collection + "/" +
                                  key.token_id + " repeats line " + std::to_string(it->second.second) +
                                  " with different traits");
        }
        ++report.duplicate_asset_rows;
    }
    std::vector<Asset> out;
    out.reserve(merged.size());
    for (auto& [key, entry] : merged) out.push_back(std::move(entry.first));
    return out;
}

}  // namespace

std::vector<Asset> read_assets(const fs::path& path, FileFormat format, IngestReport& report) {
    if (!fs::exists(path)) throw ValidationError("asset file not found: " + path.string());
    const std::string text = io::read_text(path);
    auto raw = format == FileFormat::jsonl ? parse_assets_jsonl(path, text, report) : parse_assets_csv(path, text, report);
    auto assets = merge_assets(path, std::move(raw), report, nullptr);
    report.assets_accepted = assets.size();
    return assets;
}

MarketData ingest(const fs::path& assets_path, const fs::path& sales_path, FileFormat format,
                  const std::optional<PeriodGrid>& window) {
    if (!fs::exists(assets_path)) throw ValidationError("asset file not found: " + assets_path.string());
    if (!fs::exists(sales_path)) throw ValidationError("sales file not found: " + sales_path.string());

    MarketData data;
    IngestReport& report = data.report;
    std::map<std::string, std::string> names;
    {
        const std::string text = io::read_text(assets_path);
        auto raw = format == FileFormat::jsonl ? parse_assets_jsonl(assets_path, text, report)
                                               : parse_assets_csv(assets_path, text, report);
        data.assets = merge_assets(assets_path, std::move(raw), report, &names);
        report.assets_accepted = data.assets.size();
    }

    std::vector<std::size_t> line_numbers;
    const auto rows = parse_sales_rows(sales_path, io::read_text(sales_path), format, line_numbers);
    std::set<AssetKey> known;
    for (const auto& a : data.assets) known.insert(a.key());
    std::set<AssetKey> placeholders;

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const std::size_t lineno = line_numbers[i];
        ++report.sale_rows;
        if (row.collection.empty() || row.token_id.empty()) malformed(sales_path, lineno, "empty collection or token_id");
        Timestamp ts;
        try {
            ts = parse_timestamp(row.timestamp);
        } catch (const ValidationError& e) {
            throw ValidationError(sales_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!row.price) {
            ++report.rejected_missing_price;
            continue;
        }
        const double price = parse_price(*row.price, sales_path, lineno);
        if (!(price > 0.0)) {
            ++report.rejected_nonpositive_price;
            continue;
        }
        if (window && !window->contains(ts)) {
            ++report.rejected_out_of_window;
            continue;
        }
        SaleRecord sale{row.collection, row.token_id, ts, price};
        if (!known.count(sale.key())) placeholders.insert(sale.key());
        data.sales.push_back(std::move(sale));
    }
    report.sales_accepted = data.sales.size();
    std::stable_sort(data.sales.begin(), data.sales.end(),
                     [](const SaleRecord& a, const SaleRecord& b) { return a.timestamp < b.timestamp; });

    for (const auto& key : placeholders) {
        Asset a{key.collection, key.token_id, {}, true};
        data.assets.push_back(std::move(a));
        report.placeholder_keys.push_back(key.collection + "/" + key.token_id);
    }
    report.placeholder_assets = placeholders.size();
    std::sort(data.assets.begin(), data.assets.end(),
              [](const Asset& a, const Asset& b) { return a.key() < b.key(); });

    std::set<std::string> ids;
    for (const auto& a : data.assets) ids.insert(a.collection);
    for (const auto& id : ids) {
        const auto it = names.find(id);
        data.collections.push_back({id, it == names.end() ? std::string{} : it->second});
    }
    return data;
}

std::string assets_to_jsonl(std::span<const Asset> assets) {
    std::string out;
    for (const auto& a : assets) {
        json traits = json::array();
        for (const auto& t : a.traits) traits.push_back({{"trait_type", t.name}, {"value", t.value}});
        out += json{{"collection", a.collection}, {"token_id", a.token_id}, {"traits", traits}}.dump();
        out += '\n';
    }
    return out;
}

std::string sales_to_jsonl(std::span<const SaleRecord> sales) {
    std::string out;
    for (const auto& s : sales) {
        out += json{{"collection", s.collection},
                    {"token_id", s.token_id},
                    {"timestamp", format_timestamp(s.timestamp)},
                    {"price_usd", io::format_double(s.price_usd)}}
                   .dump();
        out += '\n';
    }
    return out;
}

std::string assets_to_csv(std::span<const Asset> assets) {
    std::string out = "collection,token_id,traits\n";
    for (const auto& a : assets) {
        std::string traits;
        for (const auto& t : a.traits) {
            if (!traits.empty()) traits += ';';
            traits += t.name + "=" + t.value;
        }
        out += io::csv_field(a.collection) + "," + io::csv_field(a.token_id) + "," + io::csv_field(traits) + "\n";
    }
    return out;
}

std::string sales_to_csv(std::span<const SaleRecord> sales) {
    std::string out = "collection,token_id,timestamp,price_usd\n";
    for (const auto& s : sales) {
        out += io::csv_field(s.collection) + "," + io::csv_field(s.token_id) + "," + format_timestamp(s.timestamp) +
               "," + io::format_double(s.price_usd) + "\n";
    }
    return out;
}

namespace {

void check_single_collection(std::span<const Asset> assets) {
    if (assets.empty()) throw ValidationError("trait frequency over an empty collection");
    for (const auto& a : assets) {
        if (a.collection != assets.front().collection) {
            throw ValidationError("trait frequency inputs span several collections");
        }
    }
}

}  // namespace

double trait_frequency(std::span<const Asset> collection_assets, const Trait& trait) {
    check_single_collection(collection_assets);
    std::size_t hits = 0;
    for (const auto& a : collection_assets) {
        hits += static_cast<std::size_t>(std::count(a.traits.begin(), a.traits.end(), trait));
    }
    return static_cast<double>(hits) / static_cast<double>(collection_assets.size());
}

FrequencyTable::FrequencyTable(std::span<const Asset> collection_assets) {
    check_single_collection(collection_assets);
    collection_ = collection_assets.front().collection;
    n_assets_ = collection_assets.size();
    for (const auto& a : collection_assets) {
        for (const auto& t : a.traits) ++counts_[t];
    }
}

std::size_t FrequencyTable::count(const Trait& trait) const {
    const auto it = counts_.find(trait);
    return it == counts_.end() ? 0 : it->second;
}

double FrequencyTable::frequency(const Trait& trait) const {
    if (n_assets_ == 0) throw ValidationError("trait frequency over an empty collection");
    return static_cast<double>(count(trait)) / static_cast<double>(n_assets_);
}

TraitFrequencyAggregate FrequencyTable::aggregate(const Asset& asset) const {
    if (asset.traits.empty()) return {};
    if (asset.collection != collection_) {
        throw ValidationError("asset " + asset.collection + "/" + asset.token_id + " is not in collection " + collection_);
    }
    std::size_t lo = std::numeric_limits<std::size_t>::max();
    std::size_t hi = 0;
    std::size_t total = 0;
    for (const auto& t : asset.traits) {
        const std::size_t c = count(t);
        if (c == 0) {
            throw ValidationError("asset " + asset.collection + "/" + asset.token_id + " carries trait " + t.name + "=" +
                                  t.value + " absent from its collection");
        }
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        total += c;
    }
    const auto n = static_cast<double>(n_assets_);
    return {static_cast<double>(lo) / n, static_cast<double>(total) / (n * static_cast<double>(asset.traits.size())),
            static_cast<double>(hi) / n};
}

TraitFrequencyAggregate aggregate_frequencies(const Asset& asset, std::span<const Asset> collection_assets) {
    if (asset.traits.empty()) return {};
    return FrequencyTable(collection_assets).aggregate(asset);
}

std::map<AssetKey, TraitFrequencyAggregate> compute_frequencies(const MarketData& data) {
    std::map<std::string, std::vector<Asset>> by_collection;
    for (const auto& a : data.assets) {
        if (!a.placeholder) by_collection[a.collection].push_back(a);
    }
    std::map<std::string, FrequencyTable> tables;
    for (const auto& [id, assets] : by_collection) tables.emplace(id, FrequencyTable(assets));
    std::map<AssetKey, TraitFrequencyAggregate> out;
    for (const auto& a : data.assets) {
        if (a.placeholder) {
            out.emplace(a.key(), TraitFrequencyAggregate{});
        } else {
            out.emplace(a.key(), tables.at(a.collection).aggregate(a));
        }
    }
    return out;
}

std::vector<PeriodAssignment> assign_periods(std::span<const SaleRecord> sales, const PeriodGrid& grid) {
    if (grid.last_period < 1) throw ValidationError("period grid needs T >= 1");
    std::vector<PeriodAssignment> out;
    out.reserve(sales.size());
    std::vector<std::string> offenders;
    for (std::size_t i = 0; i < sales.size(); ++i) {
        const std::int64_t p = grid.period_of(sales[i].timestamp);
        if (p < 0 || p > grid.last_period) {
            offenders.push_back("#" + std::to_string(i) + " " + sales[i].collection + "/" + sales[i].token_id + " at " +
                                format_timestamp(sales[i].timestamp));
            continue;
        }
        out.push_back({i, p});
    }
    if (!offenders.empty()) {
        std::string msg = std::to_string(offenders.size()) + " sale(s) outside the study window [" +
                          format_date(grid.epoch) + ", " + format_date(grid.date_of(grid.last_period)) + "]:";
        for (std::size_t i = 0; i < std::min<std::size_t>(offenders.size(), 20); ++i) msg += " " + offenders[i];
        if (offenders.size() > 20) msg += " ...";
        throw ValidationError(msg);
    }
    return out;
}

}  // namespace nftidx

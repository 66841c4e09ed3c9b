#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nftindex/bubble.hpp"
#include "nftindex/errors.hpp"
#include "nftindex/hedonic.hpp"
#include "nftindex/io.hpp"
#include "nftindex/market_data.hpp"
#include "nftindex/mispricing.hpp"
#include "nftindex/price_index.hpp"
#include "nftindex/synthetic.hpp"

namespace nftidx::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultMcSeed = 20220117;

struct Common {
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;

    fs::path out(const std::string& name) const { return fs::path(out_dir) / name; }
    json to_json() const {
        return {{"out_dir", out_dir}, {"seed", seed ? json(*seed) : json(nullptr)}, {"threads", threads}};
    }
};

struct InputOpts {
    std::string assets;
    std::string sales;
    std::string format = "auto";
    std::string epoch;  // empty: no study window
    std::int64_t last_period = 0;

    FileFormat resolved_format() const {
        return format == "auto" ? format_from_extension(sales) : parse_file_format(format);
    }
    std::optional<PeriodGrid> window() const {
        if (epoch.empty()) return std::nullopt;
        if (last_period < 1) throw ValidationError("--last-period must be >= 1 when --epoch is given");
        return PeriodGrid{parse_date(epoch), last_period};
    }
    json to_json() const {
        return {{"assets", assets},
                {"sales", sales},
                {"format", format},
                {"epoch", epoch.empty() ? json(nullptr) : json(epoch)},
                {"last_period", epoch.empty() ? json(nullptr) : json(last_period)}};
    }
};

void add_inputs(CLI::App* cmd, InputOpts& in) {
    cmd->add_option("--assets", in.assets, "Asset file (JSONL or CSV)")->required();
    cmd->add_option("--sales", in.sales, "Sales file (JSONL or CSV)")->required();
    cmd->add_option("--format", in.format, "jsonl, csv or auto (from the sales file extension)")
        ->capture_default_str();
    cmd->add_option("--epoch", in.epoch, "Study window start date YYYY-MM-DD (period 0)");
    cmd->add_option("--last-period", in.last_period, "Study window last period T");
}

void ensure_out_dir(const Common& c) {
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec || !fs::is_directory(c.out_dir)) throw IoError("cannot create output directory '" + c.out_dir + "'");
}

json envelope(const std::string& command, const Common& common, json config) {
    config["common"] = common.to_json();
    return {{"command", command}, {"config", std::move(config)}};
}

// ---------------------------------------------------------------------------
// ingest

int cmd_ingest(const Common& common, const InputOpts& in) {
    const MarketData data = ingest(in.assets, in.sales, in.resolved_format(), in.window());
    ensure_out_dir(common);
    json out = envelope("ingest", common, {{"inputs", in.to_json()}});
    out["report"] = data.report.to_json();
    out["collections"] = data.collections.size();
    io::write_json_atomic(common.out("ingest_report.json"), out);
    std::cerr << "ingest: " << data.report.sales_accepted << " sales accepted, " << data.report.rejected_total()
              << " rejected\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
    InputOpts in;
    FitConfig fit;
    std::vector<std::string> collections;
    std::string model_name = "model.json";
};

int cmd_fit(const Common& common, FitOpts opts) {
    opts.fit.threads = common.threads;
    opts.fit.validate();
    const MarketData data = ingest(opts.in.assets, opts.in.sales, opts.in.resolved_format(), opts.in.window());

    std::vector<SaleRecord> sales = data.sales;
    if (!opts.collections.empty()) {
        std::set<std::string> known;
        for (const auto& c : data.collections) known.insert(c.id);
        for (const auto& s : data.sales) known.insert(s.collection);
        std::vector<std::string> unknown;
        for (const auto& c : opts.collections) {
            if (!known.count(c)) unknown.push_back(c);
        }
        if (!unknown.empty()) {
            std::string msg = "unknown collection id(s) in --collections:";
            for (const auto& u : unknown) msg += " " + u;
            throw ValidationError(msg);
        }
        const std::set<std::string> keep(opts.collections.begin(), opts.collections.end());
        std::erase_if(sales, [&](const SaleRecord& s) { return !keep.count(s.collection); });
    }
    const PeriodGrid grid = opts.in.window().value_or(PeriodGrid::covering(sales));
    const auto periods = assign_periods(sales, grid);
    const auto freq = compute_frequencies(data);
    const Design design = build_design(sales, periods, freq, grid, opts.fit);
    const FitResult result = fit(design, opts.fit);

    ensure_out_dir(common);
    json out = envelope("fit", common,
                        {{"inputs", opts.in.to_json()},
                         {"collections", opts.collections},
                         {"fit", opts.fit.to_json()}});
    const json model = model_to_json(result, opts.fit);
    out["params"] = model.at("params");
    out["diagnostics"] = model.at("diagnostics");
    out["ingest"] = data.report.to_json();
    io::write_json_atomic(common.out(opts.model_name), out);
    std::cerr << "fit: " << design.rows.size() << " rows, " << result.diagnostics.iterations << " iterations, "
              << (result.diagnostics.converged ? "converged" : "NOT converged") << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// index

HedonicParams load_model(const std::string& path) {
    if (!fs::exists(path)) throw ValidationError("model file not found: " + path);
    return HedonicParams::from_json(io::read_json(path));
}

int cmd_index(const Common& common, const std::string& model_path, double base_value) {
    if (!(base_value > 0.0)) throw ValidationError("--base-value must be > 0");
    const HedonicParams params = load_model(model_path);
    const IndexSeries index = build_index(params, base_value);
    ensure_out_dir(common);
    io::write_text_atomic(common.out("index.csv"), index_to_csv(index));
    std::size_t gaps = std::count(index.gaps.begin(), index.gaps.end(), true);
    json out = envelope("index", common, {{"model", model_path}, {"base_value", base_value}});
    out["output"] = "index.csv";
    out["first_date"] = format_date(index.date_at(0));
    out["last_date"] = format_date(index.date_at(index.levels.size() - 1));
    out["periods"] = index.levels.size();
    out["gap_periods"] = gaps;
    io::write_json_atomic(common.out("index_run.json"), out);
    return kOk;
}

// ---------------------------------------------------------------------------
// bubbles

struct SeriesInput {
    std::vector<Date> dates;
    std::vector<double> values;
};

SeriesInput series_from_model(const std::string& model_path, double base_value) {
    const IndexSeries index = build_index(load_model(model_path), base_value);
    SeriesInput s;
    for (std::size_t i = 0; i < index.levels.size(); ++i) s.dates.push_back(index.date_at(i));
    s.values = index.levels;
    return s;
}

SeriesInput series_from_csv(const std::string& path, const std::string& column) {
    if (!fs::exists(path)) throw ValidationError("series file not found: " + path);
    const DatedSeries d = read_dated_csv(path, "series", column);
    return {d.dates, d.values};
}

struct BubbleOpts {
    std::string model;
    std::string series;
    std::string column;
    double base_value = 100.0;
    BsadfConfig bsadf;
    std::string cache;
    bool no_cache = false;
};

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

int cmd_bubbles(const Common& common, BubbleOpts opts) {
    if (opts.model.empty() == opts.series.empty()) throw ValidationError("give exactly one of --model or --series");
    opts.bsadf.seed = common.seed.value_or(kDefaultMcSeed);
    opts.bsadf.validate();
    const SeriesInput s =
        opts.model.empty() ? series_from_csv(opts.series, opts.column) : series_from_model(opts.model, opts.base_value);

    ensure_out_dir(common);
    const std::string cache = opts.no_cache ? std::string{} : (opts.cache.empty() ? common.out("cv_cache.json").string() : opts.cache);
    const BubbleReport r = analyze_bubbles(s.values, opts.bsadf, cache, common.threads);

    json cfg = {{"model", opts.model.empty() ? json(nullptr) : json(opts.model)},
                {"series", opts.series.empty() ? json(nullptr) : json(opts.series)},
                {"column", opts.column},
                {"base_value", opts.base_value},
                {"bsadf", to_json(opts.bsadf)},
                {"cache", opts.no_cache ? json(nullptr) : json(cache)}};
    json out = envelope("bubbles", common, std::move(cfg));
    out["degenerate"] = r.degenerate;
    json periods = json::array();
    for (std::size_t i = 0; i < r.signal.size(); ++i) {
        periods.push_back({{"date", format_date(s.dates[r.first_period + i])},
                           {"bsadf", optional_number(r.signal[i])},
                           {"cv_95", r.cv95[i]},
                           {"cv_99", r.cv99[i]}});
    }
    out["periods"] = std::move(periods);
    json episodes = json::array();
    for (const auto& e : r.episodes) {
        episodes.push_back({{"start", format_date(s.dates[e.start])},
                            {"end", e.end ? json(format_date(s.dates[*e.end])) : json(nullptr)},
                            {"open_ended", !e.end.has_value()}});
    }
    out["episodes"] = std::move(episodes);
    io::write_json_atomic(common.out("bubbles.json"), out);
    std::cerr << "bubbles: " << r.episodes.size() << " episode(s); critical values "
              << (cache.empty() ? "simulated" : (r.cache_hit ? "loaded from cache" : "simulated and cached")) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// misprice

struct MispriceOpts {
    std::string model;
    std::string listings;
    std::string assets;
    std::string asset_format = "auto";
    std::string date;  // empty: the period after the last fitted one
    std::string gamma_source = "moving_average";
    std::size_t ma_window = 7;
    std::string intraday_sales;
};

using FreqLookup = std::map<AssetKey, TraitFrequencyAggregate>;

FreqLookup frequencies_from_assets(const std::string& path, const std::string& format) {
    if (!fs::exists(path)) throw ValidationError("asset file not found: " + path);
    IngestReport report;
    const auto assets =
        read_assets(path, format == "auto" ? format_from_extension(path) : parse_file_format(format), report);
    std::map<std::string, std::vector<Asset>> by_collection;
    for (const auto& a : assets) by_collection[a.collection].push_back(a);
    FreqLookup out;
    for (const auto& [id, members] : by_collection) {
        const FrequencyTable table(members);
        for (const auto& a : members) out[a.key()] = table.aggregate(a);
    }
    return out;
}

struct CsvTable {
    std::map<std::string, std::size_t> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

CsvTable read_csv_table(const std::string& path, std::initializer_list<const char*> required) {
    if (!fs::exists(path)) throw ValidationError("file not found: " + path);
    const auto lines = io::split_lines(io::read_text(path));
    if (lines.empty()) throw ValidationError(path + ": empty CSV file (header required)");
    CsvTable t;
    const auto header = io::split_csv_line(lines[0]);
    for (std::size_t i = 0; i < header.size(); ++i) t.columns[header[i]] = i;
    for (const char* name : required) {
        if (!t.columns.count(name)) throw ValidationError(path + ":1: CSV header lacks column '" + name + "'");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = io::split_csv_line(lines[i]);
        if (fields.size() != header.size()) {
            throw ValidationError(path + ":" + std::to_string(i + 1) + ": expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(i + 1);
    }
    return t;
}

double parse_price(const std::string& text, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw ValidationError(where + ": price '" + text + "' is not a number");
    }
    return v;
}

int cmd_misprice(const Common& common, const MispriceOpts& opts) {
    if (opts.gamma_source != "moving_average" && opts.gamma_source != "intraday") {
        throw ValidationError("--gamma-source must be moving_average or intraday");
    }
    const HedonicParams params = load_model(opts.model);
    if (params.gamma.empty()) throw ValidationError("model has no fitted periods");
    const std::int64_t period = opts.date.empty()
                                    ? params.gamma.rbegin()->first + 1
                                    : (parse_date(opts.date) - params.grid.epoch).count();

    const CsvTable table = read_csv_table(opts.listings, {"collection", "token_id", "price_usd"});
    const bool has_freq = table.columns.count("f_min") && table.columns.count("f_avg") && table.columns.count("f_max");
    if (!has_freq && opts.assets.empty()) {
        throw ValidationError("listings lack f_min/f_avg/f_max columns, so --assets is required");
    }
    const FreqLookup freq = opts.assets.empty() ? FreqLookup{} : frequencies_from_assets(opts.assets, opts.asset_format);

    std::vector<Listing> listings;
    std::vector<std::string> placeholders;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = opts.listings + ":" + std::to_string(table.line_numbers[r]);
        Listing l;
        l.collection = row[table.columns.at("collection")];
        l.token_id = row[table.columns.at("token_id")];
        l.price_usd = parse_price(row[table.columns.at("price_usd")], where);
        if (has_freq) {
            l.freq = {parse_price(row[table.columns.at("f_min")], where), parse_price(row[table.columns.at("f_avg")], where),
                      parse_price(row[table.columns.at("f_max")], where)};
        } else if (const auto it = freq.find({l.collection, l.token_id}); it != freq.end()) {
            l.freq = it->second;
        } else {
            placeholders.push_back(l.collection + "/" + l.token_id);
        }
        listings.push_back(std::move(l));
    }

    std::optional<GammaEstimate> gamma;
    if (!params.gamma.count(period)) {
        if (opts.gamma_source == "intraday") {
            if (opts.intraday_sales.empty()) throw ValidationError("--gamma-source intraday needs --intraday-sales");
            const CsvTable st = read_csv_table(opts.intraday_sales, {"collection", "token_id", "price_usd"});
            std::vector<IntradaySale> sales;
            for (std::size_t r = 0; r < st.rows.size(); ++r) {
                const auto& row = st.rows[r];
                IntradaySale s;
                s.collection = row[st.columns.at("collection")];
                s.price_usd = parse_price(row[st.columns.at("price_usd")],
                                          opts.intraday_sales + ":" + std::to_string(st.line_numbers[r]));
                if (const auto it = freq.find({s.collection, row[st.columns.at("token_id")]}); it != freq.end()) {
                    s.freq = it->second;
                }
                sales.push_back(std::move(s));
            }
            gamma = estimate_gamma_intraday(params, sales);
        } else {
            gamma = estimate_gamma_moving_average(params, opts.ma_window, period);
        }
    }
    const ListingRanking ranking = rank_listings(params, listings, period, gamma);

    ensure_out_dir(common);
    std::ostringstream csv;
    csv << "collection,token_id,price_usd,fair_price,p_under,p_over,gamma_source\n";
    for (const auto& a : ranking.ranked) {
        csv << io::csv_field(a.collection) << ',' << io::csv_field(a.token_id) << ',' << io::format_double(a.listed_price)
            << ',' << io::format_double(std::exp(a.fair_log_price)) << ',' << io::format_double(a.p_under) << ','
            << io::format_double(a.p_over) << ',' << to_string(a.gamma_source) << '\n';
    }
    io::write_text_atomic(common.out("misprice.csv"), csv.str());

    json out = envelope("misprice", common,
                        {{"model", opts.model},
                         {"listings", opts.listings},
                         {"assets", opts.assets.empty() ? json(nullptr) : json(opts.assets)},
                         {"date", format_date(params.grid.date_of(period))},
                         {"period", period},
                         {"gamma_source", opts.gamma_source},
                         {"ma_window", opts.ma_window},
                         {"intraday_sales", opts.intraday_sales.empty() ? json(nullptr) : json(opts.intraday_sales)}});
    out["output"] = "misprice.csv";
    if (params.gamma.count(period)) {
        out["gamma"] = {{"value", params.gamma.at(period)}, {"source", "fitted"}};
    } else {
        out["gamma"] = {{"value", gamma->gamma}, {"source", to_string(gamma->source)}};
    }
    out["sigma"] = params.sigma;
    out["assessed"] = ranking.ranked.size();
    json skipped = json::array();
    for (const auto& s : ranking.skipped) {
        skipped.push_back({{"collection", s.listing.collection}, {"token_id", s.listing.token_id}, {"reason", s.reason}});
    }
    out["skipped"] = std::move(skipped);
    out["traitless_listings"] = placeholders;
    io::write_json_atomic(common.out("misprice_run.json"), out);
    return kOk;
}

// ---------------------------------------------------------------------------
// corr

std::pair<std::string, std::string> split_named(const std::string& spec, const char* flag) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
        throw ValidationError(std::string(flag) + " expects NAME=PATH, got '" + spec + "'");
    }
    return {spec.substr(0, eq), spec.substr(eq + 1)};
}

struct CorrOpts {
    std::vector<std::string> series;
    std::vector<std::string> models;
    std::string column;
    std::string from;
    std::string to;
};

int cmd_corr(const Common& common, const CorrOpts& opts) {
    std::vector<DatedSeries> prices;
    std::set<std::string> names;
    for (const auto& spec : opts.models) {
        auto [name, path] = split_named(spec, "--index");
        prices.push_back(index_levels(build_index(load_model(path)), name));
    }
    for (const auto& spec : opts.series) {
        auto [name, path] = split_named(spec, "--series");
        if (!fs::exists(path)) throw ValidationError("series file not found: " + path);
        prices.push_back(read_dated_csv(path, name, opts.column));
    }
    for (const auto& p : prices) {
        if (!names.insert(p.name).second) throw ValidationError("duplicate series name '" + p.name + "'");
    }
    if (prices.size() < 2) throw ValidationError("corr needs at least two series");

    std::vector<DatedSeries> rets;
    for (const auto& p : prices) rets.push_back(to_returns(p));
    const CorrelationMatrix cm = correlation_matrix(rets);

    json realized = json::array();
    for (const auto& p : prices) {
        if (p.dates.empty()) continue;
        const Date from = opts.from.empty() ? p.dates.front() : parse_date(opts.from);
        const Date to = opts.to.empty() ? p.dates.back() : parse_date(opts.to);
        json entry = {{"name", p.name}, {"from", format_date(from)}, {"to", format_date(to)}};
        try {
            entry["value"] = realized_return(p, from, to);
        } catch (const ValidationError& e) {
            entry["value"] = nullptr;
            entry["reason"] = e.what();
        }
        realized.push_back(std::move(entry));
    }
    json listing = json::array();
    for (const auto& p : prices) {
        listing.push_back({{"name", p.name},
                           {"observations", p.values.size()},
                           {"first_date", p.dates.empty() ? json(nullptr) : json(format_date(p.dates.front()))},
                           {"last_date", p.dates.empty() ? json(nullptr) : json(format_date(p.dates.back()))}});
    }

    ensure_out_dir(common);
    json out = envelope("corr", common,
                        {{"series", opts.series},
                         {"index", opts.models},
                         {"column", opts.column},
                         {"from", opts.from.empty() ? json(nullptr) : json(opts.from)},
                         {"to", opts.to.empty() ? json(nullptr) : json(opts.to)}});
    out["inputs"] = std::move(listing);
    out["correlation_of_daily_returns"] = cm.to_json();
    out["realized_returns"] = std::move(realized);
    io::write_json_atomic(common.out("corr.json"), out);
    return kOk;
}

// ---------------------------------------------------------------------------
// critvals

struct CritOpts {
    std::size_t horizon = 230;
    std::size_t min_window = 40;
    int n_paths = 5000;
    NullParams null;
    AdfConfig adf;
    std::vector<double> confidences{0.90, 0.95, 0.99};
};

int cmd_critvals(const Common& common, CritOpts opts) {
    std::sort(opts.confidences.begin(), opts.confidences.end());
    const std::uint64_t seed = common.seed.value_or(kDefaultMcSeed);
    const auto t0 = std::chrono::steady_clock::now();
    const CriticalValueTable table = critical_values(opts.horizon, opts.min_window, opts.confidences, opts.n_paths,
                                                     seed, opts.null, opts.adf, common.threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ensure_out_dir(common);
    json out = envelope("critvals", common,
                        {{"T", opts.horizon},
                         {"w", opts.min_window},
                         {"n_mc", opts.n_paths},
                         {"seed", seed},
                         {"null_params", to_json(opts.null)},
                         {"adf", to_json(opts.adf)},
                         {"confidences", opts.confidences}});
    json last = json::object();
    for (double c : opts.confidences) last[io::format_double(c)] = table.at(opts.horizon, c);
    out["at_T"] = std::move(last);
    out["table"] = table.to_json();
    io::write_json_atomic(common.out("critvals.json"), out);
    std::cerr << "critvals: " << opts.n_paths << " paths in " << secs << " s\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimOpts {
    std::string spec;
    std::string format = "jsonl";
    std::optional<std::size_t> n_collections, assets_per_collection, n_periods;
    std::optional<double> sigma_noise, sales_rate, gamma_vol, segment_rate;
    std::optional<std::string> gamma_kind, epoch;
    std::optional<std::size_t> segment_start, segment_length, collapse_length;
    bool full_panel = false;
};

int cmd_simulate(const Common& common, const SimOpts& opts) {
    json j = json::object();
    if (!opts.spec.empty()) {
        if (!fs::exists(opts.spec)) throw ValidationError("generator spec not found: " + opts.spec);
        j = io::read_json(opts.spec);
        if (j.contains("spec")) j = j.at("spec");
    }
    if (opts.n_collections) j["n_collections"] = *opts.n_collections;
    if (opts.assets_per_collection) j["assets_per_collection"] = *opts.assets_per_collection;
    if (opts.n_periods) j["n_periods"] = *opts.n_periods;
    if (opts.sigma_noise) j["sigma_noise"] = *opts.sigma_noise;
    if (opts.sales_rate) j["sales_per_collection_period"] = *opts.sales_rate;
    if (opts.full_panel) j["full_panel"] = true;
    if (opts.epoch) j["epoch"] = *opts.epoch;
    if (opts.gamma_kind) j["gamma"]["kind"] = *opts.gamma_kind;
    if (opts.gamma_vol) j["gamma"]["vol"] = *opts.gamma_vol;
    if (opts.segment_start) j["gamma"]["segment_start"] = *opts.segment_start;
    if (opts.segment_length) j["gamma"]["segment_length"] = *opts.segment_length;
    if (opts.segment_rate) j["gamma"]["segment_rate"] = *opts.segment_rate;
    if (opts.collapse_length) j["gamma"]["collapse_length"] = *opts.collapse_length;
    if (common.seed) j["seed"] = *common.seed;
    const GeneratorSpec spec = GeneratorSpec::from_json(j);
    const FileFormat format = parse_file_format(opts.format);

    const SyntheticMarket market = generate(spec);
    ensure_out_dir(common);
    write_market(market, spec, common.out_dir, format);
    json out = envelope("simulate", common, {{"spec_file", opts.spec}, {"format", opts.format}});
    out["spec"] = spec.to_json();
    out["assets"] = market.assets.size();
    out["sales"] = market.sales.size();
    io::write_json_atomic(common.out("simulate_run.json"), out);
    std::cerr << "simulate: " << market.assets.size() << " assets, " << market.sales.size() << " sales\n";
    return kOk;
}

void add_bsadf_options(CLI::App* cmd, BsadfConfig& b) {
    cmd->add_option("--min-window", b.min_window, "Minimum ADF window w")->capture_default_str();
    cmd->add_option("--min-duration", b.min_duration, "Minimum bubble duration delta")->capture_default_str();
    cmd->add_option("--confidence", b.confidence, "Confidence c used for dating")->capture_default_str();
    cmd->add_option("--n-paths", b.n_paths, "Monte-Carlo paths N_MC")->capture_default_str();
    cmd->add_option("--eta", b.null.eta, "Null drift exponent eta")->capture_default_str();
    cmd->add_option("--sigma", b.null.sigma, "Null innovation sd")->capture_default_str();
    cmd->add_option("--drift", b.null.drift, "Null drift scale d")->capture_default_str();
    cmd->add_option("--lag-order", b.adf.lag_order, "ADF lag order k")->capture_default_str();
    cmd->add_flag("--log", b.use_log, "Test log levels");
    cmd->add_flag("--ma", b.use_ma, "Test the 7-period moving average");
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Hedonic NFT price index, bubble detection and mispricing toolkit", "nftindex"};
    app.set_config("--config", "", "Read options from a TOML/INI file ([command] sections)");
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    app.add_option("--out-dir", common.out_dir, "Directory for outputs")->capture_default_str();
    app.add_option("--seed", common.seed, "Seed for Monte-Carlo and generator randomness");
    app.add_option("--threads", common.threads, "Worker threads (never changes results)")
        ->capture_default_str()
        ->check(CLI::Range(1u, 1024u));

    InputOpts ingest_in;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse asset and sales files and write an ingestion report");
    add_inputs(ingest_cmd, ingest_in);

    FitOpts fit_opts;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the hedonic time-dummy model with Huber IRLS");
    add_inputs(fit_cmd, fit_opts.in);
    fit_cmd->add_option("--collections", fit_opts.collections, "Restrict the fit to these collection ids")
        ->delimiter(',');
    fit_cmd->add_option("--huber-delta", fit_opts.fit.huber_delta, "Huber threshold in robust-scale units")
        ->capture_default_str();
    fit_cmd->add_option("--max-iterations", fit_opts.fit.max_iterations, "IRLS iteration cap")->capture_default_str();
    fit_cmd->add_option("--tolerance", fit_opts.fit.coef_tolerance, "Stop when max |coef step| <= tolerance")
        ->capture_default_str();
    fit_cmd->add_option("--min-sales-collection", fit_opts.fit.min_sales_per_collection,
                        "Drop collections with fewer sales")
        ->capture_default_str();
    fit_cmd->add_option("--min-sales-period", fit_opts.fit.min_sales_per_period, "Drop periods with fewer sales")
        ->capture_default_str();
    fit_cmd->add_option("--model-name", fit_opts.model_name, "Output file name")->capture_default_str();

    std::string index_model;
    double index_base = 100.0;
    auto* index_cmd = app.add_subcommand("index", "Build the index CSV from a fitted model");
    index_cmd->add_option("--model", index_model, "Model JSON written by fit")->required();
    index_cmd->add_option("--base-value", index_base, "Index level A of the first fitted period")
        ->capture_default_str();

    BubbleOpts bub;
    auto* bub_cmd = app.add_subcommand("bubbles", "BSADF bubble detection on an index or price series");
    bub_cmd->add_option("--model", bub.model, "Model JSON (index built from it)");
    bub_cmd->add_option("--series", bub.series, "CSV with date and close/level columns");
    bub_cmd->add_option("--column", bub.column, "Value column of --series");
    bub_cmd->add_option("--base-value", bub.base_value, "Index level A when --model is used")->capture_default_str();
    bub_cmd->add_option("--cache", bub.cache, "Critical-value cache file (default <out-dir>/cv_cache.json)");
    bub_cmd->add_flag("--no-cache", bub.no_cache, "Always simulate critical values");
    add_bsadf_options(bub_cmd, bub.bsadf);

    MispriceOpts mis;
    auto* mis_cmd = app.add_subcommand("misprice", "Undersold/oversold probabilities for listings");
    mis_cmd->add_option("--model", mis.model, "Model JSON written by fit")->required();
    mis_cmd->add_option("--listings", mis.listings, "CSV: collection,token_id,price_usd[,f_min,f_avg,f_max]")
        ->required();
    mis_cmd->add_option("--assets", mis.assets, "Asset file for trait frequencies");
    mis_cmd->add_option("--asset-format", mis.asset_format, "jsonl, csv or auto")->capture_default_str();
    mis_cmd->add_option("--date", mis.date, "Assessment date YYYY-MM-DD (default: day after the last fitted one)");
    mis_cmd->add_option("--gamma-source", mis.gamma_source, "moving_average or intraday (used when the date is unfitted)")
        ->capture_default_str();
    mis_cmd->add_option("--ma-window", mis.ma_window, "Moving-average window")->capture_default_str();
    mis_cmd->add_option("--intraday-sales", mis.intraday_sales, "Same-day sales CSV for the intraday estimate");

    CorrOpts corr;
    auto* corr_cmd = app.add_subcommand("corr", "Correlation of daily returns and realized returns");
    corr_cmd->add_option("--series", corr.series, "NAME=PATH of a date,close CSV (repeatable)");
    corr_cmd->add_option("--index", corr.models, "NAME=PATH of a model JSON (repeatable)");
    corr_cmd->add_option("--column", corr.column, "Value column of --series files");
    corr_cmd->add_option("--from", corr.from, "Realized-return start date");
    corr_cmd->add_option("--to", corr.to, "Realized-return end date");

    CritOpts crit;
    auto* crit_cmd = app.add_subcommand("critvals", "Monte-Carlo critical values of the SADF statistic");
    crit_cmd->add_option("--horizon", crit.horizon, "Last period T")->capture_default_str();
    crit_cmd->add_option("--min-window", crit.min_window, "Minimum window w")->capture_default_str();
    crit_cmd->add_option("--n-paths", crit.n_paths, "Monte-Carlo paths N_MC")->capture_default_str();
    crit_cmd->add_option("--eta", crit.null.eta, "Null drift exponent eta")->capture_default_str();
    crit_cmd->add_option("--sigma", crit.null.sigma, "Null innovation sd")->capture_default_str();
    crit_cmd->add_option("--drift", crit.null.drift, "Null drift scale d")->capture_default_str();
    crit_cmd->add_option("--lag-order", crit.adf.lag_order, "ADF lag order k")->capture_default_str();
    crit_cmd->add_option("--confidences", crit.confidences, "Confidence levels")->delimiter(',')->capture_default_str();

    SimOpts sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic market with known parameters");
    sim_cmd->add_option("--spec", sim.spec, "Generator spec JSON (missing keys take defaults)");
    sim_cmd->add_option("--format", sim.format, "jsonl or csv")->capture_default_str();
    sim_cmd->add_option("--collections", sim.n_collections, "Number of collections");
    sim_cmd->add_option("--assets-per-collection", sim.assets_per_collection, "Assets per collection");
    sim_cmd->add_option("--periods", sim.n_periods, "Number of daily periods");
    sim_cmd->add_option("--sigma-noise", sim.sigma_noise, "Sd of the log-price noise");
    sim_cmd->add_option("--sales-rate", sim.sales_rate, "Poisson mean of sales per collection and period");
    sim_cmd->add_flag("--full-panel", sim.full_panel, "Every asset sells once per period");
    sim_cmd->add_option("--epoch", sim.epoch, "Date of period 0");
    sim_cmd->add_option("--gamma-kind", sim.gamma_kind, "constant, random_walk or explosive_segment");
    sim_cmd->add_option("--gamma-vol", sim.gamma_vol, "Per-period sd of the gamma walk");
    sim_cmd->add_option("--segment-start", sim.segment_start, "Explosive segment start period");
    sim_cmd->add_option("--segment-length", sim.segment_length, "Explosive segment length");
    sim_cmd->add_option("--segment-rate", sim.segment_rate, "Per-period growth inside the segment");
    sim_cmd->add_option("--collapse-length", sim.collapse_length, "Periods over which the segment gain is undone");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*ingest_cmd) return cmd_ingest(common, ingest_in);
        if (*fit_cmd) return cmd_fit(common, fit_opts);
        if (*index_cmd) return cmd_index(common, index_model, index_base);
        if (*bub_cmd) return cmd_bubbles(common, bub);
        if (*mis_cmd) return cmd_misprice(common, mis);
        if (*corr_cmd) return cmd_corr(common, corr);
        if (*crit_cmd) return cmd_critvals(common, crit);
        if (*sim_cmd) return cmd_simulate(common, sim);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    }
    return kUsage;
}

}  // namespace nftidx::cli

#include "nftindex/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nftindex/errors.hpp"
#include "nftindex/io.hpp"
#include "nftindex/rng.hpp"

namespace nftidx {

using nlohmann::json;

namespace {

enum Stream : std::uint64_t { kTraits = 1, kAlpha = 2, kGamma = 3, kSales = 4 };

std::string collection_id(std::size_t c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "coll-%03zu", c);
    return buf;
}

std::size_t draw_categorical(RandomStream& rng, const std::vector<double>& cumulative) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

const char* kind_name(GammaPathSpec::Kind k) {
    switch (k) {
        case GammaPathSpec::Kind::constant:
            return "constant";
        case GammaPathSpec::Kind::random_walk:
            return "random_walk";
        case GammaPathSpec::Kind::explosive_segment:
            return "explosive_segment";
    }
    return "random_walk";
}

GammaPathSpec::Kind parse_kind(const std::string& s) {
    if (s == "constant") return GammaPathSpec::Kind::constant;
    if (s == "random_walk") return GammaPathSpec::Kind::random_walk;
    if (s == "explosive_segment") return GammaPathSpec::Kind::explosive_segment;
    throw ValidationError("unknown gamma path kind '" + s + "'");
}

}  // namespace

void GeneratorSpec::validate() const {
    if (n_collections < 1 || assets_per_collection < 1 || n_periods < 2) {
        throw ValidationError("generator counts must be >= 1 (and n_periods >= 2)");
    }
    if (traits.min_values < 1 || traits.max_values < traits.min_values) {
        throw ValidationError("trait vocabulary range is invalid");
    }
    if (!(traits.inclusion_probability >= 0.0 && traits.inclusion_probability <= 1.0)) {
        throw ValidationError("trait inclusion probability must lie in [0,1]");
    }
    if (!(sigma_noise >= 0.0)) throw ValidationError("sigma_noise must be >= 0");
    if (!(sales_per_collection_period >= 0.0)) throw ValidationError("sales rate must be >= 0");
    if (gamma.kind == GammaPathSpec::Kind::explosive_segment &&
        gamma.segment_start + gamma.segment_length + gamma.collapse_length > n_periods) {
        throw ValidationError("explosive segment extends past the last period");
    }
}

json GeneratorSpec::to_json() const {
    return {{"n_collections", n_collections},
            {"assets_per_collection", assets_per_collection},
            {"n_periods", n_periods},
            {"traits",
             {{"names", traits.names},
              {"min_values", traits.min_values},
              {"max_values", traits.max_values},
              {"zipf_exponent", traits.zipf_exponent},
              {"inclusion_probability", traits.inclusion_probability}}},
            {"log_scale", log_scale},
            {"alpha_sd", alpha_sd},
            {"beta", {{"min", beta_min}, {"avg", beta_avg}, {"max", beta_max}}},
            {"gamma",
             {{"kind", kind_name(gamma.kind)},
              {"drift", gamma.drift},
              {"vol", gamma.vol},
              {"segment_start", gamma.segment_start},
              {"segment_length", gamma.segment_length},
              {"segment_rate", gamma.segment_rate},
              {"collapse_length", gamma.collapse_length}}},
            {"sigma_noise", sigma_noise},
            {"sales_per_collection_period", sales_per_collection_period},
            {"full_panel", full_panel},
            {"seed", seed},
            {"epoch", format_date(epoch)}};
}

GeneratorSpec GeneratorSpec::from_json(const json& j) {
    GeneratorSpec s;
    try {
        s.n_collections = j.value("n_collections", s.n_collections);
        s.assets_per_collection = j.value("assets_per_collection", s.assets_per_collection);
        s.n_periods = j.value("n_periods", s.n_periods);
        if (j.contains("traits")) {
            const auto& t = j.at("traits");
            s.traits.names = t.value("names", s.traits.names);
            s.traits.min_values = t.value("min_values", s.traits.min_values);
            s.traits.max_values = t.value("max_values", s.traits.max_values);
            s.traits.zipf_exponent = t.value("zipf_exponent", s.traits.zipf_exponent);
            s.traits.inclusion_probability = t.value("inclusion_probability", s.traits.inclusion_probability);
        }
        s.log_scale = j.value("log_scale", s.log_scale);
        s.alpha_sd = j.value("alpha_sd", s.alpha_sd);
        if (j.contains("beta")) {
            s.beta_min = j.at("beta").value("min", s.beta_min);
            s.beta_avg = j.at("beta").value("avg", s.beta_avg);
            s.beta_max = j.at("beta").value("max", s.beta_max);
        }
        if (j.contains("gamma")) {
            const auto& g = j.at("gamma");
            s.gamma.kind = parse_kind(g.value("kind", std::string(kind_name(s.gamma.kind))));
            s.gamma.drift = g.value("drift", s.gamma.drift);
            s.gamma.vol = g.value("vol", s.gamma.vol);
            s.gamma.segment_start = g.value("segment_start", s.gamma.segment_start);
            s.gamma.segment_length = g.value("segment_length", s.gamma.segment_length);
            s.gamma.segment_rate = g.value("segment_rate", s.gamma.segment_rate);
            s.gamma.collapse_length = g.value("collapse_length", s.gamma.collapse_length);
        }
        s.sigma_noise = j.value("sigma_noise", s.sigma_noise);
        s.sales_per_collection_period = j.value("sales_per_collection_period", s.sales_per_collection_period);
        s.full_panel = j.value("full_panel", s.full_panel);
        s.seed = j.value("seed", s.seed);
        if (j.contains("epoch")) s.epoch = parse_date(j.at("epoch").get<std::string>());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed generator spec: ") + e.what());
    }
    s.validate();
    return s;
}

SyntheticMarket generate(const GeneratorSpec& spec) {
    spec.validate();
    SyntheticMarket m;

    // Traits: per collection and name, a Zipf-weighted categorical vocabulary.
    RandomStream trait_rng(spec.seed, kTraits);
    for (std::size_t c = 0; c < spec.n_collections; ++c) {
        const std::string cid = collection_id(c);
        std::vector<std::vector<double>> cumulative(spec.traits.names);
        for (auto& cum : cumulative) {
            const std::size_t span = spec.traits.max_values - spec.traits.min_values + 1;
            const std::size_t vocab = spec.traits.min_values + trait_rng.below(span);
            double total = 0.0;
            for (std::size_t v = 0; v < vocab; ++v) {
                total += 1.0 / std::pow(static_cast<double>(v + 1), spec.traits.zipf_exponent);
                cum.push_back(total);
            }
        }
        for (std::size_t a = 0; a < spec.assets_per_collection; ++a) {
            Asset asset{cid, std::to_string(a), {}, false};
            for (std::size_t k = 0; k < spec.traits.names; ++k) {
                if (trait_rng.uniform() >= spec.traits.inclusion_probability) continue;
                const std::size_t v = draw_categorical(trait_rng, cumulative[k]);
                asset.traits.push_back({"trait" + std::to_string(k), "v" + std::to_string(v)});
            }
            std::sort(asset.traits.begin(), asset.traits.end());
            m.assets.push_back(std::move(asset));
        }
    }
    for (std::size_t c = 0; c < spec.n_collections; ++c) {
        const auto first = m.assets.begin() + static_cast<std::ptrdiff_t>(c * spec.assets_per_collection);
        const std::span<const Asset> members(&*first, spec.assets_per_collection);
        const FrequencyTable table(members);
        for (const auto& a : members) m.frequencies.emplace(a.key(), table.aggregate(a));
    }

    // Parameters, already in the fitter's gauge.
    HedonicParams& truth = m.truth;
    truth.grid.epoch = spec.epoch;
    truth.grid.last_period = static_cast<std::int64_t>(spec.n_periods) - 1;
    truth.log_scale = spec.log_scale;
    truth.beta_min = spec.beta_min;
    truth.beta_avg = spec.beta_avg;
    truth.beta_max = spec.beta_max;
    truth.sigma = spec.sigma_noise > 0.0 ? spec.sigma_noise : std::numeric_limits<double>::min();
    RandomStream alpha_rng(spec.seed, kAlpha);
    for (std::size_t c = 0; c < spec.n_collections; ++c) {
        truth.alpha[collection_id(c)] = c == 0 ? 0.0 : alpha_rng.normal(0.0, spec.alpha_sd);
    }
    RandomStream gamma_rng(spec.seed, kGamma);
    double g = 0.0;
    for (std::size_t t = 0; t < spec.n_periods; ++t) {
        truth.gamma[static_cast<std::int64_t>(t)] = g;
        double step = 0.0;
        if (spec.gamma.kind != GammaPathSpec::Kind::constant) {
            step = spec.gamma.drift + spec.gamma.vol * gamma_rng.normal();
        }
        const std::size_t next = t + 1;
        if (spec.gamma.kind == GammaPathSpec::Kind::explosive_segment && next > spec.gamma.segment_start &&
            next <= spec.gamma.segment_start + spec.gamma.segment_length) {
            step += std::log1p(spec.gamma.segment_rate);
        }
        const std::size_t seg_end = spec.gamma.segment_start + spec.gamma.segment_length;
        if (spec.gamma.kind == GammaPathSpec::Kind::explosive_segment && spec.gamma.collapse_length > 0 &&
            next > seg_end && next <= seg_end + spec.gamma.collapse_length) {
            step -= static_cast<double>(spec.gamma.segment_length) * std::log1p(spec.gamma.segment_rate) /
                    static_cast<double>(spec.gamma.collapse_length);
        }
        g += step;
    }
    truth.gauge.reference_collection = collection_id(0);
    truth.gauge.reference_period = 0;

    // Sales.
    RandomStream sales_rng(spec.seed, kSales);
    for (std::size_t t = 0; t < spec.n_periods; ++t) {
        const Timestamp day{Date{spec.epoch + std::chrono::days{static_cast<long>(t)}}};
        for (std::size_t c = 0; c < spec.n_collections; ++c) {
            const std::uint64_t count = spec.full_panel ? spec.assets_per_collection
                                                        : sales_rng.poisson(spec.sales_per_collection_period);
            for (std::uint64_t s = 0; s < count; ++s) {
                const std::size_t a = spec.full_panel ? static_cast<std::size_t>(s)
                                                      : static_cast<std::size_t>(sales_rng.below(spec.assets_per_collection));
                const Asset& asset = m.assets[c * spec.assets_per_collection + a];
                const auto secs = static_cast<long>(sales_rng.below(86400));
                const double chi = spec.sigma_noise > 0.0 ? spec.sigma_noise * sales_rng.normal() : 0.0;
                const double logp = predict_log_price(truth, asset.collection, m.frequencies.at(asset.key()),
                                                      static_cast<std::int64_t>(t)) + chi;
                m.sales.push_back({asset.collection, asset.token_id, day + std::chrono::seconds{secs}, std::exp(logp)});
                m.noise.push_back(chi);
            }
        }
    }
    // Chronological order; noise follows its sale.
    std::vector<std::size_t> order(m.sales.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m.sales[a].timestamp < m.sales[b].timestamp; });
    std::vector<SaleRecord> sales;
    std::vector<double> noise;
    sales.reserve(order.size());
    noise.reserve(order.size());
    for (const auto i : order) {
        sales.push_back(m.sales[i]);
        noise.push_back(m.noise[i]);
    }
    m.sales = std::move(sales);
    m.noise = std::move(noise);

    m.true_index = build_index(truth, 100.0);
    return m;
}

void write_market(const SyntheticMarket& market, const GeneratorSpec& spec, const std::filesystem::path& dir,
                  FileFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
    const bool csv = format == FileFormat::csv;
    io::write_text_atomic(dir / (csv ? "assets.csv" : "assets.jsonl"),
                          csv ? assets_to_csv(market.assets) : assets_to_jsonl(market.assets));
    io::write_text_atomic(dir / (csv ? "sales.csv" : "sales.jsonl"),
                          csv ? sales_to_csv(market.sales) : sales_to_jsonl(market.sales));
    io::write_json_atomic(dir / "ground_truth.json", {{"params", market.truth.to_json()}, {"spec", spec.to_json()}});
    io::write_text_atomic(dir / "true_index.csv", index_to_csv(market.true_index));
}

}  // namespace nftidx

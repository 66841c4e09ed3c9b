#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>

#include "nftindex/errors.hpp"
#include "nftindex/io.hpp"
#include "nftindex/market_data.hpp"
#include "nftindex/rng.hpp"
#include "oracles.hpp"

using namespace nftidx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("nftindex_md_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    fs::path write(const std::string& file, const std::string& text) const {
        io::write_text_atomic(path / file, text);
        return path / file;
    }
};

const char* kAssets =
    R"({"collection":"0xb4","token_id":"1463","traits":[{"trait_type":"type","value":"male"},{"trait_type":"accessory","value":"earring"}]}
{"collection":"0xb4","token_id":"7","traits":[{"trait_type":"type","value":"male"}]}
{"collection":"0xb4","token_id":"8"}
{"collection":"0xb4","token_id":"7","traits":[{"trait_type":"type","value":"male"}]}
)";

Asset asset(const std::string& c, const std::string& t, std::vector<Trait> traits) {
    std::sort(traits.begin(), traits.end());
    return {c, t, traits, false};
}

}  // namespace

TEST_SUITE("market-data") {

TEST_CASE("JSONL ingest maps fields and assigns periods") {
    TempDir d("jsonl");
    const auto a = d.write("assets.jsonl", kAssets);
    const auto s = d.write("sales.jsonl",
                           R"({"collection":"0xb4","token_id":"1463","price_usd":"100000.0","timestamp":"2021-07-01T12:00:00Z"}
{"collection":"0xb4","token_id":"7","price_usd":"0","timestamp":"2021-07-02T00:00:00Z"}
{"collection":"0xb4","token_id":"8","timestamp":"2021-07-02T00:00:00Z"}
{"collection":"0xb4","token_id":"999","price_usd":"5.5","timestamp":"2021-06-30T23:00:00Z"}
)");
    const MarketData m = ingest(a, s, FileFormat::jsonl);
    CHECK(m.report.assets_accepted == 3);
    CHECK(m.report.duplicate_asset_rows == 1);
    CHECK(m.report.sales_accepted == 2);
    CHECK(m.report.rejected_nonpositive_price == 1);
    CHECK(m.report.rejected_missing_price == 1);
    CHECK(m.report.placeholder_assets == 1);
    REQUIRE(m.sales.size() == 2);
    // chronological
    CHECK(m.sales[0].token_id == "999");
    CHECK(m.sales[1].price_usd == 100000.0);
    const PeriodGrid grid{parse_date("2021-06-01"), 60};
    CHECK(grid.period_of(m.sales[1].timestamp) == 30);
    const Asset* ph = m.find({"0xb4", "999"});
    REQUIRE(ph != nullptr);
    CHECK(ph->placeholder);
    CHECK(ph->traits.empty());

    const auto freq = compute_frequencies(m);
    CHECK(freq.at({"0xb4", "999"}).f_min == 1.0);
    // 2 of 3 listed assets are male; the placeholder does not count.
    CHECK(freq.at({"0xb4", "7"}).f_min == 2.0 / 3.0);
    CHECK(freq.at({"0xb4", "1463"}).f_min == 1.0 / 3.0);
    CHECK(freq.at({"0xb4", "1463"}).f_max == 2.0 / 3.0);
    CHECK(freq.at({"0xb4", "8"}).f_avg == 1.0);
}

TEST_CASE("CSV ingest matches JSONL ingest") {
    TempDir d("csv");
    const auto aj = d.write("assets.jsonl", kAssets);
    IngestReport rep;
    const auto assets = read_assets(aj, FileFormat::jsonl, rep);
    const auto ac = d.write("assets.csv", assets_to_csv(assets));
    const auto sc = d.write("sales.csv",
                            "collection,token_id,timestamp,price_usd\n0xb4,7,2021-07-03T01:02:03Z,12.5\n"
                            "0xb4,1463,2021-07-01T00:00:00Z,3\n");
    const auto sj = d.write("sales.jsonl", sales_to_jsonl(ingest(ac, sc, FileFormat::csv).sales));
    const MarketData from_csv = ingest(ac, sc, FileFormat::csv);
    const MarketData from_jsonl = ingest(aj, sj, FileFormat::jsonl);
    REQUIRE(from_csv.assets.size() == from_jsonl.assets.size());
    for (std::size_t i = 0; i < from_csv.assets.size(); ++i) {
        CHECK(from_csv.assets[i].key() == from_jsonl.assets[i].key());
        CHECK(from_csv.assets[i].traits == from_jsonl.assets[i].traits);
    }
    REQUIRE(from_csv.sales.size() == 2);
    CHECK(sales_to_jsonl(from_csv.sales) == sales_to_jsonl(from_jsonl.sales));
}

TEST_CASE("ingest is idempotent") {
    TempDir d("idem");
    const auto a = d.write("assets.jsonl", kAssets);
    const auto s = d.write("sales.jsonl",
                           R"({"collection":"0xb4","token_id":"7","price_usd":"1.5","timestamp":"2021-07-01T00:00:00Z"}
)");
    const MarketData x = ingest(a, s, FileFormat::jsonl), y = ingest(a, s, FileFormat::jsonl);
    CHECK(assets_to_jsonl(x.assets) == assets_to_jsonl(y.assets));
    CHECK(sales_to_jsonl(x.sales) == sales_to_jsonl(y.sales));
    CHECK(x.report.to_json() == y.report.to_json());
}

TEST_CASE("ingest errors") {
    TempDir d("errors");
    const auto a = d.write("assets.jsonl", kAssets);
    SUBCASE("missing file names the path") {
        try {
            ingest(d.path / "nope.jsonl", a, FileFormat::jsonl);
            FAIL("expected an error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("nope.jsonl") != std::string::npos);
        }
    }
    SUBCASE("malformed row names the line") {
        const auto s = d.write("s.jsonl",
                               "{\"collection\":\"0xb4\",\"token_id\":\"7\",\"price_usd\":\"1\",\"timestamp\":\"2021-07-01T00:00:00Z\"}\n"
                               "{not json\n");
        try {
            ingest(a, s, FileFormat::jsonl);
            FAIL("expected an error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("s.jsonl:2") != std::string::npos);
        }
    }
    SUBCASE("unknown timestamp format") {
        const auto s = d.write("s.jsonl",
                               "{\"collection\":\"0xb4\",\"token_id\":\"7\",\"price_usd\":\"1\",\"timestamp\":\"01/07/2021\"}\n");
        CHECK_THROWS_AS(ingest(a, s, FileFormat::jsonl), ValidationError);
    }
    SUBCASE("non-numeric price") {
        const auto s = d.write("s.jsonl",
                               "{\"collection\":\"0xb4\",\"token_id\":\"7\",\"price_usd\":\"abc\",\"timestamp\":\"2021-07-01T00:00:00Z\"}\n");
        CHECK_THROWS_AS(ingest(a, s, FileFormat::jsonl), ValidationError);
    }
    SUBCASE("conflicting duplicate asset") {
        const auto bad = d.write("bad.jsonl",
                                 "{\"collection\":\"c\",\"token_id\":\"1\",\"traits\":[{\"trait_type\":\"a\",\"value\":\"x\"}]}\n"
                                 "{\"collection\":\"c\",\"token_id\":\"1\",\"traits\":[{\"trait_type\":\"a\",\"value\":\"y\"}]}\n");
        IngestReport rep;
        CHECK_THROWS_AS(read_assets(bad, FileFormat::jsonl, rep), ValidationError);
    }
    SUBCASE("CSV with a missing column") {
        const auto s = d.write("s.csv", "collection,token_id,price_usd\nc,1,2\n");
        const auto ac = d.write("a.csv", "collection,token_id,traits\nc,1,\n");
        CHECK_THROWS_AS(ingest(ac, s, FileFormat::csv), ValidationError);
    }
}

TEST_CASE("study window rejects out-of-window sales") {
    TempDir d("window");
    const auto a = d.write("assets.jsonl", kAssets);
    const auto s = d.write("sales.jsonl",
                           R"({"collection":"0xb4","token_id":"7","price_usd":"1","timestamp":"2021-07-01T00:00:00Z"}
{"collection":"0xb4","token_id":"7","price_usd":"1","timestamp":"2021-08-01T00:00:00Z"}
)");
    const MarketData m = ingest(a, s, FileFormat::jsonl, PeriodGrid{parse_date("2021-07-01"), 10});
    CHECK(m.report.sales_accepted == 1);
    CHECK(m.report.rejected_out_of_window == 1);
}

TEST_CASE("trait frequency examples") {
    const std::vector<Asset> toy{asset("c", "1", {{"hat", "cap"}}), asset("c", "2", {{"hat", "cap"}, {"eyes", "blue"}}),
                                 asset("c", "3", {{"eyes", "blue"}})};
    CHECK(trait_frequency(toy, {"hat", "cap"}) == 2.0 / 3.0);
    CHECK(trait_frequency(toy, {"hat", "fez"}) == 0.0);
    CHECK_THROWS_AS(trait_frequency(std::vector<Asset>{}, {"a", "b"}), ValidationError);
    std::vector<Asset> mixed = toy;
    mixed.push_back(asset("other", "9", {}));
    CHECK_THROWS_AS(trait_frequency(mixed, {"hat", "cap"}), ValidationError);

    const auto empty = aggregate_frequencies(asset("c", "4", {}), toy);
    CHECK(empty.f_min == 1.0);
    CHECK(empty.f_avg == 1.0);
    CHECK(empty.f_max == 1.0);
}

TEST_CASE("single trait of frequency 0.1 aggregates to (0.1, 0.1, 0.1)") {
    std::vector<Asset> c;
    for (int i = 0; i < 10; ++i) c.push_back(asset("c", std::to_string(i), {{"t", i == 0 ? "rare" : "common"}}));
    const auto f = aggregate_frequencies(c[0], c);
    CHECK(f.f_min == 0.1);
    CHECK(f.f_avg == 0.1);
    CHECK(f.f_max == 0.1);
}

TEST_CASE("frequency properties on random collections") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RandomStream r(11, seed);
        std::vector<Asset> c;
        const std::size_t n = 1 + r.below(300);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<Trait> t;
            // at most one value per name
            for (int k = 0; k < 5; ++k) {
                if (r.uniform() < 0.7) t.push_back({"p" + std::to_string(k), "v" + std::to_string(r.below(4))});
            }
            c.push_back(asset("c", std::to_string(i), t));
        }
        const FrequencyTable table(c);
        for (const auto& a : c) {
            const auto f = table.aggregate(a);
            CHECK(f.f_min > 0.0);
            CHECK(f.f_min <= f.f_avg);
            CHECK(f.f_avg <= f.f_max);
            CHECK(f.f_max <= 1.0);
            if (a.traits.size() == 1) {
                CHECK(f.f_min == f.f_avg);
                CHECK(f.f_avg == f.f_max);
            }
            const auto o = oracle::aggregate(a, c);
            CHECK(f.f_min == o.f_min);
            CHECK(f.f_avg == o.f_avg);
            CHECK(f.f_max == o.f_max);
        }
        for (int k = 0; k < 5; ++k) {
            double total = 0.0;
            for (int v = 0; v < 4; ++v) total += table.frequency({"p" + std::to_string(k), "v" + std::to_string(v)});
            CHECK(total <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("frequency table rejects foreign assets") {
    const std::vector<Asset> c{asset("c", "1", {{"a", "x"}})};
    const FrequencyTable t(c);
    CHECK_THROWS_AS(t.aggregate(asset("d", "1", {{"a", "x"}})), ValidationError);
    CHECK_THROWS_AS(t.aggregate(asset("c", "2", {{"a", "never"}})), ValidationError);
}

TEST_CASE("assign_periods uses UTC day boundaries") {
    using namespace std::chrono;
    const PeriodGrid g{parse_date("2021-06-01"), 3};
    const Timestamp e{sys_days{g.epoch}};
    std::vector<SaleRecord> s{{"c", "1", e, 1.0},
                              {"c", "1", e + hours{23} + minutes{59}, 1.0},
                              {"c", "1", e + hours{24}, 1.0}};
    const auto p = assign_periods(s, g);
    REQUIRE(p.size() == 3);
    CHECK(p[0].period == 0);
    CHECK(p[1].period == 0);
    CHECK(p[2].period == 1);
    s.push_back({"c", "2", e + days{4}, 1.0});
    s.push_back({"c", "3", e - seconds{1}, 1.0});
    try {
        assign_periods(s, g);
        FAIL("expected an error");
    } catch (const ValidationError& err) {
        const std::string msg = err.what();
        CHECK(msg.find("c/2") != std::string::npos);
        CHECK(msg.find("c/3") != std::string::npos);
    }
}

TEST_CASE("covering grid") {
    using namespace std::chrono;
    const Timestamp t0 = parse_timestamp("2021-06-01T10:00:00Z");
    std::vector<SaleRecord> s{{"c", "1", t0, 1}, {"c", "1", t0 + days{5}, 1}};
    const auto g = PeriodGrid::covering(s);
    CHECK(format_date(g.epoch) == "2021-06-01");
    CHECK(g.last_period == 5);
    CHECK_THROWS_AS(PeriodGrid::covering(std::vector<SaleRecord>{}), ValidationError);
}

}  // TEST_SUITE

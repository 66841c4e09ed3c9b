#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "nftindex/io.hpp"

using namespace nftidx;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "nftindex");
    return cli::run(args);
}

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("nftindex_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

// A small simulated market in <dir>/market.
void simulate(const Scratch& s, const std::string& assets = "60", const std::string& rate = "12") {
    REQUIRE(run({"simulate", "--out-dir", s / "market", "--seed", "5", "--collections", "3", "--assets-per-collection",
                 assets, "--periods", "25", "--sales-rate", rate}) == cli::kOk);
}

int fit_market(const Scratch& s, const std::string& out, const std::vector<std::string>& extra = {}) {
    std::vector<std::string> a{"fit", "--assets", s / "market/assets.jsonl", "--sales", s / "market/sales.jsonl",
                               "--out-dir", s / out};
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2") {
    CHECK(run({}) == cli::kUsage);
    CHECK(run({"frobnicate"}) == cli::kUsage);
    CHECK(run({"fit", "--sales", "x.jsonl"}) == cli::kUsage);
    CHECK(run({"--help"}) == cli::kOk);
}

TEST_CASE("ingest: valid files, missing file, rejected rows") {
    Scratch s("ingest");
    simulate(s);
    CHECK(run({"ingest", "--assets", s / "market/assets.jsonl", "--sales", s / "market/sales.jsonl", "--out-dir",
               s / "ok"}) == cli::kOk);
    const auto rep = io::read_json(s / "ok/ingest_report.json");
    CHECK(rep["command"] == "ingest");
    CHECK(rep.contains("config"));
    CHECK(run({"ingest", "--assets", s / "nope.jsonl", "--sales", s / "market/sales.jsonl", "--out-dir", s / "x"}) ==
          cli::kUsage);

    std::string sales = io::read_text(s / "market/sales.jsonl");
    sales += "{\"collection\":\"c\",\"token_id\":\"1\",\"timestamp\":\"2021-06-02T00:00:00Z\",\"price_usd\":\"0\"}\n";
    sales += "{\"collection\":\"c\",\"token_id\":\"1\",\"timestamp\":\"2021-06-02T00:00:00Z\",\"price_usd\":\"-4\"}\n";
    sales += "{\"collection\":\"c\",\"token_id\":\"1\",\"timestamp\":\"2021-06-02T00:00:00Z\"}\n";
    io::write_text_atomic(s / "bad.jsonl", sales);
    CHECK(run({"ingest", "--assets", s / "market/assets.jsonl", "--sales", s / "bad.jsonl", "--out-dir", s / "bad"}) ==
          cli::kOk);
    const auto bad = io::read_json(s / "bad/ingest_report.json");
    CHECK(bad["report"]["sales"]["rejected"] == 3);
    CHECK(bad["report"]["sales"]["rejected_by_reason"]["nonpositive_price"] == 2);
}

TEST_CASE("fit is deterministic and validates collections") {
    Scratch s("fit");
    simulate(s, "300", "200");
    REQUIRE(fit_market(s, "a") == cli::kOk);
    REQUIRE(fit_market(s, "b", {"--threads", "2"}) == cli::kOk);
    const std::string first = io::read_text(s / "a/model.json");
    REQUIRE(fit_market(s, "a") == cli::kOk);
    CHECK(io::read_text(s / "a/model.json") == first);
    const auto a = io::read_json(s / "a/model.json");
    const auto b = io::read_json(s / "b/model.json");
    CHECK(a["params"] == b["params"]);
    for (const char* k : {"min", "avg", "max"}) CHECK(a["params"]["beta"][k].get<double>() < 0.0);
    CHECK(fit_market(s, "d", {"--collections", "not-a-collection"}) == cli::kUsage);
    CHECK_FALSE(fs::exists(s / "d/model.json"));
    CHECK(fit_market(s, "e", {"--huber-delta", "-1"}) == cli::kUsage);
}

TEST_CASE("degenerate design exits 3") {
    Scratch s("degenerate");
    io::write_text_atomic(s / "assets.jsonl", "{\"collection\":\"a\",\"token_id\":\"1\"}\n"
                                              "{\"collection\":\"b\",\"token_id\":\"1\"}\n");
    io::write_text_atomic(s / "sales.jsonl",
                          "{\"collection\":\"a\",\"token_id\":\"1\",\"timestamp\":\"2021-06-01T01:00:00Z\",\"price_usd\":\"5\"}\n"
                          "{\"collection\":\"a\",\"token_id\":\"1\",\"timestamp\":\"2021-06-01T02:00:00Z\",\"price_usd\":\"6\"}\n"
                          "{\"collection\":\"b\",\"token_id\":\"1\",\"timestamp\":\"2021-06-02T01:00:00Z\",\"price_usd\":\"7\"}\n"
                          "{\"collection\":\"b\",\"token_id\":\"1\",\"timestamp\":\"2021-06-02T02:00:00Z\",\"price_usd\":\"8\"}\n");
    CHECK(run({"fit", "--assets", s / "assets.jsonl", "--sales", s / "sales.jsonl", "--out-dir", s / "out"}) ==
          cli::kNumerical);
}

TEST_CASE("unwritable output exits 4") {
    Scratch s("io");
    simulate(s);
    io::write_text_atomic(s / "blocker", "x");
    CHECK(fit_market(s, "blocker/sub") == cli::kIo);
}

TEST_CASE("index, misprice and corr on a fitted model") {
    Scratch s("pipeline");
    simulate(s);
    REQUIRE(fit_market(s, "m") == cli::kOk);
    REQUIRE(run({"index", "--model", s / "m/model.json", "--out-dir", s / "i"}) == cli::kOk);
    const auto lines = io::split_lines(io::read_text(s / "i/index.csv"));
    REQUIRE(lines.size() == 26);
    CHECK(lines[1].rfind("2021-06-01,100,100,,0", 0) == 0);
    CHECK(fs::exists(s / "i/index_run.json"));

    io::write_text_atomic(s / "listings.csv", "collection,token_id,price_usd\n"
                                              "coll-000,1,10\ncoll-000,2,1e9\ncoll-001,3,500\nzzz,1,5\n");
    REQUIRE(run({"misprice", "--model", s / "m/model.json", "--listings", s / "listings.csv", "--assets",
                 s / "market/assets.jsonl", "--out-dir", s / "p"}) == cli::kOk);
    const auto rows = io::split_lines(io::read_text(s / "p/misprice.csv"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "collection,token_id,price_usd,fair_price,p_under,p_over,gamma_source");
    CHECK(rows[1].rfind("coll-000,1,", 0) == 0);
    CHECK(rows[3].rfind("coll-000,2,", 0) == 0);
    CHECK(io::read_json(s / "p/misprice_run.json")["skipped"].size() == 1);

    REQUIRE(run({"corr", "--index", "nft=" + (s / "m/model.json"), "--series", "ref=" + (s / "i/index.csv"),
                 "--column", "level", "--out-dir", s / "c"}) == cli::kOk);
    const auto corr = io::read_json(s / "c/corr.json");
    CHECK(corr["correlation_of_daily_returns"]["matrix"][0][1].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("bubbles on an injected explosion") {
    Scratch s("bubbles");
    REQUIRE(run({"simulate", "--out-dir", s / "market", "--seed", "1", "--collections", "1", "--assets-per-collection",
                 "1", "--periods", "231", "--sales-rate", "0", "--gamma-kind", "explosive_segment", "--gamma-vol",
                 "0.01", "--segment-start", "150", "--segment-length", "30", "--segment-rate", "0.03",
                 "--collapse-length", "5"}) == cli::kOk);
    CHECK(run({"bubbles", "--series", s / "market/true_index.csv", "--column", "level", "--n-paths", "500",
               "--out-dir", s / "b"}) == cli::kOk);
    const auto rep = io::read_json(s / "b/bubbles.json");
    REQUIRE(rep["episodes"].size() == 1);
    CHECK(rep["periods"].size() == 191);
    CHECK(fs::exists(s / "b/cv_cache.json"));
    CHECK(run({"bubbles", "--series", s / "market/true_index.csv", "--model", "x.json", "--out-dir", s / "b"}) ==
          cli::kUsage);
}

TEST_CASE("config file supplies options and flags override it") {
    Scratch s("config");
    io::write_text_atomic(s / "run.toml", "out-dir = \"" + (s / "cv") + "\"\n[critvals]\nhorizon = 60\n"
                                          "min-window = 20\nn-paths = 200\n");
    REQUIRE(run({"--config", s / "run.toml", "critvals"}) == cli::kOk);
    auto j = io::read_json(s / "cv/critvals.json");
    CHECK(j["config"]["T"] == 60);
    CHECK(j["config"]["n_mc"] == 200);
    REQUIRE(run({"--config", s / "run.toml", "critvals", "--n-paths", "150"}) == cli::kOk);
    j = io::read_json(s / "cv/critvals.json");
    CHECK(j["config"]["n_mc"] == 150);
    CHECK(run({"--config", s / "missing.toml", "critvals"}) == cli::kUsage);
}

}  // TEST_SUITE

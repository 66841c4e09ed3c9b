#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "nftindex/errors.hpp"
#include "nftindex/io.hpp"
#include "nftindex/price_index.hpp"
#include "nftindex/rng.hpp"

using namespace nftidx;

namespace {

HedonicParams with_gamma(const std::map<std::int64_t, double>& gamma) {
    HedonicParams p;
    p.gamma = gamma;
    p.grid = {parse_date("2021-06-01"), gamma.empty() ? 1 : std::max<std::int64_t>(1, gamma.rbegin()->first)};
    return p;
}

DatedSeries daily(const std::string& name, std::vector<double> v, int offset = 0) {
    DatedSeries s;
    s.name = name;
    for (std::size_t i = 0; i < v.size(); ++i) s.dates.push_back(parse_date("2022-01-01") + std::chrono::days{offset + static_cast<int>(i)});
    s.values = std::move(v);
    return s;
}

DatedSeries random_walk(std::uint64_t seed, std::size_t n) {
    RandomStream r(seed);
    std::vector<double> v{100.0};
    while (v.size() < n) v.push_back(v.back() * std::exp(0.02 * r.normal()));
    return daily("w" + std::to_string(seed), v);
}

}  // namespace

TEST_SUITE("price-index") {

TEST_CASE("exp identity and constant gauge") {
    const auto idx = build_index(with_gamma({{0, 0.0}, {1, std::log(2.0)}}));
    REQUIRE(idx.levels.size() == 2);
    CHECK(idx.levels[0] == 100.0);
    CHECK(idx.levels[1] == doctest::Approx(200.0).epsilon(1e-14));
    const auto flat = build_index(with_gamma({{0, 0.3}, {1, 0.3}, {2, 0.3}}), 50.0);
    for (double v : flat.levels) CHECK(v == 50.0);
    for (double r : returns(flat).values) CHECK(r == 0.0);
    CHECK_THROWS_AS(build_index(with_gamma({})), ValidationError);
    CHECK_THROWS_AS(build_index(with_gamma({{0, 0.0}}), 0.0), ValidationError);
}

TEST_CASE("returns of [100, 200]") {
    const auto r = returns(build_index(with_gamma({{0, 0.0}, {1, std::log(2.0)}})));
    REQUIRE(r.values.size() == 1);
    CHECK(r.values[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.first_period == 1);
}

TEST_CASE("chained product equals the closed form") {
    RandomStream rng(21);
    std::map<std::int64_t, double> g;
    double level = 0.0;
    for (std::int64_t t = 0; t < 300; ++t) {
        g[t] = level;
        level += 0.05 * rng.normal();
    }
    const auto idx = build_index(with_gamma(g));
    double chained = 100.0;
    for (std::int64_t t = 1; t < 300; ++t) {
        chained *= std::exp(g[t] - g[t - 1]);
        CHECK(std::abs(idx.levels[static_cast<std::size_t>(t)] / chained - 1.0) <= 1e-12);
    }
}

TEST_CASE("gauge shift leaves levels unchanged") {
    HedonicParams p = with_gamma({{0, 0.0}, {1, 0.2}, {2, -0.1}, {3, 0.4}});
    const auto a = build_index(p);
    const auto b = build_index(p.shifted(-3.7));
    for (std::size_t i = 0; i < a.levels.size(); ++i) CHECK(a.levels[i] == doctest::Approx(b.levels[i]).epsilon(1e-13));
}

TEST_CASE("gap periods carry the level forward with zero return") {
    const auto idx = build_index(with_gamma({{2, 0.0}, {3, 0.1}, {5, 0.3}}));
    CHECK(idx.first_period == 2);
    REQUIRE(idx.levels.size() == 4);
    CHECK(idx.gaps == std::vector<bool>{false, false, true, false});
    CHECK(idx.levels[2] == idx.levels[1]);
    const auto r = returns(idx);
    CHECK(r.values[1] == 0.0);
    CHECK(r.gaps[1]);
    CHECK(r.values[2] == doctest::Approx(std::exp(0.2) - 1.0));
    const auto csv = index_to_csv(idx);
    CHECK(csv.rfind("date,level,level_ma7,return,gap_flag\n2021-06-03,100,100,,0\n", 0) == 0);
    CHECK(csv.find("2021-06-05,") != std::string::npos);
}

TEST_CASE("trailing moving average") {
    std::vector<double> x(10);
    std::iota(x.begin(), x.end(), 1.0);
    const auto ma = moving_average(x, 7);
    CHECK(ma.back() == doctest::Approx(7.0));
    CHECK(ma[0] == 1.0);
    CHECK(ma[2] == doctest::Approx(2.0));
    CHECK(moving_average(x, 1) == x);
    const std::vector<double> k(5, 3.25);
    CHECK(moving_average(k, 7) == k);
    CHECK_THROWS_AS(moving_average(std::vector<double>{}, 7), ValidationError);
    CHECK_THROWS_AS(moving_average(x, 0), ValidationError);
}

TEST_CASE("realized return") {
    const auto s = daily("s", {100, 150, 200});
    CHECK(realized_return(s, s.dates[0], s.dates[2]) == doctest::Approx(1.0));
    const auto flat = daily("f", {5, 5, 5});
    CHECK(realized_return(flat, flat.dates[0], flat.dates[2]) == 0.0);
    CHECK_THROWS_AS(realized_return(s, s.dates[0], s.dates[0] + std::chrono::days{9}), ValidationError);
    CHECK_THROWS_AS(realized_return(s, s.dates[2], s.dates[0]), ValidationError);
}

TEST_CASE("correlation examples") {
    const auto a = to_returns(random_walk(1, 200));
    DatedSeries neg = a;
    neg.name = "neg";
    for (double& v : neg.values) v = -v;
    const auto b = to_returns(random_walk(2, 200));
    const std::vector<DatedSeries> set{a, neg, b};
    const auto m = correlation_matrix(set);
    CHECK(*m.values[0][0] == 1.0);
    CHECK(*m.values[0][1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(*m.values[0][2]) < 0.2);
    CHECK(m.overlap[0][2] == 199);
}

TEST_CASE("zero variance gives an undefined entry") {
    const std::vector<DatedSeries> set{daily("a", {1, 2, 4, 3}), daily("k", {5, 5, 5, 5})};
    const auto m = correlation_matrix(set);
    CHECK_FALSE(m.values[0][1].has_value());
    CHECK_FALSE(m.values[1][1].has_value());
    CHECK(m.to_json()["matrix"][0][1].is_null());
}

TEST_CASE("pairwise-complete overlap") {
    const std::vector<DatedSeries> set{daily("a", {1, 2, 4, 3, 7, 1}), daily("b", {2, 1, 5, 2}, 2)};
    const auto m = correlation_matrix(set);
    CHECK(m.overlap[0][1] == 4);
    const std::vector<DatedSeries> thin{daily("a", {1, 2, 4}), daily("b", {2, 1, 5, 2}, 1)};
    CHECK_FALSE(correlation_matrix(thin).values[0][1].has_value());
}

TEST_CASE("correlations are permutation-equivariant and scale-invariant") {
    std::vector<DatedSeries> set;
    for (std::uint64_t s = 10; s < 14; ++s) set.push_back(to_returns(random_walk(s, 120)));
    const auto m = correlation_matrix(set);
    std::vector<DatedSeries> perm{set[2], set[0], set[3], set[1]};
    const std::size_t where[] = {1, 3, 0, 2};  // position of set[i] in perm
    RandomStream r(3);
    for (auto& s : perm) {
        const double a = 0.5 + 9.0 * r.uniform(), b = r.normal();
        for (double& v : s.values) v = a * v + b;
    }
    const auto q = correlation_matrix(perm);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(std::abs(*m.values[i][j] - *q.values[where[i]][where[j]]) <= 1e-12);
        }
    }
}

TEST_CASE("dated CSV reader") {
    const auto dir = std::filesystem::temp_directory_path() / "nftindex_pi_csv";
    std::filesystem::create_directories(dir);
    io::write_text_atomic(dir / "eth.csv", "date,open,close\n2022-01-01,1,10\n2022-01-02,1,11\n");
    const auto s = read_dated_csv(dir / "eth.csv", "ETH");
    CHECK(s.values == std::vector<double>{10, 11});
    CHECK(read_dated_csv(dir / "eth.csv", "ETH", "open").values == std::vector<double>{1, 1});
    io::write_text_atomic(dir / "bad.csv", "date,close\n2022-01-02,1\n2022-01-01,2\n");
    CHECK_THROWS_AS(read_dated_csv(dir / "bad.csv", "x"), ValidationError);
    CHECK_THROWS_AS(read_dated_csv(dir / "eth.csv", "x", "volume"), ValidationError);
    CHECK_THROWS_AS(read_dated_csv(dir / "none.csv", "x"), ValidationError);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE

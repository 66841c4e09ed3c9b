#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "nftindex/dates.hpp"
#include "nftindex/errors.hpp"
#include "nftindex/io.hpp"
#include "nftindex/rng.hpp"
#include "nftindex/stats.hpp"

using namespace nftidx;

TEST_SUITE("core") {

TEST_CASE("random streams are reproducible and separated") {
    RandomStream a(42, 7), b(42, 7), c(42, 8);
    std::vector<std::uint64_t> xa, xb, xc;
    for (int i = 0; i < 100; ++i) {
        xa.push_back(a.next_u64());
        xb.push_back(b.next_u64());
        xc.push_back(c.next_u64());
    }
    CHECK(xa == xb);
    CHECK(xa != xc);
    CHECK(stream_seed(1, 0) != stream_seed(0, 1));
}

TEST_CASE("uniform, below and normal draws") {
    RandomStream r(3);
    double lo = 1.0, hi = 0.0, sum = 0.0, sq = 0.0;
    std::set<std::uint64_t> seen;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        const auto k = r.below(6);
        CHECK_UNARY(k < 6);
        seen.insert(k);
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(seen.size() == 6);
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("poisson mean and variance") {
    for (double mean : {0.5, 5.0, 25.0, 800.0}) {
        RandomStream r(9);
        const int n = 40000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double k = static_cast<double>(r.poisson(mean));
            s += k;
            s2 += k * k;
        }
        const double m = s / n, v = s2 / n - m * m;
        CHECK(m == doctest::Approx(mean).epsilon(0.03));
        CHECK(v == doctest::Approx(mean).epsilon(0.08));
    }
    RandomStream r(1);
    CHECK(r.poisson(0.0) == 0);
}

TEST_CASE("median, MAD and robust scale") {
    const std::vector<double> x{5, 1, 3, 9, 7};
    CHECK(stats::median(x) == 5.0);
    const std::vector<double> even{4, 1, 3, 2};
    CHECK(stats::median(even) == 2.5);
    CHECK(stats::mad(x) == 2.0);
    CHECK(stats::robust_scale(x) == doctest::Approx(2.0 * 1.4826));
    CHECK_THROWS_AS(stats::median(std::vector<double>{}), ValidationError);
}

TEST_CASE("type-7 quantiles match numpy's default") {
    std::vector<double> x{3.5, 1, 7, 2, 9, 4, 4};
    std::sort(x.begin(), x.end());
    const double p[] = {0, 0.1, 0.25, 0.5, 0.9, 0.99, 1};
    const double want[] = {1.0, 1.6, 2.75, 4.0, 7.8, 8.88, 9.0};
    for (int i = 0; i < 7; ++i) CHECK(stats::quantile_sorted(x, p[i]) == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("pearson correlation") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10}, c{5, 4, 3, 2, 1}, k{3, 3, 3, 3, 3};
    CHECK(*stats::pearson(a, b) == doctest::Approx(1.0));
    CHECK(*stats::pearson(a, c) == doctest::Approx(-1.0));
    CHECK_FALSE(stats::pearson(a, k).has_value());
}

TEST_CASE("dates and timestamps") {
    using namespace std::chrono;
    const Date d = parse_date("2021-07-01");
    CHECK(format_date(d) == "2021-07-01");
    CHECK(parse_timestamp("2021-07-01T12:00:00Z") == sys_days{d} + hours{12});
    CHECK(parse_timestamp("2021-07-01 12:00:00Z") == sys_days{d} + hours{12});
    CHECK(parse_timestamp("2021-07-01T12:00:00.987Z") == sys_days{d} + hours{12});
    CHECK(parse_timestamp("2021-07-01T14:30:00+02:30") == sys_days{d} + hours{12});
    CHECK(parse_timestamp("2021-07-01T00:00:00-01:00") == sys_days{d} + hours{1});
    CHECK(format_timestamp(parse_timestamp("2021-07-01T12:34:56Z")) == "2021-07-01T12:34:56Z");
    CHECK_THROWS_AS(parse_timestamp("07/01/2021 12:00"), ValidationError);
    CHECK_THROWS_AS(parse_timestamp("2021-07-01"), ValidationError);
    CHECK_THROWS_AS(parse_date("2021-13-01"), ValidationError);
    CHECK_THROWS_AS(parse_date("2021-02-30"), ValidationError);
}

TEST_CASE("CSV splitting and quoting") {
    CHECK(io::split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(io::split_csv_line("\"x,y\",\"he said \"\"hi\"\"\"") == std::vector<std::string>{"x,y", "he said \"hi\""});
    CHECK_THROWS_AS(io::split_csv_line("\"open"), ValidationError);
    CHECK(io::csv_field("plain") == "plain");
    CHECK(io::csv_field("a,b") == "\"a,b\"");
    CHECK(io::split_csv_line(io::csv_field("q\"t,")) == std::vector<std::string>{"q\"t,"});
    CHECK(io::split_lines("a\r\nb\n") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("format_double round-trips") {
    RandomStream r(5);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::ldexp(r.normal(), static_cast<int>(r.below(200)) - 100);
        CHECK(std::stod(io::format_double(v)) == v);
    }
    CHECK(io::format_double(100.0) == "100");
}

TEST_CASE("atomic writes replace the target and leave no temp file") {
    const auto dir = std::filesystem::temp_directory_path() / "nftindex_core_io";
    std::filesystem::create_directories(dir);
    const auto path = dir / "out.txt";
    io::write_text_atomic(path, "first");
    io::write_text_atomic(path, "second");
    CHECK(io::read_text(path) == "second");
    CHECK_FALSE(std::filesystem::exists(dir / "out.txt.tmp"));
    CHECK_THROWS_AS(io::read_text(dir / "missing.txt"), IoError);
    CHECK_THROWS_AS(io::write_text_atomic(dir / "no" / "such" / "dir.txt", "x"), IoError);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE

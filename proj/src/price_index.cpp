#include "nftindex/price_index.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "nftindex/errors.hpp"
#include "nftindex/io.hpp"
#include "nftindex/stats.hpp"

namespace nftidx {

IndexSeries build_index(const HedonicParams& params, double base_value) {
    if (!(base_value > 0.0)) throw ValidationError("index base value must be > 0");
    if (params.gamma.empty()) throw ValidationError("model has no fitted periods");
    IndexSeries index;
    index.grid = params.grid;
    index.base_value = base_value;
    index.first_period = params.gamma.begin()->first;
    const std::int64_t last = params.gamma.rbegin()->first;
    const double gamma0 = params.gamma.begin()->second;
    const auto n = static_cast<std::size_t>(last - index.first_period + 1);
    index.levels.reserve(n);
    index.gaps.reserve(n);
    for (std::int64_t t = index.first_period; t <= last; ++t) {
        const auto it = params.gamma.find(t);
        if (it == params.gamma.end()) {
            index.levels.push_back(index.levels.back());
            index.gaps.push_back(true);
        } else {
            index.levels.push_back(base_value * std::exp(it->second - gamma0));
            index.gaps.push_back(false);
        }
    }
    return index;
}

ReturnSeries returns(const IndexSeries& index) {
    ReturnSeries r;
    r.first_period = index.first_period + 1;
    for (std::size_t i = 1; i < index.levels.size(); ++i) {
        r.values.push_back(index.gaps[i] ? 0.0 : index.levels[i] / index.levels[i - 1] - 1.0);
        r.gaps.push_back(index.gaps[i]);
    }
    return r;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
    if (window < 1) throw ValidationError("moving-average window must be >= 1");
    if (values.empty()) throw ValidationError("moving average of an empty series");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t j = lo; j <= i; ++j) sum += values[j];
        out[i] = sum / static_cast<double>(i + 1 - lo);
    }
    return out;
}

std::optional<double> DatedSeries::at(Date d) const {
    const auto it = std::lower_bound(dates.begin(), dates.end(), d);
    if (it == dates.end() || *it != d) return std::nullopt;
    return values[static_cast<std::size_t>(it - dates.begin())];
}

DatedSeries index_levels(const IndexSeries& index, const std::string& name) {
    DatedSeries s;
    s.name = name;
    for (std::size_t i = 0; i < index.levels.size(); ++i) {
        s.dates.push_back(index.date_at(i));
        s.values.push_back(index.levels[i]);
    }
    return s;
}

DatedSeries to_returns(const DatedSeries& prices) {
    DatedSeries r;
    r.name = prices.name;
    for (std::size_t i = 1; i < prices.values.size(); ++i) {
        if (!(prices.values[i - 1] > 0.0)) throw ValidationError(prices.name + ": returns need positive prices");
        r.dates.push_back(prices.dates[i]);
        r.values.push_back(prices.values[i] / prices.values[i - 1] - 1.0);
    }
    return r;
}

double realized_return(const DatedSeries& series, Date from, Date to) {
    if (!(from < to)) throw ValidationError("realized return needs from < to");
    const auto a = series.at(from);
    const auto b = series.at(to);
    if (!a) throw ValidationError(series.name + " has no value on " + format_date(from));
    if (!b) throw ValidationError(series.name + " has no value on " + format_date(to));
    return *b / *a - 1.0;
}

CorrelationMatrix correlation_matrix(std::span<const DatedSeries> series) {
    if (series.size() < 2) throw ValidationError("correlation matrix needs at least two series");
    const std::size_t n = series.size();
    CorrelationMatrix m;
    m.values.assign(n, std::vector<std::optional<double>>(n));
    m.overlap.assign(n, std::vector<std::size_t>(n, 0));
    for (const auto& s : series) m.names.push_back(s.name);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            std::vector<double> x, y;
            const auto& a = series[i];
            const auto& b = series[j];
            std::size_t p = 0, q = 0;
            while (p < a.dates.size() && q < b.dates.size()) {
                if (a.dates[p] < b.dates[q]) {
                    ++p;
                } else if (b.dates[q] < a.dates[p]) {
                    ++q;
                } else {
                    x.push_back(a.values[p++]);
                    y.push_back(b.values[q++]);
                }
            }
            m.overlap[i][j] = m.overlap[j][i] = x.size();
            std::optional<double> r;
            if (x.size() >= 3) r = stats::pearson(x, y);
            if (i == j && r) r = 1.0;
            m.values[i][j] = m.values[j][i] = r;
        }
    }
    return m;
}

nlohmann::json CorrelationMatrix::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : values) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& v : row) r.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
        rows.push_back(r);
    }
    return {{"series", names}, {"matrix", rows}, {"overlap", overlap}};
}

std::string index_to_csv(const IndexSeries& index) {
    const auto ma = moving_average(index.levels, 7);
    const auto ret = returns(index);
    std::string out = "date,level,level_ma7,return,gap_flag\n";
    for (std::size_t i = 0; i < index.levels.size(); ++i) {
        out += format_date(index.date_at(i)) + "," + io::format_double(index.levels[i]) + "," +
               io::format_double(ma[i]) + "," + (i == 0 ? std::string{} : io::format_double(ret.values[i - 1])) +
               "," + (index.gaps[i] ? "1" : "0") + "\n";
    }
    return out;
}

DatedSeries read_dated_csv(const std::filesystem::path& path, const std::string& name,
                           const std::string& value_column) {
    if (!std::filesystem::exists(path)) throw ValidationError("series file not found: " + path.string());
    const auto lines = io::split_lines(io::read_text(path));
    if (lines.empty()) throw ValidationError(path.string() + ": empty CSV file");
    const auto header = io::split_csv_line(lines[0]);
    std::map<std::string, std::size_t> cols;
    for (std::size_t i = 0; i < header.size(); ++i) cols[header[i]] = i;
    if (!cols.count("date")) throw ValidationError(path.string() + ":1: CSV header lacks column 'date'");
    std::string column = value_column;
    if (column.empty()) column = cols.count("close") ? "close" : "level";
    if (!cols.count(column)) throw ValidationError(path.string() + ":1: CSV header lacks column '" + column + "'");

    DatedSeries s;
    s.name = name;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = io::split_csv_line(lines[i]);
        const std::string where = path.string() + ":" + std::to_string(i + 1) + ": ";
        if (f.size() != header.size()) throw ValidationError(where + "wrong field count");
        Date d;
        try {
            d = parse_date(f[cols.at("date")]);
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
        const std::string& text = f[cols.at(column)];
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
            throw ValidationError(where + "'" + text + "' is not a number");
        }
        if (!s.dates.empty() && !(s.dates.back() < d)) throw ValidationError(where + "dates must be strictly ascending");
        s.dates.push_back(d);
        s.values.push_back(v);
    }
    return s;
}

}  // namespace nftidx

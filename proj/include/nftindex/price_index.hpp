#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nftindex/dates.hpp"
#include "nftindex/hedonic.hpp"

namespace nftidx {

/// Daily index levels on a contiguous period range starting at first_period.
struct IndexSeries {
    PeriodGrid grid;
    double base_value = 100.0;  // A
    std::int64_t first_period = 0;
    std::vector<double> levels;
    std::vector<bool> gaps;  // no fitted gamma: level carried forward

    std::int64_t period_at(std::size_t i) const { return first_period + static_cast<std::int64_t>(i); }
    Date date_at(std::size_t i) const { return grid.date_of(period_at(i)); }
};

/// Arithmetic returns; values[i] is the return into period first_period + i.
struct ReturnSeries {
    std::int64_t first_period = 1;
    std::vector<double> values;
    std::vector<bool> gaps;
};

/// I_t = A * exp(gamma_t - gamma_ref), ref = first fitted period, for every
/// period between the first and last fitted ones. Periods without a fitted
/// gamma carry the previous level forward and are flagged.
IndexSeries build_index(const HedonicParams& params, double base_value = 100.0);

/// I_t / I_{t-1} - 1 for t >= 1; gap periods report 0.
ReturnSeries returns(const IndexSeries& index);

/// Trailing mean over min(window, i + 1) points.
std::vector<double> moving_average(std::span<const double> values, std::size_t window = 7);

/// A named daily series with ascending, unique dates.
struct DatedSeries {
    std::string name;
    std::vector<Date> dates;
    std::vector<double> values;

    std::optional<double> at(Date d) const;
};

DatedSeries index_levels(const IndexSeries& index, const std::string& name = "index");

/// Arithmetic returns between consecutive observations, dated at the later one.
DatedSeries to_returns(const DatedSeries& prices);

/// value[to] / value[from] - 1. Throws ValidationError when an endpoint is
/// missing or from >= to.
double realized_return(const DatedSeries& series, Date from, Date to);

struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> values;  // nullopt: undefined (zero variance or overlap < 3)
    std::vector<std::vector<std::size_t>> overlap;

    nlohmann::json to_json() const;
};

/// Pearson correlation of every pair on the dates both series cover.
CorrelationMatrix correlation_matrix(std::span<const DatedSeries> series);

/// "date,level,level_ma7,return,gap_flag" rows.
std::string index_to_csv(const IndexSeries& index);

/// Reads a CSV with a `date` column and a value column (`close` or `level`,
/// or the one given). Rows must be in ascending date order.
DatedSeries read_dated_csv(const std::filesystem::path& path, const std::string& name,
                           const std::string& value_column = {});

}  // namespace nftidx

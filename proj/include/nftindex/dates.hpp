#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace nftidx {

using Date = std::chrono::sys_days;
using Timestamp = std::chrono::sys_seconds;

/// Parses "YYYY-MM-DD". Throws ValidationError on anything else.
Date parse_date(std::string_view text);

/// Parses an RFC-3339 timestamp ("2021-07-01T12:00:00Z", optional fractional
/// seconds, "Z" or a numeric offset; a space may replace the "T").
/// Fractional seconds are truncated. Throws ValidationError on anything else.
Timestamp parse_timestamp(std::string_view text);

std::string format_date(Date d);
std::string format_timestamp(Timestamp ts);

}  // namespace nftidx

#include "nftindex/dates.hpp"

#include <cctype>
#include <cstdio>

#include "nftindex/errors.hpp"

namespace nftidx {
namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
    if (pos + count > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

bool parse_ymd(std::string_view s, Date& out) {
    int y, m, d;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
    if (!read_digits(s, 0, 4, y) || !read_digits(s, 5, 2, m) || !read_digits(s, 8, 2, d)) return false;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return false;
    out = Date{ymd};
    return true;
}

}  // namespace

Date parse_date(std::string_view text) {
    Date d;
    if (text.size() != 10 || !parse_ymd(text, d)) {
        throw ValidationError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    }
    return d;
}

Timestamp parse_timestamp(std::string_view text) {
    const auto fail = [&]() -> Timestamp {
        throw ValidationError("unknown timestamp format '" + std::string(text) + "' (expected RFC-3339)");
    };
    Date day;
    if (!parse_ymd(text, day)) return fail();
    if (text.size() < 20 || (text[10] != 'T' && text[10] != 't' && text[10] != ' ')) return fail();
    int hh, mm, ss;
    if (!read_digits(text, 11, 2, hh) || text[13] != ':' || !read_digits(text, 14, 2, mm) || text[16] != ':' ||
        !read_digits(text, 17, 2, ss)) {
        return fail();
    }
    if (hh > 23 || mm > 59 || ss > 60) return fail();
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        const std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos == start) return fail();
    }
    if (pos >= text.size()) return fail();
    int offset_minutes = 0;
    if (text[pos] == 'Z' || text[pos] == 'z') {
        ++pos;
    } else if (text[pos] == '+' || text[pos] == '-') {
        int oh, om;
        if (!read_digits(text, pos + 1, 2, oh) || pos + 3 >= text.size() || text[pos + 3] != ':' ||
            !read_digits(text, pos + 4, 2, om)) {
            return fail();
        }
        offset_minutes = (oh * 60 + om) * (text[pos] == '-' ? -1 : 1);
        pos += 6;
    } else {
        return fail();
    }
    if (pos != text.size()) return fail();
    using namespace std::chrono;
    return Timestamp{day} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_minutes};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_timestamp(Timestamp ts) {
    const Date day = std::chrono::floor<std::chrono::days>(ts);
    const auto secs = (ts - day).count();
    char buf[16];
    std::snprintf(buf, sizeof buf, "T%02lld:%02lld:%02lldZ", static_cast<long long>(secs / 3600),
                  static_cast<long long>(secs / 60 % 60), static_cast<long long>(secs % 60));
    return format_date(day) + buf;
}

}  // namespace nftidx

#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

namespace engage {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

constexpr std::int64_t kSecondsPerDay = 86400;

// Howard Hinnant's days-from-civil algorithm.
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr Timestamp make_timestamp(int y, unsigned mo, unsigned d,
                                   unsigned h = 0, unsigned mi = 0, unsigned s = 0) {
    return days_from_civil(y, mo, d) * kSecondsPerDay + h * 3600 + mi * 60 + s;
}

// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS", and "YYYY-MM-DDTHH:MM:SS[Z]".
// Fractional seconds and numeric UTC offsets ("+00:00") are tolerated; the
// offset is applied.
inline std::optional<Timestamp> parse_timestamp(const std::string& text) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    int consumed = 0;
    int n = std::sscanf(text.c_str(), "%d-%u-%u%n", &y, &mo, &d, &consumed);
    if (n != 3 || mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    std::size_t pos = static_cast<std::size_t>(consumed);
    if (pos < text.size()) {
        sep = text[pos];
        if (sep != 'T' && sep != ' ') return std::nullopt;
        n = std::sscanf(text.c_str() + pos + 1, "%u:%u:%u%n", &h, &mi, &s, &consumed);
        if (n != 3 || h > 23 || mi > 59 || s > 60) return std::nullopt;
        pos += 1 + static_cast<std::size_t>(consumed);
        // skip fractional seconds
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        }
    }
    std::int64_t offset = 0;
    if (pos < text.size()) {
        const char c = text[pos];
        if (c == 'Z') {
            ++pos;
        } else if (c == '+' || c == '-') {
            unsigned oh = 0, om = 0;
            n = std::sscanf(text.c_str() + pos + 1, "%u:%u%n", &oh, &om, &consumed);
            if (n != 2) return std::nullopt;
            offset = (c == '+' ? -1 : 1) * (oh * 3600LL + om * 60LL);
            pos += 1 + static_cast<std::size_t>(consumed);
        }
        if (pos != text.size()) return std::nullopt;
    }
    return make_timestamp(y, mo, d, h, mi, s) + offset;
}

// "YYYY-MM-DDTHH:MM:SSZ"
inline std::string format_timestamp(Timestamp t) {
    std::int64_t days = t / kSecondsPerDay;
    std::int64_t sod = t % kSecondsPerDay;
    if (sod < 0) {
        sod += kSecondsPerDay;
        --days;
    }
    // civil-from-days, inverse of the above
    std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y + (m <= 2)), m, d,
                  static_cast<long long>(sod / 3600),
                  static_cast<long long>((sod / 60) % 60),
                  static_cast<long long>(sod % 60));
    return buf;
}

}  // namespace engage

#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "pm25/csv.hpp"

namespace pm25 {

/// Calendar day, ISO `YYYY-MM-DD` on the wire.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::year_month_day ymd) : days_(std::chrono::sys_days{ymd}) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : Date(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}) {}

    static std::optional<Date> parse(std::string_view s) {
        s = csv::trim(s);
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        auto digits = [&](std::size_t from, std::size_t len) -> std::optional<int> {
            int v = 0;
            for (std::size_t i = from; i < from + len; ++i) {
                if (s[i] < '0' || s[i] > '9') return std::nullopt;
                v = v * 10 + (s[i] - '0');
            }
            return v;
        };
        const auto y = digits(0, 4);
        const auto m = digits(5, 2);
        const auto d = digits(8, 2);
        if (!y || !m || !d) return std::nullopt;
        const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                              std::chrono::day{static_cast<unsigned>(*d)}};
        if (!ymd.ok()) return std::nullopt;
        return Date{ymd};
    }

    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }

    std::string str() const {
        const auto v = ymd();
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(v.year()), static_cast<unsigned>(v.month()),
                      static_cast<unsigned>(v.day()));
        return buf;
    }

    /// Signed day difference this - other.
    long days_since(const Date& other) const { return (days_ - other.days_).count(); }

    Date plus_days(long n) const {
        Date d;
        d.days_ = days_ + std::chrono::days{n};
        return d;
    }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::sys_days days_{};
};

}  // namespace pm25

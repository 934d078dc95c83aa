#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace mmfc {

// Calendar date at day granularity. Time-of-day and zone offsets are dropped
// on parse.
using Date = std::chrono::year_month_day;

// Accepts "YYYY-MM-DD" optionally followed by a 'T' or ' ' time suffix.
std::optional<Date> parse_iso_date(std::string_view text);

std::string format_date(const Date& date);

}  // namespace mmfc

#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "sdidkit/error.hpp"

namespace sdidkit {

using Date = std::chrono::sys_days;

/// Parses an ISO-8601 calendar day (YYYY-MM-DD).
inline Date parse_date(std::string_view text) {
  auto fail = [&] { throw InputError("invalid ISO-8601 date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') fail();
  int y = 0;
  unsigned m = 0, d = 0;
  auto field = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    if (ec != std::errc{} || ptr != text.data() + pos + len) fail();
  };
  field(0, 4, y);
  field(5, 2, m);
  field(8, 2, d);
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) fail();
  return Date{ymd};
}

inline std::string format_date(Date date) {
  std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Last calendar day of the month lying `months` months after the month of `date`.
/// 2022-11-30 with months=1 gives 2022-12-31.
inline Date end_of_month_after(Date date, int months) {
  std::chrono::year_month_day ymd{date};
  auto ym = std::chrono::year_month{ymd.year(), ymd.month()} + std::chrono::months{months};
  return Date{std::chrono::year_month_day_last{ym.year(), std::chrono::month_day_last{ym.month()}}};
}

}  // namespace sdidkit

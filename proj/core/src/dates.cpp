#include "geocon/dates.hpp"

#include <cctype>
#include <cstdio>

#include "geocon/tensor.hpp"

namespace geocon {

Date parse_date(std::string_view text) {
  const auto bad = [&] { return Error("invalid ISO date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) throw bad();
  }
  const auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + (text[i] - '0');
    return v;
  };
  const std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!ymd.ok()) throw bad();
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::size_t DateRange::days() const {
  if (last < first) return 0;
  return static_cast<std::size_t>((last - first).count()) + 1;
}

DateRange parse_date_range(std::string_view first, std::string_view last) {
  DateRange r{parse_date(first), parse_date(last)};
  if (r.last < r.first) {
    throw Error("date range ends before it starts: " + std::string(first) + " .. " +
                std::string(last));
  }
  return r;
}

}  // namespace geocon

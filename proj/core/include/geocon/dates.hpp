#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <string_view>

namespace geocon {

using Date = std::chrono::sys_days;

/// Parses strict ISO-8601 `YYYY-MM-DD`; throws geocon::Error otherwise.
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Inclusive calendar interval [first, last].
struct DateRange {
  Date first;
  Date last;

  std::size_t days() const;
  bool contains(Date d) const { return d >= first && d <= last; }
  /// Zero-based day offset of `d` from `first`.
  std::ptrdiff_t offset(Date d) const { return (d - first).count(); }
  Date at(std::size_t offset) const { return first + std::chrono::days(offset); }
};

DateRange parse_date_range(std::string_view first, std::string_view last);

/// Half-open index interval [begin, end) over panel timestamps.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return size() == 0; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

}  // namespace geocon

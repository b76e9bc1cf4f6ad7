#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace mananet {

/// Calendar day stored as a serial count of days since 1970-01-01.
struct Date {
  int32_t serial = 0;

  static Date from_ymd(int year, int month, int day);
  /// Parses "YYYY-MM-DD". Throws ValidationError on anything else.
  static Date parse(std::string_view iso);

  std::string str() const;
  /// 0 = Monday ... 6 = Sunday.
  int weekday() const;

  Date plus_days(int n) const { return Date{serial + n}; }
  auto operator<=>(const Date&) const = default;
};

}  // namespace mananet

#include "mananet/date.hpp"

#include <cstdio>

#include "mananet/errors.hpp"

namespace mananet {

namespace {

// Howard Hinnant's civil-date algorithms.
int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                       static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<int64_t>(era) * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t yr = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yr + (m <= 2));
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

Date Date::from_ymd(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1 || day > 31) {
    throw ValidationError("invalid calendar date");
  }
  return Date{static_cast<int32_t>(days_from_civil(year, month, day))};
}

Date Date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw ValidationError("expected ISO date YYYY-MM-DD, got '" + std::string(iso) + "'");
  }
  for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (!is_digit(iso[i])) {
      throw ValidationError("expected ISO date YYYY-MM-DD, got '" + std::string(iso) + "'");
    }
  }
  const int y = (iso[0] - '0') * 1000 + (iso[1] - '0') * 100 + (iso[2] - '0') * 10 + (iso[3] - '0');
  const int m = (iso[5] - '0') * 10 + (iso[6] - '0');
  const int d = (iso[8] - '0') * 10 + (iso[9] - '0');
  Date result = from_ymd(y, m, d);
  // Reject normalized-but-nonexistent days such as Feb 30.
  if (result.str() != iso) {
    throw ValidationError("nonexistent calendar date '" + std::string(iso) + "'");
  }
  return result;
}

std::string Date::str() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

int Date::weekday() const {
  // 1970-01-01 was a Thursday (weekday 3).
  int w = (serial + 3) % 7;
  return w < 0 ? w + 7 : w;
}

}  // namespace mananet

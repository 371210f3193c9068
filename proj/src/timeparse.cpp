#include "gts/timeparse.hpp"

#include <cstdio>

#include "gts/tensor.hpp"

namespace gts::data {

namespace {

// Howard Hinnant's days-from-civil algorithm.
int64_t days_from_civil(int64_t y, int64_t m, int64_t d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const int64_t yoe = y - era * 400;
  const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int64_t& y, int64_t& m, int64_t& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const int64_t doe = z - era * 146097;
  const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = yoe + era * 400;
  const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const int64_t mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

bool leap(int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int64_t days_in_month(int64_t y, int64_t m) {
  static const int64_t lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && leap(y)) return 29;
  return lengths[m - 1];
}

}  // namespace

int64_t parse_iso8601(const std::string& s) {
  std::string body = s;
  if (!body.empty() && (body.back() == 'Z' || body.back() == 'z')) body.pop_back();
  int y, mo, d, h, mi, se;
  char sep;
  if (body.size() != 19 ||
      std::sscanf(body.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h,
                  &mi, &se) != 7 ||
      (sep != 'T' && sep != ' ') || body[13] != ':' || body[16] != ':')
    throw DataError("malformed timestamp '" + s + "', expected YYYY-MM-DDTHH:MM:SS");
  if (mo < 1 || mo > 12) throw DataError("timestamp '" + s + "': month out of range");
  if (d < 1 || d > days_in_month(y, mo))
    throw DataError("timestamp '" + s + "': day out of range");
  if (h < 0 || h > 23 || mi < 0 || mi > 59 || se < 0 || se > 59)
    throw DataError("timestamp '" + s + "': time out of range");
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

std::string format_iso8601(int64_t t) {
  int64_t days = t / 86400;
  int64_t sod = t % 86400;
  if (sod < 0) {
    sod += 86400;
    days -= 1;
  }
  int64_t y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02lld-%02lldT%02lld:%02lld:%02lld",
                (long long)y, (long long)m, (long long)d, (long long)(sod / 3600),
                (long long)(sod % 3600 / 60), (long long)(sod % 60));
  return buf;
}

}  // namespace gts::data

#include "cwopt/timestamp.hpp"

#include <charconv>
#include <cstdio>

#include "cwopt/error.hpp"

namespace cwopt {

namespace chr = std::chrono;

namespace {

int parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len,
                    std::string_view whole) {
  int value = 0;
  if (pos + len > text.size()) fail(ErrorKind::Schema, "truncated timestamp '" + std::string(whole) + "'");
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len)
    fail(ErrorKind::Schema, "malformed timestamp '" + std::string(whole) + "'");
  return value;
}

void expect_char(std::string_view text, std::size_t pos, char c, std::string_view whole) {
  if (pos >= text.size() || text[pos] != c)
    fail(ErrorKind::Schema, "malformed timestamp '" + std::string(whole) + "'");
}

}  // namespace

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, int hour, int minute,
                                int second) {
  chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) fail(ErrorKind::Domain, "invalid calendar date");
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 || second > 59)
    fail(ErrorKind::Domain, "invalid time of day");
  return Timestamp(chr::local_days{ymd} + chr::hours{hour} + chr::minutes{minute} +
                   chr::seconds{second});
}

Timestamp Timestamp::parse(std::string_view text) {
  std::string_view whole = text;
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  if (text.size() != 16 && text.size() != 19)
    fail(ErrorKind::Schema, "timestamp '" + std::string(whole) +
                                "' must be local wall-clock YYYY-MM-DDTHH:MM[:SS]");
  int y = parse_fixed_int(text, 0, 4, whole);
  expect_char(text, 4, '-', whole);
  int mo = parse_fixed_int(text, 5, 2, whole);
  expect_char(text, 7, '-', whole);
  int d = parse_fixed_int(text, 8, 2, whole);
  if (text[10] != 'T' && text[10] != ' ') fail(ErrorKind::Schema, "malformed timestamp '" + std::string(whole) + "'");
  int h = parse_fixed_int(text, 11, 2, whole);
  expect_char(text, 13, ':', whole);
  int mi = parse_fixed_int(text, 14, 2, whole);
  int s = 0;
  if (text.size() == 19) {
    expect_char(text, 16, ':', whole);
    s = parse_fixed_int(text, 17, 2, whole);
  }
  try {
    return from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, s);
  } catch (const Error&) {
    fail(ErrorKind::Schema, "out-of-range timestamp '" + std::string(whole) + "'");
  }
}

std::string Timestamp::iso() const {
  auto ymd = date();
  int sod = seconds_of_day();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), sod / 3600,
                (sod / 60) % 60, sod % 60);
  return buf;
}

chr::year_month_day Timestamp::date() const { return chr::year_month_day{chr::floor<chr::days>(t_)}; }

chr::year_month Timestamp::year_month() const {
  auto ymd = date();
  return chr::year_month{ymd.year(), ymd.month()};
}

chr::weekday Timestamp::weekday() const { return chr::weekday{chr::floor<chr::days>(t_)}; }

int Timestamp::seconds_of_day() const {
  auto midnight = chr::floor<chr::days>(t_);
  return static_cast<int>((t_ - midnight).count());
}

chr::year_month parse_year_month(std::string_view text) {
  if (text.size() != 7 || text[4] != '-')
    fail(ErrorKind::Schema, "month '" + std::string(text) + "' must be YYYY-MM");
  int y = parse_fixed_int(text, 0, 4, text);
  int m = parse_fixed_int(text, 5, 2, text);
  chr::year_month ym{chr::year{y}, chr::month{static_cast<unsigned>(m)}};
  if (!ym.ok()) fail(ErrorKind::Schema, "month '" + std::string(text) + "' out of range");
  return ym;
}

std::string format_year_month(chr::year_month ym) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", static_cast<int>(ym.year()),
                static_cast<unsigned>(ym.month()));
  return buf;
}

Timestamp month_start(chr::year_month ym) {
  return Timestamp(chr::local_days{ym / chr::day{1}} + chr::seconds{0});
}

Timestamp month_end(chr::year_month ym) { return month_start(ym + chr::months{1}); }

}  // namespace cwopt

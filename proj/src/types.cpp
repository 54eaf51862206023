#include "tandem/types.hpp"

#include "tandem/error.hpp"

#include <charconv>
#include <cstdio>

namespace tandem {

namespace chr = std::chrono;

std::string_view to_string(Role r) noexcept
{
  return r == Role::Teacher ? "TEACHER" : "STUDENT";
}

Role parse_role(std::string_view s)
{
  if (s == "TEACHER")
    return Role::Teacher;
  if (s == "STUDENT")
    return Role::Student;
  fail(Errc::SchemaViolation, "unknown role '" + std::string(s) + "'");
}

Timestamp day_start(Timestamp t)
{
  return chr::floor<chr::days>(t);
}

Timestamp week_start(Timestamp t)
{
  const chr::sys_days day = chr::floor<chr::days>(t);
  const chr::weekday wd{day};
  // c_encoding: Sunday = 0 .. Saturday = 6
  const unsigned since_monday = (wd.c_encoding() + 6) % 7;
  return day - chr::days{since_monday};
}

Timestamp parse_date(std::string_view s)
{
  int y = 0;
  unsigned m = 0, d = 0;
  auto bad = [&] { fail(Errc::ParseError, "bad date '" + std::string(s) + "'"); };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    bad();
  auto num = [&](std::string_view part, auto& out) {
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc{} || p != part.data() + part.size())
      bad();
  };
  num(s.substr(0, 4), y);
  num(s.substr(5, 2), m);
  num(s.substr(8, 2), d);
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok())
    bad();
  return chr::sys_days{ymd};
}

std::string format_date(Timestamp t)
{
  const chr::year_month_day ymd{chr::floor<chr::days>(t)};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

} // namespace tandem

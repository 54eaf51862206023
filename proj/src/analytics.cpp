#include "tandem/analytics.hpp"

#include "tandem/error.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace tandem {

namespace {

using boost::multiprecision::cpp_int;

cpp_int pow10(int n)
{
  cpp_int r = 1;
  for (int k = 0; k < n; ++k)
    r *= 10;
  return r;
}

/// num/den rounded half-up to four significant digits.
std::string render_sig4(const cpp_int& num, const cpp_int& den)
{
  if (num == 0)
    return "0.000";
  // Find s with 1000 <= num * 10^s / den < 10000.
  int s = 0;
  auto scaled = [&](int e, cpp_int& a, cpp_int& b) {
    a = e >= 0 ? num * pow10(e) : num;
    b = e >= 0 ? den : den * pow10(-e);
  };
  cpp_int a, b;
  scaled(s, a, b);
  while (a < 1000 * b)
    scaled(++s, a, b);
  while (a >= 10000 * b)
    scaled(--s, a, b);
  cpp_int q = (2 * a + b) / (2 * b);
  if (q == 10000)
    {
      q = 1000;
      --s;
    }
  std::string digits = q.str();
  if (s <= 0)
    return digits + std::string(static_cast<std::size_t>(-s), '0');
  if (s >= 4)
    return "0." + std::string(static_cast<std::size_t>(s - 4), '0') + digits;
  return digits.substr(0, 4 - s) + "." + digits.substr(4 - s);
}

bool session_kind(GrowthKind k)
{
  return k == GrowthKind::CallMade || k == GrowthKind::SessionDone || k == GrowthKind::Taught;
}

bool marks_active(GrowthKind k) { return k == GrowthKind::ActiveDay || session_kind(k); }

std::string fixed(double v, int decimals)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string minutes_text(const Ratio& r)
{
  if (r.num % r.den == 0)
    return std::to_string(r.num / r.den);
  return fixed(r.value(), 2);
}

/// Named users seen per UTC day, for the daily audience of K-retention.
struct DailyAudience
{
  std::map<std::int64_t, std::set<UserId>> active;
  std::map<std::int64_t, std::set<UserId>> registered;

  explicit DailyAudience(const std::vector<GrowthEvent>& events)
  {
    for (const auto& e : events)
      {
        if (e.aggregate())
          continue;
        const std::int64_t day = to_epoch(day_start(e.ts));
        if (marks_active(e.kind))
          active[day].insert(e.user);
        else if (e.kind == GrowthKind::Register)
          registered[day].insert(e.user);
      }
  }

  std::uint64_t dU(std::int64_t day) const
  {
    auto it = active.find(day);
    return it == active.end() ? 0 : it->second.size();
  }

  std::uint64_t dNU(std::int64_t day) const
  {
    auto r = registered.find(day);
    auto a = active.find(day);
    if (r == registered.end() || a == active.end())
      return 0;
    std::uint64_t n = 0;
    for (const auto& u : r->second)
      n += a->second.contains(u);
    return n;
  }
};

constexpr std::int64_t kDay = 86400;

} // namespace

std::string Ratio::sig4() const
{
  return render_sig4(cpp_int(num), cpp_int(den));
}

std::string Ratio::percent4() const
{
  return render_sig4(cpp_int(num) * 100, cpp_int(den)) + "%";
}

bool Ratio::operator==(const Ratio& o) const noexcept
{
  return cpp_int(num) * o.den == cpp_int(o.num) * den;
}

Window Window::all() noexcept
{
  return Window{Timestamp{Seconds{std::numeric_limits<std::int64_t>::min()}},
                Timestamp{Seconds{std::numeric_limits<std::int64_t>::max()}}};
}

double k_factor(const MetricsWindow& w)
{
  if (w.U == 0)
    fail(Errc::EmptyWindow, "no active users in window");
  if (w.i == 0)
    {
      if (w.IU != 0)
        fail(Errc::DegenerateInput, "invited registrations without invitations");
      return 0.0;
    }
  if (w.IU > w.i)
    fail(Errc::DegenerateInput, "more invited registrations than invitations");
  // Extended precision keeps the three roundings of the product within one
  // ulp of IU/U once narrowed.
  const long double aipu = static_cast<long double>(w.i) / static_cast<long double>(w.U);
  const long double ipi = static_cast<long double>(w.IU) / static_cast<long double>(w.i);
  return static_cast<double>(aipu * ipi);
}

Ratio k_factor_exact(const MetricsWindow& w)
{
  k_factor(w); // same preconditions
  return Ratio{w.IU, w.U};
}

double k_retention(std::uint64_t dU, std::uint64_t dNU, std::uint64_t dU_prev)
{
  if (dU_prev == 0)
    fail(Errc::EmptyPreviousDay, "previous day had no audience");
  if (dNU > dU)
    fail(Errc::DegenerateInput, "more new users than the day's audience");
  return static_cast<double>(dU - dNU) / static_cast<double>(dU_prev);
}

double k_growth(double k, double r)
{
  if (!(k >= 0) || !(r >= 0) || !(r <= 1))
    fail(Errc::DegenerateInput, "need k >= 0 and 0 <= r <= 1");
  return k + r;
}

ProjectionSeries project_growth(double u0, double k, double r, std::uint64_t steps)
{
  if (!(u0 > 0))
    fail(Errc::DegenerateInput, "u0 must be positive");
  const double g = k_growth(k, r);
  ProjectionSeries s{u0, k, r, {}};
  s.points.reserve(steps + 1);
  double a = u0;
  s.points.push_back(a);
  for (std::uint64_t n = 0; n < steps; ++n)
    {
      a *= g;
      s.points.push_back(a);
    }
  return s;
}

double significance(Proportion before, Proportion after)
{
  for (const Proportion& p : {before, after})
    {
      if (p.trials == 0)
        fail(Errc::DegenerateInput, "zero trials");
      if (p.successes > p.trials)
        fail(Errc::DegenerateInput, "successes exceed trials");
    }
  const cpp_int a = before.successes, b = before.trials - before.successes;
  const cpp_int c = after.successes, d = after.trials - after.successes;
  const cpp_int cross = a * d - b * c;
  if (cross == 0 || a + c == 0 || b + d == 0)
    return 1.0;
  const cpp_int n = a + b + c + d;
  const cpp_int margins = (a + b) * (c + d) * (a + c) * (b + d);
  const long double chi2 = static_cast<long double>(n * cross * cross)
                           / static_cast<long double>(margins);
  return static_cast<double>(std::erfc(std::sqrt(chi2 / 2.0L)));
}

Ratio ConnectionStats::total_minutes() const noexcept
{
  return Ratio{static_cast<std::uint64_t>(total_seconds), 60};
}

std::optional<Ratio> ConnectionStats::mean_minutes() const noexcept
{
  if (connects == 0)
    return std::nullopt;
  return Ratio{static_cast<std::uint64_t>(total_seconds), 60 * connects};
}

ConnectionStats connection_stats(const std::vector<GrowthEvent>& events, Window w)
{
  ConnectionStats s;
  for (const auto& e : events)
    if (e.kind == GrowthKind::SessionDone && w.contains(e.ts))
      {
        s.connects += e.count;
        s.total_seconds += e.duration_s;
      }
  return s;
}

std::optional<Ratio> Involvement::share() const noexcept
{
  if (registrations == 0)
    return std::nullopt;
  return Ratio{new_users_calling, registrations};
}

Involvement involvement(const std::vector<GrowthEvent>& events, Window w)
{
  Involvement inv;
  std::set<UserId> registrants, callers;
  for (const auto& e : events)
    {
      if (!w.contains(e.ts))
        continue;
      if (e.kind == GrowthKind::Register)
        {
          inv.registrations += e.count;
          if (e.aggregate())
            inv.new_users_calling += e.called;
          else
            registrants.insert(e.user);
        }
      else if (e.kind == GrowthKind::CallMade && !e.aggregate())
        callers.insert(e.user);
    }
  for (const auto& u : registrants)
    inv.new_users_calling += callers.contains(u);
  return inv;
}

MetricsWindow window_metrics(const std::vector<GrowthEvent>& events, Window w)
{
  MetricsWindow m;
  m.start = w.start;
  m.end = w.end;
  std::set<UserId> active;
  std::optional<Timestamp> last;
  for (const auto& e : events)
    {
      if (!w.contains(e.ts))
        continue;
      last = last ? std::max(*last, e.ts) : e.ts;
      if (marks_active(e.kind))
        {
          if (e.aggregate())
            m.U += e.kind == GrowthKind::ActiveDay ? e.count : 0;
          else
            active.insert(e.user);
        }
      else if (e.kind == GrowthKind::InviteSent)
        m.i += e.count;
      else if (e.kind == GrowthKind::InvitedRegister)
        m.IU += e.count;
    }
  m.U += active.size();
  if (last)
    {
      const DailyAudience daily(events);
      const std::int64_t day = to_epoch(day_start(*last));
      m.dU = daily.dU(day);
      m.dNU = daily.dNU(day);
      m.dU_prev = daily.dU(day - kDay);
    }
  return m;
}

Ratio share_and_funnel(const std::vector<GrowthEvent>& events, Window w, ShareMetric metric,
                       FunnelVariant variant)
{
  std::set<UserId> num_users, den_users;
  std::uint64_t num_anon = 0, den_anon = 0;
  auto add = [](const GrowthEvent& e, std::set<UserId>& users, std::uint64_t& anon) {
    if (e.aggregate())
      anon += e.count;
    else
      users.insert(e.user);
  };
  for (const auto& e : events)
    {
      switch (metric)
        {
        case ShareMetric::TeachingShare:
          if (!w.contains(e.ts))
            break;
          if (e.kind == GrowthKind::Taught)
            add(e, num_users, num_anon);
          if (marks_active(e.kind) && !(e.aggregate() && e.kind != GrowthKind::ActiveDay))
            add(e, den_users, den_anon);
          break;
        case ShareMetric::Funnel:
          if (!w.contains(e.ts) || e.kind != GrowthKind::Funnel || e.variant != variant)
            break;
          if (e.action == FunnelAction::Shown)
            add(e, den_users, den_anon);
          else if (e.action == FunnelAction::Invited)
            add(e, num_users, num_anon);
          break;
        case ShareMetric::Adoption:
          if (e.kind == GrowthKind::Register && e.ts < w.end)
            add(e, den_users, den_anon);
          else if (e.kind == GrowthKind::Purchased && w.contains(e.ts))
            add(e, num_users, num_anon);
          break;
        }
    }
  const std::uint64_t den = den_users.size() + den_anon;
  if (den == 0)
    fail(Errc::EmptyPopulation, "no users in the denominator population");
  return Ratio{num_users.size() + num_anon, den};
}

std::vector<SeriesRow> weekly_series(const std::vector<GrowthEvent>& events)
{
  std::map<std::int64_t, std::vector<GrowthEvent>> by_week;
  for (const auto& e : events)
    by_week[to_epoch(week_start(e.ts))].push_back(e);
  const DailyAudience daily(events);

  std::vector<SeriesRow> rows;
  for (const auto& [week, evs] : by_week)
    {
      const Window w{from_epoch(week), from_epoch(week + 7 * kDay)};
      SeriesRow row;
      row.m = window_metrics(evs, w);
      if (row.m.U == 0)
        continue;
      try
        {
          row.k_factor = k_factor(row.m);
        }
      catch (const Error&)
        {
        }
      double sum = 0;
      int n = 0;
      for (std::int64_t day = week; day < week + 7 * kDay; day += kDay)
        {
          const std::uint64_t prev = daily.dU(day - kDay);
          const std::uint64_t today = daily.dU(day);
          if (prev == 0 || today == 0)
            continue;
          sum += k_retention(today, daily.dNU(day), prev);
          ++n;
        }
      if (n > 0)
        row.k_retention = sum / n;
      if (row.k_factor && row.k_retention)
        row.k_growth = *row.k_factor + *row.k_retention;
      rows.push_back(row);
    }
  return rows;
}

PooledComparison compare_before_after(const std::vector<SeriesRow>& rows, Timestamp cutoff)
{
  PooledComparison c;
  double sum_b = 0, sum_a = 0;
  int n_b = 0, n_a = 0;
  for (const auto& r : rows)
    {
      const bool before = r.m.start < cutoff;
      Proportion& p = before ? c.before : c.after;
      p.successes += r.m.IU;
      p.trials += r.m.U;
      if (r.k_factor)
        {
          (before ? sum_b : sum_a) += *r.k_factor;
          ++(before ? n_b : n_a);
        }
    }
  if (n_b == 0 || n_a == 0)
    fail(Errc::EmptyWindow, "need weeks on both sides of the cutoff");
  c.mean_k_before = sum_b / n_b;
  c.mean_k_after = sum_a / n_a;
  c.p_value = significance(c.before, c.after);
  return c;
}

std::vector<Window> month_windows(const std::vector<GrowthEvent>& events)
{
  namespace chr = std::chrono;
  std::set<chr::year_month> months;
  for (const auto& e : events)
    {
      const chr::year_month_day ymd{chr::floor<chr::days>(e.ts)};
      months.insert(ymd.year() / ymd.month());
    }
  std::vector<Window> out;
  for (const auto& ym : months)
    {
      const chr::sys_days first{ym / chr::day{1}};
      const chr::sys_days next{(ym + chr::months{1}) / chr::day{1}};
      out.push_back(Window{first, next});
    }
  return out;
}

std::string series_csv(const std::vector<SeriesRow>& rows)
{
  auto opt = [](const std::optional<double>& v) { return v ? fixed(*v, 6) : std::string(); };
  std::ostringstream os;
  os << "start,end,U,i,IU,k_factor,k_retention,k_growth\n";
  for (const auto& r : rows)
    os << format_date(r.m.start) << ',' << format_date(r.m.end - Seconds{1}) << ',' << r.m.U
       << ',' << r.m.i << ',' << r.m.IU << ',' << opt(r.k_factor) << ',' << opt(r.k_retention)
       << ',' << opt(r.k_growth) << '\n';
  return os.str();
}

std::string connections_report(const std::vector<GrowthEvent>& events)
{
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %10s %10s %9s\n", "window", "connects", "minutes",
                "mean_min");
  os << line;
  auto row = [&](const std::string& label, const ConnectionStats& s) {
    const auto mean = s.mean_minutes();
    std::snprintf(line, sizeof line, "%-24s %10llu %10s %9s\n", label.c_str(),
                  static_cast<unsigned long long>(s.connects), minutes_text(s.total_minutes()).c_str(),
                  mean ? mean->sig4().c_str() : "-");
    os << line;
  };
  for (const Window& w : month_windows(events))
    {
      const auto s = connection_stats(events, w);
      if (s.connects > 0)
        row(format_date(w.start) + ".." + format_date(w.end - Seconds{1}), s);
    }
  row("total", connection_stats(events, Window::all()));
  return os.str();
}

std::string involvement_report(const std::vector<GrowthEvent>& events)
{
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %13s %17s %9s\n", "window", "registrations",
                "new_users_calling", "percent");
  os << line;
  for (const Window& w : month_windows(events))
    {
      const Involvement inv = involvement(events, w);
      if (inv.registrations == 0)
        continue;
      std::snprintf(line, sizeof line, "%-24s %13llu %17llu %9s\n",
                    (format_date(w.start) + ".." + format_date(w.end - Seconds{1})).c_str(),
                    static_cast<unsigned long long>(inv.registrations),
                    static_cast<unsigned long long>(inv.new_users_calling),
                    inv.share()->percent4().c_str());
      os << line;
    }
  return os.str();
}

std::string projection_report(const ProjectionSeries& s)
{
  std::ostringstream os;
  os << "step,audience\n";
  for (std::size_t n = 0; n < s.points.size(); ++n)
    os << n << ',' << fixed(s.points[n], 4) << '\n';
  return os.str();
}

} // namespace tandem

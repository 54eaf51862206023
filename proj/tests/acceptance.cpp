// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances and runtime budgets are pinned below.

#include "gen.hpp"
#include "support.hpp"
#include "tandem/analytics.hpp"
#include "tandem/datasets.hpp"
#include "tandem/ledger.hpp"
#include "tandem/platform.hpp"
#include "tandem/signaling.hpp"
#include "tandem/simulation.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace tandem;
namespace fs = std::filesystem;

namespace {

constexpr double kMeanTol = 0.01;            // minutes, table 2
constexpr double kProjectionTol = 1.0;       // users, final point
constexpr double kClosedFormRelTol = 1e-9;   // projection vs u0 * 1.05^n
constexpr double kOracleTol = 1e-6;          // p-value agreement
constexpr double kSignificanceBound = 0.001; // weekly fixture
constexpr int kKWindows = 10000;
constexpr int kReplaySequences = 100;
constexpr int kRoundTrips = 10000;
constexpr int kRelayFrames = 500;
constexpr double kGoldenBudgetS = 1.0;
constexpr double kConservationBudgetS = 30.0;

struct Outcome
{
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(const char* name, double budget_s, const std::function<Outcome()>& fn)
{
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try
    {
      o = fn();
    }
  catch (const std::exception& e)
    {
      o = {false, std::string("exception: ") + e.what()};
    }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s)
    {
      o.pass = false;
      o.detail += "; over the " + std::to_string(budget_s) + " s budget";
    }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.3f s", secs);
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << timing
            << "]\n";
  failures += !o.pass;
}

std::vector<GrowthEvent> load(const std::string& name)
{
  EventStore store;
  import_dataset(store, test::data_file(name));
  return growth_events(store);
}

std::string fmt(const char* f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Window month_window(Timestamp start)
{
  namespace chr = std::chrono;
  const chr::year_month_day ymd{chr::floor<chr::days>(start)};
  const chr::year_month next = chr::year_month{ymd.year(), ymd.month()} + chr::months{1};
  return Window{start, chr::sys_days{next / chr::day{1}}};
}

Outcome table2_golden()
{
  const auto events = load("table2.csv");
  const ConnectionStats all = connection_stats(events, Window::all());
  const ConnectionStats aug = connection_stats(events, month_window(parse_date("2014-08-01")));
  const double mean = all.mean_minutes()->value();
  const double mean_aug = aug.mean_minutes()->value();
  const double minutes = all.total_minutes().value();
  const bool ok = all.connects == 15842 && minutes == 203207.0
                  && std::fabs(mean - 12.83) <= kMeanTol && std::fabs(mean_aug - 14.36) <= kMeanTol
                  && mean_aug > 14.0;
  return {ok, std::to_string(all.connects) + " connects, " + fmt("%.0f", minutes)
                  + " minutes, mean " + fmt("%.4f", mean) + " min, August " + fmt("%.4f", mean_aug)
                  + " min"};
}

Outcome table1_golden()
{
  const CsvTable table = read_csv(test::data_file("table1.csv"));
  const auto events = load("table1.csv");
  std::size_t matched = 0;
  std::string mismatches;
  for (const auto& row : table.rows)
    {
      const Window w{parse_date(row.cells.at(0)), parse_date(row.cells.at(1)) + std::chrono::days{1}};
      const std::string expected =
          Ratio{table.count(row, 3, "table1.csv"), 100}.percent4(); // the published percent
      const auto share = involvement(events, w).share();
      const std::string got = share ? share->percent4() : "n/a";
      if (got == expected)
        ++matched;
      else
        mismatches += " " + row.cells.at(0).substr(0, 7) + " got " + got + " want " + expected;
    }
  return {matched == table.rows.size(),
          std::to_string(matched) + "/" + std::to_string(table.rows.size()) + " months match"
              + (mismatches.empty() ? "" : ";" + mismatches)};
}

Outcome projection()
{
  using boost::multiprecision::cpp_int;
  const ProjectionSeries s = project_growth(1000, 0.20, 0.85, 36);
  if (s.points.size() != 37)
    return {false, std::to_string(s.points.size()) + " points"};
  double worst = 0;
  cpp_int num = 1000, den = 1;
  for (std::size_t n = 0; n < s.points.size(); ++n)
    {
      const double exact = static_cast<double>(num) / static_cast<double>(den);
      worst = std::max(worst, std::fabs(s.points[n] - exact) / exact);
      num *= 21;
      den *= 20;
    }
  const double last = s.points.back();
  const bool ok = std::fabs(last - 5792.0) <= kProjectionTol && worst <= kClosedFormRelTol;
  return {ok, "final " + fmt("%.4f", last) + ", worst relative error " + fmt("%.3g", worst)};
}

Outcome k_identities()
{
  std::mt19937_64 rng(20140505);
  int within = 0;
  for (int k = 0; k < kKWindows; ++k)
    {
      MetricsWindow w;
      w.U = rng() % 1000000 + 1;
      w.i = rng() % 1000000 + 1;
      w.IU = rng() % (w.i + 1);
      const double direct = static_cast<double>(w.IU) / static_cast<double>(w.U);
      const double product = k_factor(w);
      const double ulp =
          std::fabs(std::nextafter(direct, product > direct ? INFINITY : -INFINITY) - direct);
      within += std::fabs(product - direct) <= ulp;
    }
  const bool growth = k_growth(0.2, 0.9) == 1.1;
  // Nine of ten users come back the next day.
  const bool retention = k_retention(9, 0, 10) == 0.9 && k_retention(90, 0, 100) == 0.9;
  return {within == kKWindows && growth && retention,
          std::to_string(within) + "/" + std::to_string(kKWindows)
              + " windows within 1 ulp, k_growth(0.2, 0.9) == 1.1: " + (growth ? "yes" : "no")
              + ", k_retention 9/10 == 0.9: " + (retention ? "yes" : "no")};
}

// Pooled two-proportion z statistic with the normal tail integrated by
// Simpson's rule; shares no code with the chi-square route.
double z_test_oracle(double x1, double n1, double x2, double n2)
{
  const double p1 = x1 / n1, p2 = x2 / n2, p = (x1 + x2) / (n1 + n2);
  const double z = std::fabs(p1 - p2) / std::sqrt(p * (1 - p) * (1 / n1 + 1 / n2));
  const int steps = 200000;
  const double hi = z + 40.0, h = (hi - z) / steps;
  auto phi = [](double t) { return std::exp(-t * t / 2) / std::sqrt(2 * M_PI); };
  double sum = phi(z) + phi(hi);
  for (int k = 1; k < steps; ++k)
    sum += (k % 2 ? 4 : 2) * phi(z + k * h);
  return 2 * sum * h / 3;
}

Outcome significance_check()
{
  const auto rows = weekly_series(load("weekly_k.csv"));
  const PooledComparison c = compare_before_after(rows, parse_date("2014-07-28"));
  const double oracle = z_test_oracle(double(c.before.successes), double(c.before.trials),
                                      double(c.after.successes), double(c.after.trials));
  const double same = significance({30, 1000}, {30, 1000});
  const double mid = significance({22, 1000}, {38, 1000});
  const double mid_oracle = z_test_oracle(22, 1000, 38, 1000);
  const double gap = std::max(std::fabs(c.p_value - oracle), std::fabs(mid - mid_oracle));
  const bool ok = c.p_value < kSignificanceBound && c.mean_k_after > c.mean_k_before
                  && same == 1.0 && gap < kOracleTol;
  return {ok, "weekly means " + fmt("%.4f", c.mean_k_before) + " -> " + fmt("%.4f", c.mean_k_after)
                  + ", p = " + fmt("%.3g", c.p_value) + ", identical p = " + fmt("%.1f", same)
                  + ", oracle gap " + fmt("%.2g", gap)};
}

SimConfig fixed_sim()
{
  SimConfig cfg;
  cfg.seed = 42;
  cfg.bot_count = 50;
  cfg.days = 30;
  return cfg;
}

Outcome conservation()
{
  EventStore store;
  const SimSummary s = run_simulation(fixed_sim(), store);
  const auto ledger = Ledger::replay(store);
  std::map<AccountId, std::int64_t> running;
  std::map<std::string, std::int64_t> per_session;
  std::int64_t lowest = 0;
  for (const LedgerEntry& e : ledger->journal())
    {
      lowest = std::min(lowest, running[e.account] += e.delta.count());
      if (e.reason == EntryReason::LearnSpend || e.reason == EntryReason::TeachEarn)
        per_session[e.ref.value_or("")] += e.delta.count();
    }
  std::size_t unbalanced = 0;
  for (const auto& [ref, sum] : per_session)
    unbalanced += sum != 0;
  const bool ok = s.total_balance == s.total_minted && lowest >= 0 && unbalanced == 0
                  && s.sessions > 0 && ledger->total_balance() == s.total_balance;
  return {ok, std::to_string(s.sessions) + " sessions, balance " + std::to_string(s.total_balance.count())
                  + " s == minted " + std::to_string(s.total_minted.count()) + " s, lowest running balance "
                  + std::to_string(lowest) + ", " + std::to_string(unbalanced) + " unbalanced transfers"};
}

std::string log_bytes(const fs::path& dir)
{
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const fs::path& f : files)
    {
      std::ifstream in(f, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      all += f.filename().string() + '\n' + ss.str();
    }
  return all;
}

Outcome determinism()
{
  test::TempDir a, b;
  SimConfig cfg = fixed_sim();
  cfg.days = 14;
  {
    EventStore sa(a.path()), sb(b.path());
    run_simulation(cfg, sa);
    run_simulation(cfg, sb);
  }
  const std::string la = log_bytes(a.path()), lb = log_bytes(b.path());
  return {!la.empty() && la == lb,
          std::to_string(la.size()) + " vs " + std::to_string(lb.size()) + " log bytes, "
              + (la == lb ? "identical" : "different")};
}

Outcome replay()
{
  std::mt19937_64 rng(7);
  int equal = 0;
  std::uint64_t sessions = 0;
  for (int n = 0; n < kReplaySequences; ++n)
    {
      SimConfig cfg;
      cfg.seed = rng();
      cfg.bot_count = 4 + static_cast<std::uint32_t>(rng() % 12);
      cfg.days = 2 + static_cast<std::uint32_t>(rng() % 3);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      cfg.behavior.accept_probability = 0.2 + 0.8 * u(rng);
      cfg.behavior.invite_propensity = 1 + 6 * u(rng);
      cfg.behavior.daily_return_probability = u(rng);
      cfg.behavior.teach_willingness = 0.3 + 0.7 * u(rng);
      cfg.behavior.session_median_minutes = 2 + 30 * u(rng);
      cfg.behavior.session_dispersion = u(rng);
      cfg.behavior.friend_dialog_probability = u(rng);
      cfg.behavior.friend_conversion = u(rng);
      cfg.behavior.payers = rng() % 2 == 0;
      EventStore store;
      const SimSummary s = run_simulation(cfg, store);
      sessions += s.sessions;
      equal += Platform::replay_state_hash(store) == s.state_hash;
    }
  return {equal == kReplaySequences,
          std::to_string(equal) + "/" + std::to_string(kReplaySequences)
              + " replayed hashes equal the live hash (" + std::to_string(sessions) + " sessions)"};
}

Outcome protocol()
{
  std::mt19937_64 rng(1399248000);
  int identical = 0;
  for (int n = 0; n < kRoundTrips; ++n)
    {
      const Direction dir = n % 2 ? Direction::ToServer : Direction::ToClient;
      const Envelope e = test::random_envelope(rng, dir);
      const std::string frame = encode(e);
      const Envelope back = decode(frame, dir);
      identical += back == e && encode(back) == frame;
    }

  // Two simulated clients in a live session; the student streams RTC frames.
  EventStore store;
  Platform platform({}, store, LessonLibrary::builtin());
  UserProfile t{"t", "es", "en"}, s{"s", "en", "es"};
  platform.register_user(t, "tok-t", test::at(0));
  platform.register_user(s, "tok-s", test::at(0));
  SignalingHub hub(platform);
  const ConnectionId ct = hub.connect(test::at(0)), cs = hub.connect(test::at(0));
  std::uint64_t st = 0, ss = 0;
  auto say = [&](ConnectionId c, std::uint64_t& seq, MessageType type, json p) {
    Envelope e;
    e.type = type;
    e.seq = ++seq;
    e.payload = std::move(p);
    return hub.receive(c, encode(e), test::at(1));
  };
  say(ct, st, MessageType::Auth, {{"token", "tok-t"}});
  say(cs, ss, MessageType::Auth, {{"token", "tok-s"}});
  say(ct, st, MessageType::Presence, {{"status", "ONLINE"}, {"roles", {"TEACHER"}}});
  say(cs, ss, MessageType::Presence, {{"status", "ONLINE"}, {"roles", {"STUDENT"}}});
  const Effects inv =
      say(cs, ss, MessageType::Invite, {{"to", "t"}, {"role", "TEACHER"}, {"language", "es"}, {"level", "A1"}});
  std::uint64_t inv_id = 0;
  for (const Outbound& o : inv.frames)
    if (o.to == ct)
      inv_id = decode(o.frame, Direction::ToClient).payload.at("invitation_id");
  say(ct, st, MessageType::InviteResult, {{"invitation_id", inv_id}, {"decision", "ACCEPT"}});

  std::vector<std::string> sent, got;
  for (int n = 0; n < kRelayFrames; ++n)
    {
      // Hand-built payload bytes: odd spacing and key order must survive.
      const std::string payload = "{ \"sdp\" : " + json(test::random_text(rng, 40)).dump()
                                  + ", \"n\":" + std::to_string(n) + ",\"x\":[1, 2.50,\"\\u00e9\"] }";
      static const char* const kinds[] = {"RTC_OFFER", "RTC_ANSWER", "RTC_ICE"};
      const std::string frame = std::string("{\"v\":1,\"type\":\"") + kinds[n % 3]
                                + "\",\"seq\":" + std::to_string(++ss) + ",\"payload\":" + payload + "}";
      sent.push_back(payload);
      for (const Outbound& o : hub.receive(cs, frame, test::at(2)).frames)
        if (o.to == ct)
          got.push_back(std::string(*member_span(o.frame, "payload")));
    }
  const bool relay_ok = got == sent;
  return {identical == kRoundTrips && relay_ok,
          std::to_string(identical) + "/" + std::to_string(kRoundTrips) + " round trips identical, "
              + std::to_string(got.size()) + "/" + std::to_string(sent.size())
              + " relayed payloads byte-identical in order: " + (relay_ok ? "yes" : "no")};
}

} // namespace

int main()
{
  run("table2_golden", kGoldenBudgetS, table2_golden);
  run("table1_golden", kGoldenBudgetS, table1_golden);
  run("growth_projection", kGoldenBudgetS, projection);
  run("k_metric_identities", 0, k_identities);
  run("significance", 0, significance_check);
  run("ledger_conservation", kConservationBudgetS, conservation);
  run("determinism", 0, determinism);
  run("replay_equivalence", 0, replay);
  run("protocol_round_trip_and_relay", 0, protocol);
  std::cout << (failures == 0 ? "all criteria pass\n"
                              : std::to_string(failures) + " criteria fail\n");
  return failures == 0 ? 0 : 1;
}

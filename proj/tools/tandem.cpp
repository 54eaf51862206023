#include "tandem/analytics.hpp"
#include "tandem/datasets.hpp"
#include "tandem/error.hpp"
#include "tandem/growth_event.hpp"
#include "tandem/ledger.hpp"
#include "tandem/platform.hpp"
#include "tandem/server.hpp"
#include "tandem/simulation.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <pthread.h>
#include <unistd.h>
#include <thread>

using namespace tandem;
namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 1;

std::string iso_time(Timestamp t)
{
  const std::time_t tt = to_epoch(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// A usage problem detected after parsing; exits with the usage code.
struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

LessonLibrary lessons_from(const std::string& dir)
{
  if (dir.empty())
    return LessonLibrary::builtin();
  LessonLibrary lib;
  if (lib.load_dir(dir) == 0)
    fail(Errc::NoLesson, "no lesson files in " + dir);
  return lib;
}

// A CSV file, a directory of CSV files, or an event-log directory.
std::vector<GrowthEvent> load_events(const std::string& data)
{
  const fs::path path(data);
  if (!fs::exists(path))
    fail(Errc::StorageFailure, "no such file or directory: " + data);
  EventStore mem;
  if (fs::is_regular_file(path))
    {
      import_dataset(mem, path);
      return growth_events(mem);
    }
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(path))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      csvs.push_back(entry.path());
  if (csvs.empty())
    {
      const EventStore store(path);
      return growth_events(store);
    }
  std::sort(csvs.begin(), csvs.end());
  for (const fs::path& csv : csvs)
    import_dataset(mem, csv);
  return growth_events(mem);
}

int cmd_serve(const std::string& listen, const std::string& data_dir,
              const std::string& lessons_dir)
{
  const auto [host, port] = parse_listen(listen);
  // Signals are taken by a dedicated thread so stop() runs outside a handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  EventStore store(data_dir);
  Platform platform({}, store, lessons_from(lessons_dir));
  const std::size_t records = platform.restore();
  SignalingHub hub(platform);
  ServerOptions opts;
  opts.host = host;
  opts.port = port;
  WsServer server(hub, opts);
  std::cerr << "restored " << records << " records; listening on ws://" << host << ":"
            << server.port() << "\n";

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  try
    {
      server.run();
    }
  catch (...)
    {
      // Release the waiter with the signal it is blocked on.
      kill(getpid(), SIGTERM);
      waiter.join();
      throw;
    }
  waiter.join();
  std::cerr << "stopped\n";
  return 0;
}

int cmd_register(const std::string& data_dir, const std::string& user,
                 const std::string& native, const std::string& learning,
                 const std::string& token, const std::string& invited_by)
{
  EventStore store(data_dir);
  Platform platform({}, store, LessonLibrary::builtin());
  platform.restore();
  UserProfile p;
  p.id = user;
  p.native_language = native;
  p.learning_language = learning;
  if (!invited_by.empty())
    p.invited_by = invited_by;
  const auto now = std::chrono::floor<Seconds>(std::chrono::system_clock::now());
  const Account a = platform.register_user(p, token, now);
  std::cout << user << " account " << raw(a.id) << " balance " << a.balance.count() << "\n";
  return 0;
}

int cmd_simulate(SimConfig cfg, const std::string& data_dir)
{
  std::optional<EventStore> store;
  if (data_dir.empty())
    store.emplace();
  else
    store.emplace(fs::path(data_dir));
  const SimSummary s = run_simulation(cfg, *store);
  std::cout << format_summary(s);
  return 0;
}

int cmd_metrics(const std::string& data, const std::string& report, const std::string& cutoff)
{
  const std::vector<GrowthEvent> events = load_events(data);
  if (report == "connections")
    std::cout << connections_report(events);
  else if (report == "involvement")
    std::cout << involvement_report(events);
  else if (report == "kfactor")
    std::cout << series_csv(weekly_series(events));
  else
    {
      if (cutoff.empty())
        throw UsageError("--report significance needs --cutoff YYYY-MM-DD");
      const auto rows = weekly_series(events);
      const PooledComparison c = compare_before_after(rows, parse_date(cutoff));
      char buf[160];
      std::snprintf(buf, sizeof buf, "before: %llu/%llu mean_k %.6f\n",
                    static_cast<unsigned long long>(c.before.successes),
                    static_cast<unsigned long long>(c.before.trials), c.mean_k_before);
      std::cout << buf;
      std::snprintf(buf, sizeof buf, "after: %llu/%llu mean_k %.6f\n",
                    static_cast<unsigned long long>(c.after.successes),
                    static_cast<unsigned long long>(c.after.trials), c.mean_k_after);
      std::cout << buf;
      std::snprintf(buf, sizeof buf, "p_value: %.6g\nsignificant_at_0.05: %s\n", c.p_value,
                    c.p_value < 0.05 ? "yes" : "no");
      std::cout << buf;
    }
  return 0;
}

int cmd_import(const std::string& data_dir, const std::vector<std::string>& files)
{
  EventStore store(data_dir);
  for (const std::string& f : files)
    {
      const std::size_t rows = import_dataset(store, f);
      std::cout << f << ": " << rows << " rows\n";
    }
  return 0;
}

int cmd_balance(const std::string& data_dir, const std::string& user)
{
  const EventStore store(data_dir);
  const auto ledger = Ledger::replay(store);
  const auto acct = ledger->find_account(user);
  if (!acct)
    fail(Errc::UnknownAccount, user);
  std::cout << ledger->balance(*acct).count() << "\n";
  return 0;
}

int cmd_journal(const std::string& data_dir, const std::string& user)
{
  const EventStore store(data_dir);
  const auto ledger = Ledger::replay(store);
  std::vector<LedgerEntry> entries;
  if (user.empty())
    entries = ledger->journal();
  else
    {
      const auto acct = ledger->find_account(user);
      if (!acct)
        fail(Errc::UnknownAccount, user);
      entries = ledger->journal(*acct);
    }
  for (const LedgerEntry& e : entries)
    std::cout << raw(e.id) << ' ' << iso_time(e.ts) << ' ' << raw(e.account) << ' '
              << to_string(e.reason) << ' ' << (e.delta.count() > 0 ? "+" : "")
              << e.delta.count() << ' ' << e.ref.value_or("-") << "\n";
  return 0;
}

int cmd_who(const std::string& data_dir)
{
  const EventStore store(data_dir);
  const auto ledger = Ledger::replay(store);
  struct Row
  {
    std::string native, learning, status = "OFFLINE";
  };
  std::map<UserId, Row> users;
  store.for_each(0, [&](const StoredRecord& r) {
    if (r.stream != Stream::ProtocolAudit)
      return;
    const std::string op = r.body.value("op", "");
    const UserId user = r.body.value("user", "");
    if (op == "register")
      users[user] = Row{r.body.value("native_language", ""),
                        r.body.value("learning_language", ""), "OFFLINE"};
    else if (op == "presence" && users.contains(user))
      users[user].status = r.body.value("status", "OFFLINE");
  });
  for (const auto& [id, row] : users)
    {
      const auto acct = ledger->find_account(id);
      const long long bal = acct ? ledger->balance(*acct).count() : 0;
      std::cout << id << ' ' << row.native << "->" << row.learning << ' ' << row.status << ' '
                << bal << "\n";
    }
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Time-bank language exchange: server, simulator and growth analytics"};
  app.require_subcommand(1);

  std::string listen = "127.0.0.1:8443";
  std::string data_dir = "tandem-data";
  std::string lessons_dir;
  auto* serve = app.add_subcommand("serve", "Run the WebSocket signaling server");
  serve->add_option("--listen", listen, "host:port to bind")->capture_default_str();
  serve->add_option("--data-dir", data_dir, "Event log directory")->capture_default_str();
  serve->add_option("--lessons", lessons_dir, "Directory of lesson JSON files");

  std::string user, native, learning, token, invited_by;
  auto* reg = app.add_subcommand("register", "Register a user and open their account");
  reg->add_option("--data-dir", data_dir, "Event log directory")->capture_default_str();
  reg->add_option("--user", user)->required();
  reg->add_option("--native", native)->required();
  reg->add_option("--learning", learning)->required();
  reg->add_option("--token", token, "Login token the client will send")->required();
  reg->add_option("--invited-by", invited_by);

  std::uint64_t seed = 1;
  std::uint32_t bots = 50, days = 30;
  std::string config_file, sim_dir;
  auto* sim = app.add_subcommand("simulate", "Run the bot population on a virtual clock");
  auto* seed_opt = sim->add_option("--seed", seed)->capture_default_str();
  auto* bots_opt = sim->add_option("--bots", bots)->capture_default_str();
  auto* days_opt = sim->add_option("--days", days)->capture_default_str();
  sim->add_option("--config", config_file, "JSON simulation config")->check(CLI::ExistingFile);
  sim->add_option("--data-dir", sim_dir, "Write the log here (must be empty)");

  std::string data, report, cutoff;
  auto* metrics = app.add_subcommand("metrics", "Growth reports from a dataset or event log");
  metrics->add_option("--data", data, "CSV file, directory of CSVs, or event log")->required();
  metrics->add_option("--report", report)
      ->required()
      ->check(CLI::IsMember({"connections", "involvement", "kfactor", "significance"}));
  metrics->add_option("--cutoff", cutoff, "First week of the after period (significance)");

  double u0 = 0, k = 0, r = 0;
  std::uint64_t steps = 0;
  auto* project = app.add_subcommand("project", "Audience projection a(n+1) = a(n)(k + r)");
  project->add_option("--u0", u0)->required()->check(CLI::NonNegativeNumber);
  project->add_option("--k", k)->required();
  project->add_option("--r", r)->required();
  project->add_option("--steps", steps)->required();

  std::vector<std::string> files;
  auto* imp = app.add_subcommand("import", "Append bundled CSV datasets to an event log");
  imp->add_option("--data-dir", data_dir, "Event log directory")->capture_default_str();
  imp->add_option("files", files)->required()->check(CLI::ExistingFile);

  auto* balance = app.add_subcommand("balance", "Print a user's balance in seconds");
  balance->add_option("--data-dir", data_dir)->capture_default_str();
  balance->add_option("--user", user)->required();

  auto* journal = app.add_subcommand("journal", "Print ledger entries");
  journal->add_option("--data-dir", data_dir)->capture_default_str();
  journal->add_option("--user", user, "Only this user's account");

  auto* who = app.add_subcommand("who", "List users, last presence and balance");
  who->add_option("--data-dir", data_dir)->capture_default_str();

  try
    {
      app.parse(argc, argv);
    }
  catch (const CLI::ParseError& e)
    {
      const int code = app.exit(e);
      return code == 0 ? 0 : kUsage;
    }

  try
    {
      if (*serve)
        return cmd_serve(listen, data_dir, lessons_dir);
      if (*reg)
        return cmd_register(data_dir, user, native, learning, token, invited_by);
      if (*sim)
        {
          SimConfig cfg;
          if (!config_file.empty())
            {
              std::ifstream in(config_file);
              json j;
              try
                {
                  j = json::parse(in);
                }
              catch (const json::exception& e)
                {
                  fail(Errc::ConfigInvalid, config_file + ": " + e.what());
                }
              cfg = sim_config_from_json(j);
            }
          // Flags given explicitly override the file.
          if (seed_opt->count() || config_file.empty())
            cfg.seed = seed;
          if (bots_opt->count() || config_file.empty())
            cfg.bot_count = bots;
          if (days_opt->count() || config_file.empty())
            cfg.days = days;
          cfg.validate();
          return cmd_simulate(cfg, sim_dir);
        }
      if (*metrics)
        return cmd_metrics(data, report, cutoff);
      if (*project)
        {
          std::cout << projection_report(project_growth(u0, k, r, steps));
          return 0;
        }
      if (*imp)
        return cmd_import(data_dir, files);
      if (*balance)
        return cmd_balance(data_dir, user);
      if (*journal)
        return cmd_journal(data_dir, user);
      if (*who)
        return cmd_who(data_dir);
    }
  catch (const UsageError& e)
    {
      std::cerr << "usage error: " << e.what() << "\n";
      return kUsage;
    }
  catch (const Error& e)
    {
      std::cerr << "error: " << code_name(e.code()) << ": " << e.detail() << "\n";
      return e.code() == Errc::ConfigInvalid ? kUsage : kRuntime;
    }
  catch (const std::exception& e)
    {
      std::cerr << "error: " << e.what() << "\n";
      return kRuntime;
    }
  return kUsage;
}

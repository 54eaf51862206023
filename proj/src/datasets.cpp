#include "tandem/datasets.hpp"

#include "tandem/error.hpp"
#include "tandem/growth_event.hpp"

#include <charconv>
#include <fstream>

namespace tandem {

namespace {

const std::vector<std::string> kTable1Header{"month_start", "month_end", "new_users_calling",
                                             "percent_calling", "registrations"};
const std::vector<std::string> kTable2Header{"month_start", "month_end", "connects", "minutes"};
const std::vector<std::string> kWeeklyHeader{"week_start", "active_users", "invites_sent",
                                             "invited_registrations"};

std::vector<std::string> split(std::string_view line)
{
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true)
    {
      const std::size_t comma = line.find(',', pos);
      std::string_view cell = line.substr(pos, comma == std::string_view::npos ? line.npos
                                                                               : comma - pos);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
        cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
        cell.remove_suffix(1);
      out.emplace_back(cell);
      if (comma == std::string_view::npos)
        break;
      pos = comma + 1;
    }
  return out;
}

GrowthEvent cohort(GrowthKind kind, Timestamp ts, std::uint64_t count)
{
  GrowthEvent e;
  e.ts = ts;
  e.kind = kind;
  e.count = count;
  return e;
}

} // namespace

CsvTable read_csv(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    fail(Errc::ParseError, path.string() + ": cannot open");
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line))
    {
      ++lineno;
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.empty() || line.front() == '#')
        continue;
      auto cells = split(line);
      if (table.header.empty())
        {
          table.header = std::move(cells);
          continue;
        }
      if (cells.size() != table.header.size())
        fail(Errc::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected "
                                   + std::to_string(table.header.size()) + " fields, got "
                                   + std::to_string(cells.size()));
      table.rows.push_back({lineno, std::move(cells)});
    }
  if (table.header.empty())
    fail(Errc::ParseError, path.string() + ": missing header");
  return table;
}

std::uint64_t CsvTable::count(const Row& row, std::size_t col, const std::string& file) const
{
  const std::string& cell = row.cells.at(col);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || p != cell.data() + cell.size())
    fail(Errc::ParseError, file + ":" + std::to_string(row.line) + ": '" + header.at(col)
                               + "' is not a non-negative integer: '" + cell + "'");
  return v;
}

Timestamp CsvTable::date(const Row& row, std::size_t col, const std::string& file) const
{
  try
    {
      return parse_date(row.cells.at(col));
    }
  catch (const Error&)
    {
      fail(Errc::ParseError, file + ":" + std::to_string(row.line) + ": '" + header.at(col)
                                 + "' is not a YYYY-MM-DD date: '" + row.cells.at(col) + "'");
    }
}

DatasetKind detect_dataset(const CsvTable& table)
{
  if (table.header == kTable1Header)
    return DatasetKind::Involvement;
  if (table.header == kTable2Header)
    return DatasetKind::Connections;
  if (table.header == kWeeklyHeader)
    return DatasetKind::WeeklyK;
  fail(Errc::ParseError, "unrecognized dataset header");
}

std::size_t import_dataset(EventStore& store, const std::filesystem::path& path, Stream stream)
{
  const CsvTable table = read_csv(path);
  const std::string file = path.filename().string();
  const DatasetKind kind = detect_dataset(table);

  // Validate every row before appending anything so a bad file is all-or-nothing.
  std::vector<std::pair<Timestamp, GrowthEvent>> events;
  for (const auto& row : table.rows)
    {
      const Timestamp start = table.date(row, 0, file);
      switch (kind)
        {
        case DatasetKind::Involvement:
          {
            table.date(row, 1, file);
            GrowthEvent e;
            e.ts = start;
            e.kind = GrowthKind::Register;
            e.called = table.count(row, 2, file);
            table.count(row, 3, file);
            e.count = table.count(row, 4, file);
            if (e.called > e.count)
              fail(Errc::ParseError, file + ":" + std::to_string(row.line)
                                         + ": more callers than registrations");
            events.emplace_back(start, e);
            break;
          }
        case DatasetKind::Connections:
          {
            table.date(row, 1, file);
            GrowthEvent e;
            e.ts = start;
            e.kind = GrowthKind::SessionDone;
            e.count = table.count(row, 2, file);
            e.duration_s = static_cast<std::int64_t>(table.count(row, 3, file)) * 60;
            events.emplace_back(start, e);
            break;
          }
        case DatasetKind::WeeklyK:
          {
            const GrowthEvent active = cohort(GrowthKind::ActiveDay, start, table.count(row, 1, file));
            const GrowthEvent sent = cohort(GrowthKind::InviteSent, start, table.count(row, 2, file));
            const GrowthEvent joined
                = cohort(GrowthKind::InvitedRegister, start, table.count(row, 3, file));
            if (joined.count > sent.count)
              fail(Errc::ParseError, file + ":" + std::to_string(row.line)
                                         + ": more invited registrations than invitations");
            events.emplace_back(start, active);
            events.emplace_back(start, sent);
            events.emplace_back(start, joined);
            break;
          }
        }
    }
  for (const auto& [ts, e] : events)
    store.append(stream, ts, to_json(e));
  return table.rows.size();
}

} // namespace tandem

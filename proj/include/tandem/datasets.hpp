#pragma once

#include "tandem/event_store.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tandem {

/// A comma separated file with a header row. Blank lines and lines starting
/// with '#' are skipped; cells are trimmed.
struct CsvTable
{
  struct Row
  {
    std::size_t line = 0;
    std::vector<std::string> cells;
  };

  std::vector<std::string> header;
  std::vector<Row> rows;

  std::uint64_t count(const Row& row, std::size_t col, const std::string& file) const;
  Timestamp date(const Row& row, std::size_t col, const std::string& file) const;
};

CsvTable read_csv(const std::filesystem::path& path);

enum class DatasetKind {
  Involvement, // table1.csv: monthly new callers over registrations
  Connections, // table2.csv: monthly successful connects and minutes
  WeeklyK,     // weekly_k.csv: weekly active users, invitations, invited joins
};

DatasetKind detect_dataset(const CsvTable& table);

/// Loads one bundled dataset into `store` as growth records and returns the
/// number of data rows. A table1 or table2 row becomes a single monthly
/// aggregate record; a weekly row becomes three (active, sent, joined).
/// Throws ParseError naming the offending line; nothing is appended then.
std::size_t import_dataset(EventStore& store, const std::filesystem::path& path,
                           Stream stream = Stream::Growth);

} // namespace tandem

#include "doctest.h"

#include "support.hpp"
#include "tandem/datasets.hpp"
#include "tandem/error.hpp"
#include "tandem/event_store.hpp"
#include "tandem/growth_event.hpp"

#include <fstream>

using namespace tandem;
using tandem::test::at;
using tandem::test::TempDir;

namespace {

json body(int n) { return json{{"n", n}}; }

} // namespace

TEST_CASE("append assigns dense offsets from zero")
{
  EventStore store;
  CHECK(store.append(Stream::Growth, at(0), body(0)) == 0);
  CHECK(store.append(Stream::Ledger, at(1), body(1)) == 1);
  CHECK(store.size() == 2);
}

TEST_CASE("replay returns records in offset order and rejects offsets past the end")
{
  EventStore store;
  for (int n = 0; n < 5; ++n)
    store.append(Stream::Session, at(n), body(n));
  auto all = store.replay(0);
  REQUIRE(all.size() == 5);
  for (int n = 0; n < 5; ++n)
    {
      CHECK(all[n].offset == static_cast<std::uint64_t>(n));
      CHECK(all[n].body == body(n));
    }
  CHECK(store.replay(3).size() == 2);
  CHECK(store.replay(5).empty());
  CHECK_THROWS_AS(store.replay(6), Error);
  try
    {
      store.replay(7);
    }
  catch (const Error& e)
    {
      CHECK(e.code() == Errc::OffsetOutOfRange);
    }
}

TEST_CASE("lines carry a checksum that detects tampering")
{
  StoredRecord rec{4, at(10), Stream::Ledger, json{{"op", "x"}}};
  const std::string line = EventStore::encode_line(rec);
  CHECK(line.rfind("{\"crc\":\"", 0) == 0);
  auto back = EventStore::decode_line(line);
  REQUIRE(back);
  CHECK(*back == rec);

  std::string tampered = line;
  tampered[tampered.find("\"x\"") + 1] = 'y';
  CHECK_FALSE(EventStore::decode_line(tampered));
  CHECK_FALSE(EventStore::decode_line(line.substr(0, line.size() - 3)));
}

TEST_CASE("reopen continues from the persisted maximum offset")
{
  TempDir dir;
  std::string digest;
  {
    EventStore store(dir.path());
    store.append(Stream::Growth, at(0), body(0));
    store.append(Stream::Growth, at(1), body(1));
    digest = store.digest();
  }
  EventStore store(dir.path());
  CHECK(store.size() == 2);
  CHECK(store.digest() == digest);
  CHECK(store.append(Stream::Growth, at(2), body(2)) == 2);
}

TEST_CASE("memory and file stores produce identical digests")
{
  TempDir dir;
  EventStore mem;
  EventStore file(dir.path());
  for (int n = 0; n < 20; ++n)
    {
      mem.append(Stream::Ledger, at(n), body(n));
      file.append(Stream::Ledger, at(n), body(n));
    }
  CHECK(mem.digest() == file.digest());
}

TEST_CASE("a torn final record is truncated on open and earlier records survive")
{
  TempDir dir;
  {
    EventStore store(dir.path());
    for (int n = 0; n < 3; ++n)
      store.append(Stream::Growth, at(n), body(n));
  }
  const auto seg = dir.path() / "events-000000.ndjson";
  const auto intact = std::filesystem::file_size(seg);

  SUBCASE("partial line without newline")
  {
    std::ofstream(seg, std::ios::app) << "{\"crc\":\"0000";
  }
  SUBCASE("complete line with bad checksum")
  {
    std::ofstream(seg, std::ios::app)
        << "{\"crc\":\"00000000\",\"body\":{},\"off\":3,\"stream\":\"GROWTH\",\"ts\":1}\n";
  }

  EventStore store(dir.path());
  CHECK(store.size() == 3);
  CHECK(store.recovered_bytes() > 0);
  CHECK(std::filesystem::file_size(seg) == intact);
  CHECK(store.append(Stream::Growth, at(9), body(9)) == 3);
}

TEST_CASE("corruption before the tail is a storage failure")
{
  TempDir dir;
  {
    EventStore store(dir.path());
    for (int n = 0; n < 3; ++n)
      store.append(Stream::Growth, at(n), body(n));
  }
  const auto seg = dir.path() / "events-000000.ndjson";
  std::string text;
  {
    std::ifstream in(seg);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  text[text.find("\"n\":0") + 4] = '7';
  std::ofstream(seg, std::ios::trunc) << text;
  CHECK_THROWS_AS(EventStore(dir.path()), Error);
}

TEST_CASE("segments rotate by size and reopen across all of them")
{
  TempDir dir;
  StoreOptions opts;
  opts.rotate_bytes = 300;
  {
    EventStore store(dir.path(), opts);
    for (int n = 0; n < 10; ++n)
      store.append(Stream::Growth, at(n), body(n));
    CHECK(store.segment_count() > 1);
  }
  EventStore store(dir.path(), opts);
  CHECK(store.size() == 10);
  auto all = store.replay(0);
  for (int n = 0; n < 10; ++n)
    CHECK(all[n].body == body(n));
}

TEST_CASE("bundled monthly tables import as nine records each")
{
  EventStore store;
  CHECK(import_dataset(store, test::data_file("table2.csv")) == 9);
  CHECK(store.size() == 9);
  CHECK(import_dataset(store, test::data_file("table1.csv")) == 9);
  CHECK(store.size() == 18);

  auto events = growth_events(store);
  CHECK(events[0].kind == GrowthKind::SessionDone);
  CHECK(events[0].count == 19);
  CHECK(events[0].duration_s == 151 * 60);
  CHECK(format_date(events[0].ts) == "2013-12-01");
  CHECK(events[9 + 5].kind == GrowthKind::Register);
  CHECK(events[9 + 5].called == 1026);
}

TEST_CASE("malformed dataset rows name the line and append nothing")
{
  TempDir dir;
  const auto path = dir.path() / "bad.csv";
  std::ofstream(path) << "month_start,month_end,connects,minutes\n"
                      << "2014-01-01,2014-01-31,10,100\n"
                      << "2014-02-01,2014-02-28,ten,100\n";
  EventStore store;
  try
    {
      import_dataset(store, path);
      FAIL("expected ParseError");
    }
  catch (const Error& e)
    {
      CHECK(e.code() == Errc::ParseError);
      CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
    }
  CHECK(store.size() == 0);
}

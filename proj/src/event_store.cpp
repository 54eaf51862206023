#include "tandem/event_store.hpp"

#include "tandem/digest.hpp"
#include "tandem/error.hpp"

#include <zlib.h>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

namespace tandem {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCrcPrefix = "{\"crc\":\"";
// {"crc":"xxxxxxxx",
constexpr std::size_t kCrcHeader = kCrcPrefix.size() + 8 + 2;

std::uint32_t crc_of(std::string_view bytes)
{
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size())));
}

std::string canonical_payload(const StoredRecord& rec)
{
  json j;
  j["body"] = rec.body;
  j["off"] = rec.offset;
  j["stream"] = to_string(rec.stream);
  j["ts"] = to_epoch(rec.ts);
  return j.dump();
}

void write_all(int fd, std::string_view bytes)
{
  while (!bytes.empty())
    {
      const ssize_t n = ::write(fd, bytes.data(), bytes.size());
      if (n < 0)
        {
          if (errno == EINTR)
            continue;
          fail(Errc::StorageFailure, std::string("write: ") + std::strerror(errno));
        }
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::string read_file(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  if (!in)
    fail(Errc::StorageFailure, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

std::string_view to_string(Stream s) noexcept
{
  switch (s)
    {
    case Stream::Ledger: return "LEDGER";
    case Stream::Session: return "SESSION";
    case Stream::Growth: return "GROWTH";
    case Stream::ProtocolAudit: return "PROTOCOL_AUDIT";
    }
  return "GROWTH";
}

Stream parse_stream(std::string_view s)
{
  if (s == "LEDGER")
    return Stream::Ledger;
  if (s == "SESSION")
    return Stream::Session;
  if (s == "GROWTH")
    return Stream::Growth;
  if (s == "PROTOCOL_AUDIT")
    return Stream::ProtocolAudit;
  fail(Errc::ParseError, "unknown stream '" + std::string(s) + "'");
}

std::string EventStore::encode_line(const StoredRecord& rec)
{
  const std::string payload = canonical_payload(rec);
  char crc[9];
  std::snprintf(crc, sizeof crc, "%08x", crc_of(payload));
  std::string line;
  line.reserve(payload.size() + kCrcHeader);
  line.append(kCrcPrefix).append(crc).append("\",");
  line.append(payload, 1, std::string::npos);
  return line;
}

std::optional<StoredRecord> EventStore::decode_line(std::string_view line)
{
  if (line.size() <= kCrcHeader || line.substr(0, kCrcPrefix.size()) != kCrcPrefix
      || line.substr(kCrcPrefix.size() + 8, 2) != "\",")
    return std::nullopt;
  std::uint32_t stored = 0;
  const std::string hex(line.substr(kCrcPrefix.size(), 8));
  if (std::sscanf(hex.c_str(), "%8x", &stored) != 1)
    return std::nullopt;
  std::string payload = "{";
  payload.append(line.substr(kCrcHeader));
  if (crc_of(payload) != stored)
    return std::nullopt;
  const json j = json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    return std::nullopt;
  try
    {
      StoredRecord rec;
      rec.offset = j.at("off").get<std::uint64_t>();
      rec.ts = from_epoch(j.at("ts").get<std::int64_t>());
      rec.stream = parse_stream(j.at("stream").get<std::string>());
      rec.body = j.at("body");
      return rec;
    }
  catch (const std::exception&)
    {
      return std::nullopt;
    }
}

EventStore::EventStore(fs::path dir, StoreOptions opts) : dir_(std::move(dir)), opts_(opts)
{
  std::error_code ec;
  fs::create_directories(*dir_, ec);
  if (ec)
    fail(Errc::StorageFailure, "cannot create " + dir_->string() + ": " + ec.message());
  open_segments();
}

EventStore::~EventStore()
{
  if (fd_ >= 0)
    ::close(fd_);
}

fs::path EventStore::segment_path(std::size_t index) const
{
  char name[32];
  std::snprintf(name, sizeof name, "events-%06zu.ndjson", index);
  return *dir_ / name;
}

void EventStore::open_segments()
{
  std::vector<std::size_t> indices;
  for (const auto& entry : fs::directory_iterator(*dir_))
    {
      const std::string name = entry.path().filename().string();
      std::size_t idx = 0;
      char tail[16] = {};
      if (std::sscanf(name.c_str(), "events-%6zu.%15s", &idx, tail) == 2
          && std::string_view(tail) == "ndjson")
        indices.push_back(idx);
    }
  std::sort(indices.begin(), indices.end());
  for (std::size_t k = 0; k < indices.size(); ++k)
    if (indices[k] != k)
      fail(Errc::StorageFailure, "missing log segment " + std::to_string(k));

  for (std::size_t k = 0; k < indices.size(); ++k)
    {
      const bool last_segment = k + 1 == indices.size();
      const fs::path path = segment_path(k);
      const std::string data = read_file(path);
      std::size_t pos = 0;
      while (pos < data.size())
        {
          const std::size_t nl = data.find('\n', pos);
          const bool complete = nl != std::string::npos;
          const std::string_view line(data.data() + pos,
                                      (complete ? nl : data.size()) - pos);
          auto rec = complete ? decode_line(line) : std::nullopt;
          const bool is_tail = last_segment && (!complete || nl + 1 == data.size());
          if (!rec || rec->offset != records_.size())
            {
              if (!is_tail)
                fail(Errc::StorageFailure, "corrupt record in " + path.string() + " at byte "
                                               + std::to_string(pos));
              recovered_bytes_ = data.size() - pos;
              fs::resize_file(path, pos);
              break;
            }
          records_.push_back(std::move(*rec));
          lines_.emplace_back(line);
          pos = nl + 1;
        }
    }
  open_writer(indices.empty() ? 0 : indices.size() - 1);
}

void EventStore::open_writer(std::size_t segment_index)
{
  if (fd_ >= 0)
    ::close(fd_);
  segment_ = segment_index;
  const fs::path path = segment_path(segment_index);
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0)
    fail(Errc::StorageFailure, "open " + path.string() + ": " + std::strerror(errno));
  segment_bytes_ = fs::file_size(path);
}

std::uint64_t EventStore::append(Stream stream, Timestamp ts, json body)
{
  std::unique_lock lock(mutex_);
  StoredRecord rec{records_.size(), ts, stream, std::move(body)};
  std::string line = encode_line(rec);
  if (dir_)
    {
      if (segment_bytes_ > 0 && segment_bytes_ + line.size() + 1 > opts_.rotate_bytes)
        open_writer(segment_ + 1);
      line.push_back('\n');
      write_all(fd_, line);
      if (opts_.fsync && ::fdatasync(fd_) != 0)
        fail(Errc::StorageFailure, std::string("fdatasync: ") + std::strerror(errno));
      segment_bytes_ += line.size();
      line.pop_back();
    }
  records_.push_back(std::move(rec));
  lines_.push_back(std::move(line));
  return records_.back().offset;
}

std::vector<StoredRecord> EventStore::replay(std::uint64_t from_offset) const
{
  std::shared_lock lock(mutex_);
  if (from_offset > records_.size())
    fail(Errc::OffsetOutOfRange, "offset " + std::to_string(from_offset) + " beyond end "
                                     + std::to_string(records_.size()));
  return {records_.begin() + static_cast<std::ptrdiff_t>(from_offset), records_.end()};
}

void EventStore::for_each(std::uint64_t from_offset,
                          const std::function<void(const StoredRecord&)>& fn) const
{
  std::shared_lock lock(mutex_);
  if (from_offset > records_.size())
    fail(Errc::OffsetOutOfRange, "offset " + std::to_string(from_offset) + " beyond end "
                                     + std::to_string(records_.size()));
  for (std::size_t k = from_offset; k < records_.size(); ++k)
    fn(records_[k]);
}

std::uint64_t EventStore::size() const
{
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::size_t EventStore::segment_count() const
{
  std::shared_lock lock(mutex_);
  return dir_ ? segment_ + 1 : 0;
}

std::string EventStore::digest() const
{
  std::shared_lock lock(mutex_);
  Sha256 h;
  for (const auto& line : lines_)
    h.update(line).update("\n");
  return h.hex();
}

} // namespace tandem

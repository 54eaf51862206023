#pragma once

#include "tandem/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace tandem {

using json = nlohmann::json;

enum class Stream { Ledger, Session, Growth, ProtocolAudit };

std::string_view to_string(Stream s) noexcept;
Stream parse_stream(std::string_view s);

struct StoredRecord
{
  std::uint64_t offset = 0;
  Timestamp ts{};
  Stream stream = Stream::Growth;
  json body;

  bool operator==(const StoredRecord&) const = default;
};

struct StoreOptions
{
  /// Segment rotation threshold in bytes.
  std::uint64_t rotate_bytes = 64ull << 20;
  /// fdatasync after every append.
  bool fsync = false;
};

/// Append-only log of ledger, session, growth and audit records.
///
/// Each record is one line of JSON of the form
///   {"crc":"<crc32 hex>","body":...,"off":N,"stream":"...","ts":T}
/// where the CRC covers the canonical serialization of every field but
/// itself. Without a directory the store lives purely in memory; both modes
/// produce byte-identical lines, so digest() is storage independent.
///
/// Single writer, many readers. A torn or corrupt final record is dropped
/// and truncated away on open; corruption anywhere else is a StorageFailure.
class EventStore
{
public:
  EventStore() = default;
  explicit EventStore(std::filesystem::path dir, StoreOptions opts = {});
  ~EventStore();

  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  std::uint64_t append(Stream stream, Timestamp ts, json body);

  /// Records with offset >= from_offset, in offset order.
  std::vector<StoredRecord> replay(std::uint64_t from_offset = 0) const;

  /// Visits records with offset >= from_offset without copying.
  void for_each(std::uint64_t from_offset,
                const std::function<void(const StoredRecord&)>& fn) const;

  std::uint64_t size() const;
  bool persistent() const noexcept { return dir_.has_value(); }
  std::size_t segment_count() const;

  /// Number of torn bytes discarded when the store was opened.
  std::uint64_t recovered_bytes() const noexcept { return recovered_bytes_; }

  /// Hex SHA-256 over every serialized record line in offset order.
  std::string digest() const;

  /// Serialized form of a record, without the trailing newline.
  static std::string encode_line(const StoredRecord& rec);
  /// Parses and verifies one line. Returns nullopt on checksum or syntax
  /// failure.
  static std::optional<StoredRecord> decode_line(std::string_view line);

private:
  void open_segments();
  void open_writer(std::size_t segment_index);
  std::filesystem::path segment_path(std::size_t index) const;

  std::optional<std::filesystem::path> dir_;
  StoreOptions opts_;
  mutable std::shared_mutex mutex_;
  std::vector<StoredRecord> records_;
  std::vector<std::string> lines_;
  int fd_ = -1;
  std::size_t segment_ = 0;
  std::uint64_t segment_bytes_ = 0;
  std::uint64_t recovered_bytes_ = 0;
};

} // namespace tandem

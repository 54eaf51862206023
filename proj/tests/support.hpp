#pragma once

#include "tandem/types.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace tandem::test {

/// Scratch directory removed on destruction.
class TempDir
{
public:
  TempDir()
  {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path()
            / ("tandem-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir()
  {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline std::filesystem::path data_file(const std::string& name)
{
  return std::filesystem::path(TANDEM_DATA_DIR) / name;
}

/// 2014-05-05 00:00 UTC, a Monday.
inline Timestamp t0() { return from_epoch(1399248000); }

inline Timestamp at(std::int64_t seconds) { return t0() + Seconds{seconds}; }

} // namespace tandem::test

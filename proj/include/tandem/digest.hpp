#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace tandem {

/// Incremental SHA-256 producing a lowercase hex digest.
class Sha256
{
public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  std::string hex();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline std::string sha256_hex(std::string_view bytes)
{
  Sha256 h;
  h.update(bytes);
  return h.hex();
}

} // namespace tandem

#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace tandem {

using Seconds = std::chrono::seconds;
using Timestamp = std::chrono::sys_seconds;

inline Timestamp from_epoch(std::int64_t s) { return Timestamp{Seconds{s}}; }
inline std::int64_t to_epoch(Timestamp t) { return t.time_since_epoch().count(); }

using UserId = std::string;
using Language = std::string;

enum class AccountId : std::uint64_t {};
enum class EntryId : std::uint64_t {};
enum class InvitationId : std::uint64_t {};
enum class SessionId : std::uint64_t {};

template <typename Id>
constexpr std::uint64_t raw(Id id) noexcept
{
  return static_cast<std::uint64_t>(id);
}

enum class Role { Teacher, Student };

std::string_view to_string(Role r) noexcept;
Role parse_role(std::string_view s);

/// Bit set over Role; a user may advertise both roles at once.
class RoleSet
{
public:
  constexpr RoleSet() = default;
  constexpr RoleSet(std::initializer_list<Role> roles)
  {
    for (Role r : roles)
      insert(r);
  }

  constexpr void insert(Role r) noexcept { bits_ |= bit(r); }
  constexpr bool contains(Role r) const noexcept { return (bits_ & bit(r)) != 0; }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr bool operator==(const RoleSet&) const = default;

private:
  static constexpr unsigned bit(Role r) noexcept { return r == Role::Teacher ? 1u : 2u; }
  unsigned bits_ = 0;
};

/// Monday 00:00 UTC of the calendar week containing `t`.
Timestamp week_start(Timestamp t);
/// 00:00 UTC of the day containing `t`.
Timestamp day_start(Timestamp t);
/// Parses "YYYY-MM-DD" as 00:00 UTC.
Timestamp parse_date(std::string_view s);
std::string format_date(Timestamp t);

} // namespace tandem

#pragma once

#include "tandem/event_store.hpp"
#include "tandem/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tandem {

enum class GrowthKind {
  Register,
  InviteSent,
  InvitedRegister,
  ActiveDay,
  CallMade,
  SessionDone,
  Taught,
  Purchased,
  Funnel,
};

enum class FunnelVariant { A, B };
enum class FunnelAction { Shown, Invited, Dismissed, Declined };

std::string_view to_string(GrowthKind k) noexcept;
std::string_view to_string(FunnelVariant v) noexcept;
std::string_view to_string(FunnelAction a) noexcept;
GrowthKind parse_growth_kind(std::string_view s);
FunnelVariant parse_variant(std::string_view s);
FunnelAction parse_funnel_action(std::string_view s);

/// One analytics fact. `user` names an individual; an empty `user` marks a
/// cohort aggregate (imported monthly or weekly rows) standing for `count`
/// anonymous, distinct users or occurrences.
struct GrowthEvent
{
  Timestamp ts{};
  GrowthKind kind = GrowthKind::ActiveDay;
  UserId user;
  std::uint64_t count = 1;

  // SESSION_DONE: total seconds across `count` sessions.
  std::int64_t duration_s = 0;
  std::optional<std::string> cause;
  std::optional<std::uint64_t> session;
  // REGISTER aggregate: how many of `count` made a call in the same window.
  std::uint64_t called = 0;
  // INVITED_REGISTER
  std::optional<UserId> inviter;
  // FUNNEL
  std::optional<FunnelVariant> variant;
  std::optional<FunnelAction> action;

  bool aggregate() const noexcept { return user.empty(); }
  bool operator==(const GrowthEvent&) const = default;
};

json to_json(const GrowthEvent& e);
GrowthEvent growth_event_from_json(Timestamp ts, const json& body);

/// All GROWTH records of `store`, in log order.
std::vector<GrowthEvent> growth_events(const EventStore& store);

} // namespace tandem

#pragma once

#include "tandem/analytics.hpp"
#include "tandem/event_store.hpp"
#include "tandem/platform.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tandem {

struct BotBehavior
{
  double accept_probability = 0.8;
  /// Lesson invitations a bot tries to send per active day (one visit a day).
  double invite_propensity = 3.0;
  /// Log-normal session length: median and log-space sigma.
  double session_median_minutes = 12.0;
  double session_dispersion = 0.35;
  double daily_return_probability = 0.7;
  /// Chance a bot also advertises TEACHER.
  double teach_willingness = 0.6;
  double visit_minutes = 60.0;
  /// Chance per visit that the friend-invite dialog is shown.
  double friend_dialog_probability = 0.1;
  double friend_invite_probability_a = 0.26;
  double friend_invite_probability_b = 0.73;
  /// Chance each invited friend registers the next day.
  double friend_conversion = 0.1;
  /// Bots top up with a stub purchase when their balance runs low.
  bool payers = false;
};

struct SimConfig
{
  std::uint64_t seed = 1;
  std::uint32_t bot_count = 50;
  std::uint32_t days = 30;
  BotBehavior behavior;
  /// Share of users assigned invite dialog variant A.
  double variant_split = 0.5;
  Timestamp start = from_epoch(1399248000); // a Monday, 00:00 UTC

  /// Throws ConfigInvalid naming the first bad field.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys are ConfigInvalid.
SimConfig sim_config_from_json(const json& j);
json to_json(const SimConfig& cfg);

struct SimSummary
{
  std::uint64_t registered = 0;
  std::uint64_t sessions = 0;
  std::uint64_t connects = 0;
  std::optional<double> mean_minutes;
  std::uint64_t frames_in = 0;
  std::uint64_t frames_out = 0;
  std::uint64_t errors = 0;
  Seconds total_balance{0};
  Seconds total_minted{0};
  std::uint64_t records = 0;
  std::string log_digest;
  std::string state_hash;
  std::vector<SeriesRow> weekly;
};

/// Runs the bot population against an in-process signaling hub on a virtual
/// clock. Single-threaded and seeded, so equal configs give byte-identical
/// logs. Every connection is closed before returning, so no session is left
/// live. `store` must be empty.
SimSummary run_simulation(const SimConfig& cfg, EventStore& store,
                          LessonLibrary lessons = LessonLibrary::builtin());

std::string format_summary(const SimSummary& s);

} // namespace tandem

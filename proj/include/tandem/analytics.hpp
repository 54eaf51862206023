#pragma once

#include "tandem/growth_event.hpp"
#include "tandem/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tandem {

/// Exact non-negative rational. Rendering rounds half-up from the exact
/// value, so golden comparisons never see binary floating-point drift.
struct Ratio
{
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  /// Four significant digits, e.g. 26/100 -> "0.2600", 2/24096 -> "0.00008300".
  std::string sig4() const;
  /// The value times 100 to four significant digits with a '%' suffix.
  std::string percent4() const;
  bool operator==(const Ratio& o) const noexcept;
};

/// Half-open interval [start, end).
struct Window
{
  Timestamp start{};
  Timestamp end{};

  bool contains(Timestamp t) const noexcept { return start <= t && t < end; }
  /// Everything ever logged.
  static Window all() noexcept;
};

struct MetricsWindow
{
  Timestamp start{}, end{};
  std::uint64_t U = 0;  // active users
  std::uint64_t i = 0;  // invitations sent
  std::uint64_t IU = 0; // invited users who registered
  // daily audience inputs for K-retention, when the log resolves days
  std::uint64_t dU = 0, dNU = 0, dU_prev = 0;
};

/// Viral factor as the product (i/U)*(IU/i); 0 when no invitations were
/// sent. Throws EmptyWindow for U = 0 and DegenerateInput when IU > i or
/// IU > 0 without invitations.
double k_factor(const MetricsWindow& w);
/// The same quantity exactly: IU/U.
Ratio k_factor_exact(const MetricsWindow& w);

/// (dU - dNU) / dU_prev. Throws EmptyPreviousDay or DegenerateInput (dNU > dU).
double k_retention(std::uint64_t dU, std::uint64_t dNU, std::uint64_t dU_prev);

/// k + r. Throws DegenerateInput unless k >= 0 and 0 <= r <= 1.
double k_growth(double k, double r);

struct ProjectionSeries
{
  double u0 = 0, k = 0, r = 0;
  /// points[n] is the audience after n steps; n = 0..steps.
  std::vector<double> points;
};

/// Audience recurrence a(n+1) = a(n) * (k + r) from a(0) = u0.
ProjectionSeries project_growth(double u0, double k, double r, std::uint64_t steps);

struct Proportion
{
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
};

/// Two-sided p-value of equal proportions: Pearson chi-square on the 2x2
/// table with one degree of freedom. Equal observed rates give exactly 1.
/// Throws DegenerateInput for zero trials or successes > trials.
double significance(Proportion before, Proportion after);

struct ConnectionStats
{
  std::uint64_t connects = 0;
  std::int64_t total_seconds = 0;

  Ratio total_minutes() const noexcept;
  /// Absent for zero connects.
  std::optional<Ratio> mean_minutes() const noexcept;
};

ConnectionStats connection_stats(const std::vector<GrowthEvent>& events, Window w);

struct Involvement
{
  std::uint64_t new_users_calling = 0;
  std::uint64_t registrations = 0;
  /// Absent when nobody registered.
  std::optional<Ratio> share() const noexcept;
};

/// New registrations in the window that also made a call in it.
Involvement involvement(const std::vector<GrowthEvent>& events, Window w);

enum class ShareMetric { TeachingShare, Funnel, Adoption };

/// TEACHING_SHARE: users who taught / active users.
/// FUNNEL: users with FUNNEL(variant, INVITED) / users shown `variant`.
/// ADOPTION: users who purchased / users registered before the window end.
/// Throws EmptyPopulation when the denominator is empty.
Ratio share_and_funnel(const std::vector<GrowthEvent>& events, Window w, ShareMetric metric,
                       FunnelVariant variant = FunnelVariant::A);

/// Inputs of both viral equations for one window. Active users are those
/// with an ACTIVE_DAY or any session event in the window, plus the counts of
/// ACTIVE_DAY aggregates.
MetricsWindow window_metrics(const std::vector<GrowthEvent>& events, Window w);

struct SeriesRow
{
  MetricsWindow m;
  std::optional<double> k_factor;
  /// Mean of the daily K-retention values defined inside the window.
  std::optional<double> k_retention;
  std::optional<double> k_growth;
};

/// One row per calendar week (Monday 00:00 UTC) from the first to the last
/// event week, skipping weeks without activity.
std::vector<SeriesRow> weekly_series(const std::vector<GrowthEvent>& events);

/// Pools the weeks starting before `cutoff` against the rest and tests the
/// invited-registration rates (IU over U) for a difference.
struct PooledComparison
{
  Proportion before, after;
  double mean_k_before = 0, mean_k_after = 0;
  double p_value = 1;
};
PooledComparison compare_before_after(const std::vector<SeriesRow>& rows, Timestamp cutoff);

/// Month windows [first day, first day of next month) covering every event.
std::vector<Window> month_windows(const std::vector<GrowthEvent>& events);

std::string series_csv(const std::vector<SeriesRow>& rows);
std::string connections_report(const std::vector<GrowthEvent>& events);
std::string involvement_report(const std::vector<GrowthEvent>& events);
std::string projection_report(const ProjectionSeries& s);

} // namespace tandem

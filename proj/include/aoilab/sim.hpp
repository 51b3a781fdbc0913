#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "aoilab/model.hpp"

namespace aoilab {

/// How service requirements are tied to the common random stream.
enum class Coupling {
  /// Message k carries the k-th draw, made when it arrives (dropped or not).
  by_message,
  /// The j-th service start takes the j-th draw.
  by_service_order,
};

struct SimConfig {
  PolicyId policy = PolicyId::B(2);
  TrafficModel traffic{1.0, ServiceDistribution::exponential(1.0)};
  /// Successful departures to collect after warmup.
  long long segments = 100000;
  /// Default max(segments / 100, 1000); 0 when `max_arrivals` is set.
  std::optional<long long> warmup_segments;
  /// Optional arrival budget; the run stops at the arrival that exhausts it
  /// and the open last segment is included up to that time.
  std::optional<long long> max_arrivals;
  std::uint64_t seed = 1;
  /// Replication index; selects an independent stream family for `seed`.
  std::uint64_t replication = 0;
  Coupling coupling = Coupling::by_message;
  /// Time points for the CCDF; empty means default_ccdf_grid().
  std::vector<double> ccdf_grid;
  /// Number of batches for the batch-means standard error.
  int batches = 50;
  /// Starvation guard: events allowed between two successful departures.
  long long max_events_per_segment = 10'000'000;
  /// Keep the reset sequence in the returned path.
  bool record_path = true;
  /// Replay these arrival times (nondecreasing) instead of the Poisson stream.
  /// The run then has no warmup, ignores `segments` and ends once the trace is
  /// exhausted and the system is empty, or at `trace_end` if that is later.
  std::vector<double> arrival_trace;
  double trace_end = 0.0;

  long long effective_warmup() const;
  void validate() const;
};

/// Sawtooth AoI: alpha(t) = ages[k] + t - epochs[k] on [epochs[k], epochs[k+1]),
/// and on [epochs.back(), end_time] for the last piece. occupancy[k] is the
/// number of messages left behind by the departure at epochs[k] (-1 for the
/// initial piece when it does not start at a departure).
struct AoiPath {
  std::vector<double> epochs;
  std::vector<double> ages;
  std::vector<int> occupancy;
  double end_time = 0.0;

  bool empty() const { return epochs.empty(); }
  /// alpha(t) for t in [epochs.front(), end_time].
  double age_at(double t) const;
};

/// Mergeable accumulators; all derived statistics are ratios of these sums.
struct SimStats {
  int buffer_cells = 0;
  double total_time = 0.0;
  double int_age = 0.0;
  double int_age_sq = 0.0;
  long long departures = 0;
  long long arrivals = 0;
  long long k0_departures = 0;
  std::vector<double> ccdf_grid;
  std::vector<double> ccdf_time;  // time with alpha > grid[i]
  std::vector<double> occupancy_time;  // time with xi = k, k = 0..n
  std::array<long long, 4> palm_count{};  // index 2 K_{-1} + K_0 for K in {0, 1}
  std::array<double, 4> palm_age_sum{};
  long long lag_pairs = 0;
  double lag_sum_x = 0.0, lag_sum_y = 0.0, lag_sum_xx = 0.0, lag_sum_yy = 0.0, lag_sum_xy = 0.0;
  std::vector<double> batch_means;

  double time_avg_mean() const;
  double time_avg_second_moment() const;
  double variance() const;
  /// Batch-means standard error of time_avg_mean.
  double mean_standard_error() const;
  double mean_segment() const;
  double palm_k0_frac() const;
  double k_lag1_correlation() const;
  std::vector<double> ccdf() const;
  double occupancy_fraction(int k) const;
  /// (count, mean alpha(S0)) for K_{-1} = i, K_0 = j, i, j in {0, 1}.
  std::pair<long long, double> palm_conditional(int i, int j) const;

  /// Associative merge of independent replications with the same grid.
  void merge(const SimStats& other);
};

struct SimRun {
  AoiPath path;
  SimStats stats;
};

SimRun run(const SimConfig& cfg);

/// Independent replications (replication ids 0..count-1) on up to `jobs`
/// threads, merged in replication order.
SimStats run_replications(const SimConfig& cfg, int count, int jobs = 1);

/// Exact fraction of [epochs.front(), end_time] with alpha > t.
double time_average_ccdf(const AoiPath& path, double t);

/// Runs every policy on the same arrival and service streams.
std::map<PolicyId, SimRun> coupled_run(const std::vector<PolicyId>& policies, const SimConfig& cfg);

/// sup_t (alpha_a(t) - alpha_b(t)) over the common window, with the first
/// epoch where the difference exceeds `tol` and how many reset epochs did.
struct PathComparison {
  double max_excess = 0.0;
  long long violations = 0;
  long long epochs_checked = 0;
  std::optional<double> first_violation;
};
PathComparison compare_paths(const AoiPath& a, const AoiPath& b, double tol = 1e-9);

/// `points` geometric points from 0.01/mu to the t where the analytic CCDF
/// reaches 1e-4 (20/mu when no analytic CCDF is available).
std::vector<double> default_ccdf_grid(PolicyId policy, const TrafficModel& traffic, int points = 200);

}  // namespace aoilab

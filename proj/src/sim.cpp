#include "aoilab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include "aoilab/analytic.hpp"
#include "aoilab/error.hpp"
#include "aoilab/invert.hpp"

namespace aoilab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Message {
  double arrival;
  double size;  // NaN until drawn under service-order coupling
};

// Per-segment record: starting age and length. The last one may be open.
struct Segments {
  std::vector<double> start_age;
  std::vector<double> length;
};

class Simulator {
public:
  explicit Simulator(const SimConfig& cfg)
      : cfg_(cfg),
        policy_(cfg.policy),
        lambda_(cfg.traffic.lambda),
        arrivals_(CounterRng(cfg.seed, cfg.replication).substream(1)),
        services_(CounterRng(cfg.seed, cfg.replication).substream(2)) {}

  SimRun execute();

private:
  double draw_size() { return sample(cfg_.traffic.dist, services_); }

  void begin_service(Message m, double now) {
    if (std::isnan(m.size)) {
      m.size = draw_size();
    }
    server_ = m;
    completion_ = now + m.size;
  }

  void on_arrival(double now);
  // Returns the occupancy left behind.
  int on_departure(double now);

  int in_system() const { return (server_ ? 1 : 0) + static_cast<int>(waiting_.size()); }

  const SimConfig& cfg_;
  PolicyId policy_;
  double lambda_;
  CounterRng arrivals_;
  CounterRng services_;

  std::optional<Message> server_;
  double completion_ = 0.0;
  std::deque<Message> waiting_;
  double latest_stamp_ = 0.0;
  long long arrival_count_ = 0;
};

void Simulator::on_arrival(double now) {
  ++arrival_count_;
  Message m{now, cfg_.coupling == Coupling::by_message ? draw_size() : kNaN};
  if (!server_) {
    begin_service(m, now);
    return;
  }
  if (policy_.preemptive()) {
    begin_service(m, now);
    return;
  }
  const auto capacity = static_cast<std::size_t>(policy_.n - 1);
  if (waiting_.size() < capacity) {
    if (policy_.kind == PolicyId::Kind::blocking) {
      waiting_.push_back(m);
    } else {
      waiting_.push_front(m);
    }
    return;
  }
  if (policy_.kind == PolicyId::Kind::pushout) {
    waiting_.push_front(m);
    waiting_.pop_back();
  }
}

int Simulator::on_departure(double now) {
  latest_stamp_ = std::max(latest_stamp_, server_->arrival);
  server_.reset();
  const int left = static_cast<int>(waiting_.size());
  if (!waiting_.empty()) {
    // FIFO front for Bn; most recent (cell 2) for Pn.
    const Message next = waiting_.front();
    waiting_.pop_front();
    begin_service(next, now);
  }
  return left;
}

SimRun Simulator::execute() {
  cfg_.validate();
  const long long warmup = cfg_.effective_warmup();
  const int n = policy_.n;

  SimRun result;
  AoiPath& path = result.path;
  SimStats& stats = result.stats;
  stats.buffer_cells = n;
  stats.occupancy_time.assign(n + 1, 0.0);
  stats.ccdf_grid = cfg_.ccdf_grid.empty() ? default_ccdf_grid(policy_, cfg_.traffic) : cfg_.ccdf_grid;

  Segments seg;
  bool collecting = warmup == 0;
  long long warmup_seen = 0;
  long long collected = 0;
  double seg_start = 0.0, seg_age = 0.0;
  int prev_k = -1;
  double last_time = 0.0;

  auto push_reset = [&](double t, double age, int k) {
    if (cfg_.record_path) {
      path.epochs.push_back(t);
      path.ages.push_back(age);
      path.occupancy.push_back(k);
    }
  };
  if (collecting) {
    push_reset(0.0, 0.0, -1);
  }

  const bool traced = !cfg_.arrival_trace.empty();
  std::size_t trace_pos = 0;
  auto draw_arrival = [&](double now) {
    if (!traced) {
      return now + arrivals_.exponential(lambda_);
    }
    return trace_pos < cfg_.arrival_trace.size() ? cfg_.arrival_trace[trace_pos++]
                                                 : std::numeric_limits<double>::infinity();
  };
  double next_arrival = draw_arrival(0.0);
  long long events_since_departure = 0;
  double end_time = 0.0;

  for (;;) {
    const bool departure = server_ && completion_ <= next_arrival;
    const double now = departure ? completion_ : next_arrival;
    if (std::isinf(now)) {
      end_time = std::max(last_time, cfg_.trace_end);
      stats.occupancy_time[0] += end_time - last_time;
      seg.start_age.push_back(seg_age);
      seg.length.push_back(end_time - seg_start);
      break;
    }

    if (!departure && cfg_.max_arrivals && arrival_count_ >= *cfg_.max_arrivals) {
      end_time = now;
      if (collecting) {
        stats.occupancy_time[in_system()] += now - last_time;
        seg.start_age.push_back(seg_age);
        seg.length.push_back(now - seg_start);
      }
      break;
    }
    if (++events_since_departure > cfg_.max_events_per_segment) {
      throw SimulationError("no successful departure within " + std::to_string(cfg_.max_events_per_segment) +
                            " events (" + policy_.name() + ", lambda=" + std::to_string(lambda_) + ")");
    }
    if (collecting) {
      stats.occupancy_time[in_system()] += now - last_time;
    }
    last_time = now;

    if (!departure) {
      on_arrival(now);
      next_arrival = draw_arrival(now);
      continue;
    }

    events_since_departure = 0;
    const int k = on_departure(now);
    const double age = now - latest_stamp_;
    if (collecting) {
      seg.start_age.push_back(seg_age);
      seg.length.push_back(now - seg_start);
      ++stats.departures;
      if (k == 0) {
        ++stats.k0_departures;
      }
      if (prev_k >= 0) {
        stats.lag_pairs += 1;
        stats.lag_sum_x += prev_k;
        stats.lag_sum_y += k;
        stats.lag_sum_xx += double(prev_k) * prev_k;
        stats.lag_sum_yy += double(k) * k;
        stats.lag_sum_xy += double(prev_k) * k;
        if (prev_k <= 1 && k <= 1) {
          stats.palm_count[2 * prev_k + k] += 1;
          stats.palm_age_sum[2 * prev_k + k] += age;
        }
      }
      push_reset(now, age, k);
      ++collected;
    } else if (++warmup_seen == warmup) {
      collecting = true;
      push_reset(now, age, k);
    }
    prev_k = k;
    seg_start = now;
    seg_age = age;
    if (collecting && !cfg_.max_arrivals && !traced && collected == cfg_.segments) {
      end_time = now;
      break;
    }
  }

  path.end_time = end_time;
  stats.arrivals = arrival_count_;

  // Exact ramp integrals, compensated through long double accumulation.
  long double total = 0.0L, first = 0.0L, second = 0.0L;
  const std::size_t count = seg.length.size();
  const std::size_t batches = std::min<std::size_t>(cfg_.batches, count);
  long double batch_int = 0.0L, batch_time = 0.0L;
  std::size_t batch_index = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const long double a = seg.start_age[i], len = seg.length[i];
    const long double ramp = a * len + 0.5L * len * len;
    total += len;
    first += ramp;
    second += ((a + len) * (a + len) * (a + len) - a * a * a) / 3.0L;
    batch_int += ramp;
    batch_time += len;
    if (batches > 1 && (i + 1) * batches / count > batch_index) {
      batch_index = (i + 1) * batches / count;
      if (batch_time > 0.0L) {
        stats.batch_means.push_back(static_cast<double>(batch_int / batch_time));
      }
      batch_int = batch_time = 0.0L;
    }
  }
  stats.total_time = static_cast<double>(total);
  stats.int_age = static_cast<double>(first);
  stats.int_age_sq = static_cast<double>(second);

  // total * P(alpha > t) = sum (e_i - t)^+ - sum (a_i - t)^+, e_i = a_i + L_i.
  std::vector<double> starts = seg.start_age, ends(count);
  for (std::size_t i = 0; i < count; ++i) {
    ends[i] = seg.start_age[i] + seg.length[i];
  }
  std::sort(starts.begin(), starts.end());
  std::sort(ends.begin(), ends.end());
  auto suffix = [](const std::vector<double>& v) {
    std::vector<long double> s(v.size() + 1, 0.0L);
    for (std::size_t i = v.size(); i-- > 0;) {
      s[i] = s[i + 1] + v[i];
    }
    return s;
  };
  const auto start_suffix = suffix(starts), end_suffix = suffix(ends);
  auto excess = [](const std::vector<double>& v, const std::vector<long double>& s, double t) {
    const auto idx = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), t) - v.begin());
    return s[idx] - static_cast<long double>(v.size() - idx) * t;
  };
  stats.ccdf_time.resize(stats.ccdf_grid.size());
  for (std::size_t g = 0; g < stats.ccdf_grid.size(); ++g) {
    const double t = stats.ccdf_grid[g];
    stats.ccdf_time[g] = static_cast<double>(excess(ends, end_suffix, t) - excess(starts, start_suffix, t));
  }
  return result;
}

}  // namespace

long long SimConfig::effective_warmup() const {
  if (!arrival_trace.empty()) {
    return 0;
  }
  if (warmup_segments) {
    return *warmup_segments;
  }
  if (max_arrivals) {
    return 0;
  }
  return std::max<long long>(segments / 100, 1000);
}

void SimConfig::validate() const {
  if (segments < 1) {
    throw ArgumentError("segments must be at least 1");
  }
  if (warmup_segments && *warmup_segments < 0) {
    throw ArgumentError("warmup segments must be nonnegative");
  }
  if (max_arrivals && *max_arrivals < 1) {
    throw ArgumentError("arrival budget must be at least 1");
  }
  if (batches < 1) {
    throw ArgumentError("batches must be at least 1");
  }
  if (max_events_per_segment < 1) {
    throw ArgumentError("event cap must be positive");
  }
  if (!std::is_sorted(arrival_trace.begin(), arrival_trace.end()) ||
      (!arrival_trace.empty() && !(arrival_trace.front() >= 0.0 && std::isfinite(arrival_trace.back())))) {
    throw ArgumentError("arrival trace must be finite, nonnegative and nondecreasing");
  }
  for (double t : ccdf_grid) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw ArgumentError("CCDF grid points must be finite and nonnegative");
    }
  }
}

double AoiPath::age_at(double t) const {
  if (empty() || t < epochs.front() || t > end_time) {
    throw ArgumentError("time outside the recorded path");
  }
  const auto it = std::upper_bound(epochs.begin(), epochs.end(), t);
  const auto k = static_cast<std::size_t>(it - epochs.begin()) - 1;
  return ages[k] + t - epochs[k];
}

double SimStats::time_avg_mean() const { return int_age / total_time; }

double SimStats::time_avg_second_moment() const { return int_age_sq / total_time; }

double SimStats::variance() const {
  const double m = time_avg_mean();
  return time_avg_second_moment() - m * m;
}

double SimStats::mean_standard_error() const {
  const auto b = batch_means.size();
  if (b < 2) {
    return kNaN;
  }
  const double mean = std::accumulate(batch_means.begin(), batch_means.end(), 0.0) / b;
  double ss = 0.0;
  for (double x : batch_means) {
    ss += (x - mean) * (x - mean);
  }
  return std::sqrt(ss / (b - 1) / b);
}

double SimStats::mean_segment() const { return total_time / static_cast<double>(departures); }

double SimStats::palm_k0_frac() const { return static_cast<double>(k0_departures) / departures; }

double SimStats::k_lag1_correlation() const {
  const double n = static_cast<double>(lag_pairs);
  const double cov = lag_sum_xy / n - (lag_sum_x / n) * (lag_sum_y / n);
  const double vx = lag_sum_xx / n - (lag_sum_x / n) * (lag_sum_x / n);
  const double vy = lag_sum_yy / n - (lag_sum_y / n) * (lag_sum_y / n);
  return cov / std::sqrt(vx * vy);
}

std::vector<double> SimStats::ccdf() const {
  std::vector<double> out(ccdf_time.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(ccdf_time[i] / total_time, 0.0, 1.0);
  }
  return out;
}

double SimStats::occupancy_fraction(int k) const {
  if (k < 0 || k >= static_cast<int>(occupancy_time.size())) {
    return 0.0;
  }
  const double sum = std::accumulate(occupancy_time.begin(), occupancy_time.end(), 0.0);
  return occupancy_time[k] / sum;
}

std::pair<long long, double> SimStats::palm_conditional(int i, int j) const {
  if ((i != 0 && i != 1) || (j != 0 && j != 1)) {
    throw ArgumentError("Palm states must be 0 or 1");
  }
  const long long c = palm_count[2 * i + j];
  return {c, c ? palm_age_sum[2 * i + j] / c : kNaN};
}

void SimStats::merge(const SimStats& other) {
  if (ccdf_grid != other.ccdf_grid || buffer_cells != other.buffer_cells) {
    throw ArgumentError("cannot merge statistics over different grids or buffer sizes");
  }
  total_time += other.total_time;
  int_age += other.int_age;
  int_age_sq += other.int_age_sq;
  departures += other.departures;
  arrivals += other.arrivals;
  k0_departures += other.k0_departures;
  for (std::size_t i = 0; i < ccdf_time.size(); ++i) {
    ccdf_time[i] += other.ccdf_time[i];
  }
  for (std::size_t i = 0; i < occupancy_time.size(); ++i) {
    occupancy_time[i] += other.occupancy_time[i];
  }
  for (std::size_t i = 0; i < 4; ++i) {
    palm_count[i] += other.palm_count[i];
    palm_age_sum[i] += other.palm_age_sum[i];
  }
  lag_pairs += other.lag_pairs;
  lag_sum_x += other.lag_sum_x;
  lag_sum_y += other.lag_sum_y;
  lag_sum_xx += other.lag_sum_xx;
  lag_sum_yy += other.lag_sum_yy;
  lag_sum_xy += other.lag_sum_xy;
  batch_means.insert(batch_means.end(), other.batch_means.begin(), other.batch_means.end());
}

SimRun run(const SimConfig& cfg) { return Simulator(cfg).execute(); }

SimStats run_replications(const SimConfig& cfg, int count, int jobs) {
  if (count < 1) {
    throw ArgumentError("need at least one replication");
  }
  if (jobs < 1) {
    throw ArgumentError("jobs must be at least 1");
  }
  SimConfig base = cfg;
  base.record_path = false;
  if (base.ccdf_grid.empty()) {
    base.ccdf_grid = default_ccdf_grid(base.policy, base.traffic);
  }
  std::vector<std::optional<SimStats>> parts(count);
  std::vector<std::exception_ptr> errors(count);
  auto work = [&](int worker) {
    for (int r = worker; r < count; r += jobs) {
      try {
        SimConfig c = base;
        c.replication = cfg.replication + static_cast<std::uint64_t>(r);
        parts[r] = run(c).stats;
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int threads = std::min(jobs, count);
  for (int w = 1; w < threads; ++w) {
    pool.emplace_back(work, w);
  }
  work(0);
  for (auto& th : pool) {
    th.join();
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  SimStats merged = *parts[0];
  for (int r = 1; r < count; ++r) {
    merged.merge(*parts[r]);
  }
  return merged;
}

double time_average_ccdf(const AoiPath& path, double t) {
  if (path.empty()) {
    throw ArgumentError("empty path");
  }
  long double above = 0.0L;
  const std::size_t count = path.epochs.size();
  for (std::size_t k = 0; k < count; ++k) {
    const double next = k + 1 < count ? path.epochs[k + 1] : path.end_time;
    const double a = path.ages[k], e = a + (next - path.epochs[k]);
    above += std::max(0.0, e - t) - std::max(0.0, a - t);
  }
  return static_cast<double>(above / (path.end_time - path.epochs.front()));
}

std::map<PolicyId, SimRun> coupled_run(const std::vector<PolicyId>& policies, const SimConfig& cfg) {
  std::map<PolicyId, SimRun> out;
  for (PolicyId p : policies) {
    SimConfig c = cfg;
    c.policy = p;
    out.emplace(p, run(c));
  }
  return out;
}

PathComparison compare_paths(const AoiPath& a, const AoiPath& b, double tol) {
  if (a.empty() || b.empty()) {
    throw ArgumentError("empty path");
  }
  const double lo = std::max(a.epochs.front(), b.epochs.front());
  const double hi = std::min(a.end_time, b.end_time);
  PathComparison cmp;
  cmp.max_excess = -std::numeric_limits<double>::infinity();
  std::size_t ia = 0, ib = 0;
  auto advance = [](const AoiPath& p, std::size_t& i, double t) {
    while (i + 1 < p.epochs.size() && p.epochs[i + 1] <= t) {
      ++i;
    }
  };
  double t = lo;
  while (t <= hi) {
    advance(a, ia, t);
    advance(b, ib, t);
    const double diff = (a.ages[ia] + t - a.epochs[ia]) - (b.ages[ib] + t - b.epochs[ib]);
    ++cmp.epochs_checked;
    cmp.max_excess = std::max(cmp.max_excess, diff);
    if (diff > tol) {
      ++cmp.violations;
      if (!cmp.first_violation) {
        cmp.first_violation = t;
      }
    }
    const double na = ia + 1 < a.epochs.size() ? a.epochs[ia + 1] : std::numeric_limits<double>::infinity();
    const double nb = ib + 1 < b.epochs.size() ? b.epochs[ib + 1] : std::numeric_limits<double>::infinity();
    t = std::min(na, nb);
  }
  return cmp;
}

std::vector<double> default_ccdf_grid(PolicyId policy, const TrafficModel& traffic, int points) {
  if (points < 2) {
    throw ArgumentError("a CCDF grid needs at least two points");
  }
  const double mu = traffic.mu();
  const double lo = 0.01 / mu;
  double hi = 20.0 / mu;
  try {
    std::function<double(double)> tail;
    if (traffic.dist.family() == Family::deterministic) {
      tail = [&](double t) { return deterministic_ccdf(policy, traffic, t); };
    } else if (traffic.dist.family() == Family::exponential) {
      const auto lt = aoi_transform(policy, traffic);
      tail = [lt](double t) { return invert_ccdf(lt, t); };
    }
    if (tail) {
      double upper = 1.0 / mu;
      while (tail(upper) > 1e-4 && upper < 1e4 / mu) {
        upper *= 2.0;
      }
      double lower = upper / 2.0;
      for (int it = 0; it < 50 && upper - lower > 1e-6 * upper; ++it) {
        const double mid = 0.5 * (lower + upper);
        (tail(mid) > 1e-4 ? lower : upper) = mid;
      }
      hi = std::max(upper, 2.0 * lo);
    }
  } catch (const Error&) {
    hi = 20.0 / mu;
  }
  std::vector<double> grid(points);
  const double ratio = std::pow(hi / lo, 1.0 / (points - 1));
  for (int i = 0; i < points; ++i) {
    grid[i] = lo * std::pow(ratio, i);
  }
  grid.back() = hi;
  return grid;
}

}  // namespace aoilab

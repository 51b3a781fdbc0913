#include <cmath>
#include <numeric>

#include "aoilab/analytic.hpp"
#include "aoilab/error.hpp"
#include "aoilab/sim.hpp"
#include "doctest.h"

using namespace aoilab;

namespace {

SimConfig config(PolicyId p, double lambda, ServiceDistribution d, long long segments, std::uint64_t seed = 7) {
  SimConfig c;
  c.policy = p;
  c.traffic = TrafficModel(lambda, std::move(d));
  c.segments = segments;
  c.seed = seed;
  c.ccdf_grid = {0.5, 1.0, 2.0, 4.0};
  return c;
}

const auto kExp = ServiceDistribution::exponential(1.0);
const auto kDet = ServiceDistribution::deterministic(1.0);

// Tiny LCG for generating property-test parameters, independent of the library RNG.
struct Gen {
  std::uint64_t s;
  double uniform(double lo, double hi) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    return lo + (hi - lo) * static_cast<double>(s >> 11) * 0x1.0p-53;
  }
};

}  // namespace

TEST_CASE("same seed, same path; different replication, different path") {
  auto c = config(PolicyId::P(2), 1.0, kExp, 2000);
  const auto a = run(c), b = run(c);
  CHECK(a.path.epochs == b.path.epochs);
  CHECK(a.path.ages == b.path.ages);
  CHECK(a.stats.int_age == b.stats.int_age);
  c.replication = 1;
  CHECK(run(c).path.epochs != a.path.epochs);
}

TEST_CASE("path invariants hold for every policy") {
  Gen g{11};
  for (auto p : {PolicyId::B(1), PolicyId::B(2), PolicyId::B(4), PolicyId::P(1), PolicyId::P(2), PolicyId::P(3)}) {
    for (int trial = 0; trial < 4; ++trial) {
      const double lambda = g.uniform(0.2, 4.0);
      auto c = config(p, lambda, trial % 2 ? kDet : kExp, 3000, 100 + trial);
      const auto r = run(c);
      const auto& path = r.path;
      REQUIRE(path.epochs.size() == path.ages.size());
      for (std::size_t k = 1; k < path.epochs.size(); ++k) {
        CHECK(path.epochs[k] >= path.epochs[k - 1]);
        // a reset never raises the age
        CHECK(path.ages[k] <= path.ages[k - 1] + (path.epochs[k] - path.epochs[k - 1]) + 1e-12);
        CHECK(path.ages[k] >= 0.0);
        CHECK(path.occupancy[k] >= 0);
        CHECK(path.occupancy[k] <= p.n - 1);
      }
      double occ = 0.0;
      for (int k = 0; k <= p.n; ++k) {
        occ += r.stats.occupancy_fraction(k);
      }
      CHECK(occ == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.stats.occupancy_fraction(p.n + 1) == 0.0);
      CHECK(r.stats.departures == 3000);
      // the exact CCDF equals the integral of the sawtooth above t
      for (std::size_t i = 0; i < c.ccdf_grid.size(); ++i) {
        CHECK(r.stats.ccdf()[i] == doctest::Approx(time_average_ccdf(path, c.ccdf_grid[i])).epsilon(1e-9));
      }
      const double mean_from_path = [&] {
        long double s = 0.0L;
        for (std::size_t k = 0; k < path.epochs.size(); ++k) {
          const double next = k + 1 < path.epochs.size() ? path.epochs[k + 1] : path.end_time;
          const double len = next - path.epochs[k];
          s += path.ages[k] * len + 0.5 * len * len;
        }
        return static_cast<double>(s / (path.end_time - path.epochs.front()));
      }();
      CHECK(r.stats.time_avg_mean() == doctest::Approx(mean_from_path).epsilon(1e-10));
    }
  }
}

TEST_CASE("B1 age equals service plus exponential wait; FIFO never reorders") {
  // With blocking and one cell, every reset age is exactly the service time of the message served.
  const auto c = config(PolicyId::B(1), 1.0, kDet, 500);
  const auto r = run(c);
  for (std::size_t k = 1; k < r.path.ages.size(); ++k) {
    CHECK(r.path.ages[k] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.path.occupancy[k] == 0);
  }
  // FIFO with a buffer: served stamps increase, so a reset never equals the previous age plus elapsed time
  const auto b3 = run(config(PolicyId::B(3), 2.0, kDet, 2000));
  for (std::size_t k = 2; k < b3.path.ages.size(); ++k) {
    CHECK(b3.path.ages[k] < b3.path.ages[k - 1] + (b3.path.epochs[k] - b3.path.epochs[k - 1]));
  }
}

TEST_CASE("simulated means match the exponential closed forms") {
  struct Row {
    PolicyId p;
    double mean;
  };
  for (auto row : {Row{PolicyId::B(2), 8.0 / 3.0}, Row{PolicyId::P(2), 29.0 / 12.0}, Row{PolicyId::P(1), 2.0},
                   Row{PolicyId::B(1), 2.5}}) {
    const auto r = run(config(row.p, 1.0, kExp, 200000, 3));
    const double m = r.stats.time_avg_mean();
    CHECK(std::abs(m / row.mean - 1.0) < 0.01);
    CHECK(std::abs(m - row.mean) < 5.0 * r.stats.mean_standard_error());
  }
}

TEST_CASE("Palm statistics at successful departures") {
  for (double lambda : {0.5, 1.0, 2.0}) {
    for (const auto& d : {kExp, kDet}) {
      const TrafficModel tm(lambda, d);
      const auto r = run(config(PolicyId::B(2), lambda, d, 200000, 5));
      CHECK(std::abs(r.stats.palm_k0_frac() - k_chain_p0(tm)) < 0.005);
      CHECK(std::abs(r.stats.k_lag1_correlation()) < 0.005);
      CHECK(std::abs(r.stats.mean_segment() / mean_segment(tm) - 1.0) < 0.01);
    }
  }
  // K_{-1} = K_0 = 0 with exponential service at lambda = mu = 1: age is sigma given sigma < tau, mean 1/2
  const auto r = run(config(PolicyId::B(2), 1.0, kExp, 200000, 9));
  const auto [count, mean] = r.stats.palm_conditional(0, 0);
  CHECK(count > 10000);
  CHECK(std::abs(mean - 0.5) < 0.01);
  CHECK_THROWS_AS(r.stats.palm_conditional(2, 0), ArgumentError);
}

TEST_CASE("service-order coupling gives B2 and P2 the same occupancy process") {
  auto c = config(PolicyId::B(2), 2.0, kExp, 20000);
  c.coupling = Coupling::by_service_order;
  const auto runs = coupled_run({PolicyId::B(2), PolicyId::P(2)}, c);
  const auto& b = runs.at(PolicyId::B(2)).path;
  const auto& p = runs.at(PolicyId::P(2)).path;
  REQUIRE(b.epochs.size() == p.epochs.size());
  CHECK(b.epochs == p.epochs);
  CHECK(b.occupancy == p.occupancy);
  const auto cmp = compare_paths(p, b);
  CHECK(cmp.violations == 0);
  CHECK(cmp.epochs_checked > 20000);
}

TEST_CASE("compare_paths on hand-built sawtooths") {
  AoiPath a{{0.0, 1.0, 3.0}, {0.0, 0.2, 0.5}, {-1, 0, 0}, 4.0};
  AoiPath b{{0.0, 2.0}, {0.0, 0.1}, {-1, 0}, 4.0};
  // on [1,2): a = 0.2+(t-1), b = t, a - b = -0.8; [2,3): a = t-0.8, b = t-1.9, diff 1.1
  const auto ab = compare_paths(a, b);
  CHECK(ab.max_excess == doctest::Approx(1.1));
  REQUIRE(ab.first_violation);
  CHECK(*ab.first_violation == 2.0);
  CHECK(compare_paths(a, a).violations == 0);
  CHECK(a.age_at(2.5) == doctest::Approx(1.7));
  CHECK_THROWS_AS(a.age_at(5.0), ArgumentError);
}

TEST_CASE("time_average_ccdf edge cases") {
  AoiPath a{{0.0, 1.0}, {0.0, 0.5}, {-1, 0}, 2.0};
  // ages sweep [0,1] then [0.5,1.5]
  CHECK(time_average_ccdf(a, 0.0) == 1.0);
  CHECK(time_average_ccdf(a, 1.5) == 0.0);
  CHECK(time_average_ccdf(a, 1.0) == doctest::Approx(0.25));
  CHECK(time_average_ccdf(a, 100.0) == 0.0);
  CHECK_THROWS_AS(time_average_ccdf(AoiPath{}, 1.0), ArgumentError);
}

TEST_CASE("arrival budget and starvation") {
  auto c = config(PolicyId::P(1), 10.0, kDet, 1);
  c.max_arrivals = 100000;
  const auto r = run(c);
  CHECK(r.stats.arrivals == 100000);
  CHECK(r.stats.time_avg_mean() > 100.0);
  c.max_arrivals.reset();
  c.segments = 10;
  c.max_events_per_segment = 1000;
  c.traffic = TrafficModel(50.0, kDet);
  CHECK_THROWS_AS(run(c), SimulationError);
}

TEST_CASE("replications merge like one long run") {
  auto c = config(PolicyId::B(2), 1.0, kExp, 20000);
  const auto merged = run_replications(c, 4, 2);
  const auto serial = run_replications(c, 4, 1);
  CHECK(merged.int_age == serial.int_age);
  CHECK(merged.departures == 80000);
  CHECK(std::abs(merged.time_avg_mean() / (8.0 / 3.0) - 1.0) < 0.03);
  CHECK(merged.batch_means.size() == 200);
  CHECK_THROWS_AS(run_replications(c, 0), ArgumentError);
}

TEST_CASE("configuration validation") {
  SimConfig c;
  c.segments = 0;
  CHECK_THROWS_AS(run(c), ArgumentError);
  c.segments = 10;
  c.ccdf_grid = {-1.0};
  CHECK_THROWS_AS(run(c), ArgumentError);
  SimConfig d;
  CHECK(d.effective_warmup() == 1000);
  d.segments = 1000000;
  CHECK(d.effective_warmup() == 10000);
  d.max_arrivals = 5;
  CHECK(d.effective_warmup() == 0);
}

TEST_CASE("default grid reaches the analytic 1e-4 tail") {
  const TrafficModel tm(1.0, kDet);
  const auto g = default_ccdf_grid(PolicyId::B(2), tm, 50);
  CHECK(g.size() == 50);
  CHECK(g.front() == doctest::Approx(0.01));
  CHECK(deterministic_ccdf(PolicyId::B(2), tm, g.back()) == doctest::Approx(1e-4).epsilon(1e-3));
  const auto fallback = default_ccdf_grid(PolicyId::B(3), TrafficModel(1.0, kExp), 10);
  CHECK(fallback.back() == doctest::Approx(20.0));
}

TEST_CASE("trace replay: a larger FIFO buffer can be fresher") {
  // unit service, arrivals 0, 0.1, 0.2: B2 blocks 0.2, B3 keeps it and delivers it at t = 3
  SimConfig c = config(PolicyId::B(2), 1.0, kDet, 1);
  c.arrival_trace = {0.0, 0.1, 0.2};
  c.trace_end = 4.0;
  const auto b2 = run(c);
  c.policy = PolicyId::B(3);
  const auto b3 = run(c);
  CHECK(b2.path.epochs == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(b3.path.epochs == std::vector<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(b3.path.ages.back() == doctest::Approx(2.8));
  CHECK(b2.path.age_at(3.0) == doctest::Approx(2.9));
  const auto cmp = compare_paths(b2.path, b3.path);
  CHECK(cmp.violations == 1);
  REQUIRE(cmp.first_violation);
  CHECK(*cmp.first_violation == 3.0);
  CHECK(cmp.max_excess == doctest::Approx(0.1));
  // P2 serves 0.2 second and stays below B2 throughout
  c.policy = PolicyId::P(2);
  CHECK(compare_paths(run(c).path, b2.path).violations == 0);
  c.arrival_trace = {1.0, 0.5};
  CHECK_THROWS_AS(run(c), ArgumentError);
}

TEST_CASE("light traffic and the B2 tail") {
  for (auto p : {PolicyId::B(1), PolicyId::B(2), PolicyId::P(1), PolicyId::P(2)}) {
    const TrafficModel tm(0.01, kExp);
    const auto r = run(config(p, 0.01, kExp, 100000, 13));
    CHECK(std::abs(r.stats.time_avg_mean() / aoi_mean(p, tm) - 1.0) < 0.02);
  }
  auto c = config(PolicyId::B(2), 1.0, kExp, 1000000, 17);
  c.ccdf_grid = {0.0, 2.0, 1e6};
  c.record_path = false;
  const auto ccdf = run(c).stats.ccdf();
  CHECK(ccdf[0] == 1.0);
  CHECK(std::abs(ccdf[1] - 13.0 * std::exp(-2.0) / 3.0) < 0.005);
  CHECK(ccdf[2] == 0.0);
}

TEST_CASE("occupancy law is shared by B2 and P2 under message coupling too") {
  auto c = config(PolicyId::B(2), 1.5, kExp, 1000000, 19);
  c.record_path = false;
  const auto runs = coupled_run({PolicyId::B(2), PolicyId::P(2)}, c);
  for (int k = 0; k <= 2; ++k) {
    CHECK(std::abs(runs.at(PolicyId::B(2)).stats.occupancy_fraction(k) -
                   runs.at(PolicyId::P(2)).stats.occupancy_fraction(k)) < 0.005);
  }
}

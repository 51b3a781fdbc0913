#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aoilab/model.hpp"
#include "aoilab/sim.hpp"

namespace aoilab {

enum class Engine { analytic, simulate, both };
enum class Quantity { mean, sd, ccdf };

Engine parse_engine(std::string_view name);
Quantity parse_quantity(std::string_view name);
std::string engine_name(Engine e);
std::string quantity_name(Quantity q);

/// Simulation budget shared by sweeps, order checks and high-traffic checks.
struct SimBudget {
  long long segments = 200000;
  std::uint64_t seed = 1;
  int replications = 1;
  Coupling coupling = Coupling::by_message;
};

struct SweepSpec {
  std::vector<PolicyId> policies;
  /// Service law; lambda = rho / E[sigma] for each grid point.
  ServiceDistribution dist = ServiceDistribution::exponential(1.0);
  std::vector<double> rho_grid;
  Quantity quantity = Quantity::mean;
  /// Time points for Quantity::ccdf.
  std::vector<double> t_grid;
  Engine engine = Engine::analytic;
  SimBudget sim;

  void validate() const;
};

/// One (rho, policy, t) entry. A failed engine leaves its value empty and
/// records the reason; the rest of the sweep still runs.
struct SweepCell {
  double rho = 0.0;
  PolicyId policy;
  std::optional<double> t;
  std::optional<double> analytic;
  std::optional<double> simulated;
  std::optional<double> sim_standard_error;
  std::string analytic_error;
  std::string sim_error;

  std::optional<double> gap() const;
};

struct SweepTable {
  SweepSpec spec;
  std::vector<SweepCell> cells;  // rho-major, then policy, then t
};

/// Cells are independent and may run on `jobs` threads; the table order does
/// not depend on completion order.
SweepTable sweep(const SweepSpec& spec, int jobs = 1);

/// Named presets: exp-mean (exponential means), exp-ccdf (exponential tails),
/// det-mean (deterministic means), det-ccdf (deterministic tails).
SweepSpec preset(std::string_view name);
std::vector<std::string> preset_names();

/// Analytic CCDF: exact for deterministic service, numerical inversion otherwise.
double analytic_ccdf(PolicyId policy, const TrafficModel& traffic, double t);

enum class Relation { a_le_b, b_le_a, incomparable };
std::string relation_name(Relation r);

enum class OrderSource { analytic, simulate };

struct OrderVerdict {
  PolicyId a, b;
  Relation relation = Relation::incomparable;
  /// max over the grid of CCDF_a - CCDF_b (positive part breaks a <=st b).
  double max_violation = 0.0;
  /// max over the grid of CCDF_b - CCDF_a.
  double max_reverse = 0.0;
  std::vector<double> grid;
  OrderSource source = OrderSource::analytic;
};

/// Geometric grid covering both policies' default CCDF ranges.
std::vector<double> order_grid(PolicyId a, PolicyId b, const TrafficModel& traffic, int points = 200);

/// a <=st b when CCDF_a <= CCDF_b + tol on every grid point. The default
/// tolerance is 1e-6 for analytic CCDFs and three combined binomial standard
/// errors per point for simulated ones. When both directions hold, the one
/// with the larger margin is reported.
OrderVerdict order_check(PolicyId a, PolicyId b, const TrafficModel& traffic, std::vector<double> t_grid = {},
                         std::optional<double> tol = std::nullopt, OrderSource source = OrderSource::analytic,
                         const SimBudget& budget = {});

struct HighTrafficReport {
  PolicyId policy;
  double rho = 0.0;
  double limit_mean = 0.0, limit_variance = 0.0;
  double sim_mean = 0.0, sim_variance = 0.0, sim_mean_se = 0.0;
  /// sup over the grid of |simulated CCDF - inverted limit CCDF|.
  double ccdf_sup_gap = 0.0;
  std::vector<double> grid;
};

/// Simulation at rho_large against the limit transform. P1 is unsupported.
HighTrafficReport high_traffic_check(PolicyId policy, const ServiceDistribution& dist, double rho_large,
                                     const SimBudget& budget = {});

struct MonotonicityReport {
  double m = 0.0;
  std::vector<double> s;
  std::vector<double> second_derivative;
  /// "negative", "positive" or "mixed" over the probe points.
  std::string sign_pattern;
  /// The derivative criterion predicts L'' < 0 near zero exactly when m < 1.
  bool criterion_predicts_negative = false;
  bool consistent = false;
};

/// L_m'' at s in {1e-3, 1e-2, 1e-1} by five-point central differences.
MonotonicityReport monotonicity_probe(double m);

// Emitters: header row, fixed column order, 9 significant digits, '.' decimal.
std::string format_number(double x);
std::string to_csv(const SweepTable& table);
std::string to_json(const SweepTable& table);
std::string to_json(const OrderVerdict& v);
std::string to_json(const HighTrafficReport& r);
std::string to_json(const MonotonicityReport& r);
std::string to_json(const SimStats& stats);

}  // namespace aoilab

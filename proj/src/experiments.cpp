#include "aoilab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "aoilab/analytic.hpp"
#include "aoilab/error.hpp"
#include "aoilab/invert.hpp"

namespace aoilab {

namespace {


using nlohmann::json;

// Rounded to 9 significant digits; NaN and infinities become null.
json num(double x) {
  if (!std::isfinite(x)) {
    return nullptr;
  }
  return std::strtod(format_number(x).c_str(), nullptr);
}

json num(const std::optional<double>& x) { return x ? num(*x) : json(nullptr); }

json nums(const std::vector<double>& xs) {
  json out = json::array();
  for (double x : xs) {
    out.push_back(num(x));
  }
  return out;
}

TrafficModel at_rho(const ServiceDistribution& dist, double rho) { return TrafficModel(rho / dist.mean(), dist); }

SimStats simulate(PolicyId policy, const TrafficModel& traffic, const std::vector<double>& grid, const SimBudget& b) {
  SimConfig c;
  c.policy = policy;
  c.traffic = traffic;
  c.segments = b.segments;
  c.seed = b.seed;
  c.coupling = b.coupling;
  c.ccdf_grid = grid.empty() ? std::vector<double>{1.0 / traffic.mu()} : grid;
  c.record_path = false;
  return b.replications > 1 ? run_replications(c, b.replications) : run(c).stats;
}

template <class F>
void parallel_for(std::size_t count, int jobs, F&& body) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min<int>(jobs, static_cast<int>(count)); ++w) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& t : pool) {
    t.join();
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

std::string message_of(const std::exception& e) { return e.what(); }

}  // namespace

Engine parse_engine(std::string_view name) {
  if (name == "analytic") return Engine::analytic;
  if (name == "simulate" || name == "sim") return Engine::simulate;
  if (name == "both") return Engine::both;
  throw ArgumentError("unknown engine '" + std::string(name) + "' (analytic, simulate, both)");
}

Quantity parse_quantity(std::string_view name) {
  if (name == "mean") return Quantity::mean;
  if (name == "sd") return Quantity::sd;
  if (name == "ccdf") return Quantity::ccdf;
  throw ArgumentError("unknown quantity '" + std::string(name) + "' (mean, sd, ccdf)");
}

std::string engine_name(Engine e) {
  switch (e) {
    case Engine::analytic: return "analytic";
    case Engine::simulate: return "simulate";
    case Engine::both: return "both";
  }
  return "?";
}

std::string quantity_name(Quantity q) {
  switch (q) {
    case Quantity::mean: return "mean";
    case Quantity::sd: return "sd";
    case Quantity::ccdf: return "ccdf";
  }
  return "?";
}

void SweepSpec::validate() const {
  if (policies.empty() || rho_grid.empty()) {
    throw ArgumentError("sweep needs at least one policy and one rho");
  }
  for (double r : rho_grid) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw ArgumentError("rho values must be positive and finite");
    }
  }
  if (quantity == Quantity::ccdf && t_grid.empty()) {
    throw ArgumentError("a ccdf sweep needs a t grid");
  }
  for (double t : t_grid) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw ArgumentError("t values must be finite and nonnegative");
    }
  }
  if (engine != Engine::analytic && (sim.segments < 1 || sim.replications < 1)) {
    throw ArgumentError("simulation budget needs segments >= 1 and replications >= 1");
  }
}

std::optional<double> SweepCell::gap() const {
  if (analytic && simulated) {
    return std::abs(*analytic - *simulated);
  }
  return std::nullopt;
}

double analytic_ccdf(PolicyId policy, const TrafficModel& traffic, double t) {
  if (traffic.dist.family() == Family::deterministic) {
    return deterministic_ccdf(policy, traffic, t);
  }
  return invert_ccdf(aoi_transform(policy, traffic), t);
}

SweepTable sweep(const SweepSpec& spec, int jobs) {
  spec.validate();
  if (jobs < 1) {
    throw ArgumentError("jobs must be at least 1");
  }
  const std::size_t np = spec.policies.size();
  const std::size_t nt = spec.quantity == Quantity::ccdf ? spec.t_grid.size() : 1;
  SweepTable table{spec, {}};
  table.cells.resize(spec.rho_grid.size() * np * nt);

  parallel_for(spec.rho_grid.size() * np, jobs, [&](std::size_t task) {
    const double rho = spec.rho_grid[task / np];
    const PolicyId policy = spec.policies[task % np];
    const TrafficModel traffic = at_rho(spec.dist, rho);
    SweepCell* cells = &table.cells[task * nt];
    for (std::size_t k = 0; k < nt; ++k) {
      cells[k].rho = rho;
      cells[k].policy = policy;
      if (spec.quantity == Quantity::ccdf) {
        cells[k].t = spec.t_grid[k];
      }
    }
    if (spec.engine != Engine::simulate) {
      for (std::size_t k = 0; k < nt; ++k) {
        try {
          switch (spec.quantity) {
            case Quantity::mean: cells[k].analytic = aoi_mean(policy, traffic); break;
            case Quantity::sd: cells[k].analytic = aoi_sd(policy, traffic); break;
            case Quantity::ccdf: cells[k].analytic = analytic_ccdf(policy, traffic, spec.t_grid[k]); break;
          }
        } catch (const Error& e) {
          cells[k].analytic_error = message_of(e);
        }
      }
    }
    if (spec.engine != Engine::analytic) {
      try {
        const SimStats s = simulate(policy, traffic, spec.quantity == Quantity::ccdf ? spec.t_grid : std::vector<double>{},
                                    spec.sim);
        switch (spec.quantity) {
          case Quantity::mean:
            cells[0].simulated = s.time_avg_mean();
            cells[0].sim_standard_error = s.mean_standard_error();
            break;
          case Quantity::sd: cells[0].simulated = std::sqrt(s.variance()); break;
          case Quantity::ccdf: {
            const auto p = s.ccdf();
            for (std::size_t k = 0; k < nt; ++k) {
              cells[k].simulated = p[k];
              cells[k].sim_standard_error = std::sqrt(p[k] * (1.0 - p[k]) / static_cast<double>(s.departures));
            }
            break;
          }
        }
      } catch (const Error& e) {
        for (std::size_t k = 0; k < nt; ++k) {
          cells[k].sim_error = message_of(e);
        }
      }
    }
  });
  return table;
}

SweepSpec preset(std::string_view name) {
  SweepSpec s;
  auto geometric = [](double lo, double hi, int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) {
      g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
    }
    return g;
  };
  const std::vector<double> rhos = geometric(0.1, 100.0, 16);
  if (name == "exp-mean") {
    s.policies = {PolicyId::P(1), PolicyId::P(2), PolicyId::B(2), PolicyId::B(1)};
    s.rho_grid = rhos;
  } else if (name == "exp-ccdf") {
    s.policies = {PolicyId::P(1), PolicyId::P(2), PolicyId::B(2), PolicyId::B(1)};
    s.rho_grid = {0.5, 5.0};
    s.quantity = Quantity::ccdf;
  } else if (name == "det-mean") {
    s.policies = {PolicyId::P(2), PolicyId::B(2), PolicyId::P(1), PolicyId::B(1)};
    s.dist = ServiceDistribution::deterministic(1.0);
    s.rho_grid = geometric(0.1, 10.0, 11);
  } else if (name == "det-ccdf") {
    s.policies = {PolicyId::P(2), PolicyId::B(2), PolicyId::P(1), PolicyId::B(1)};
    s.dist = ServiceDistribution::deterministic(1.0);
    s.rho_grid = {0.5, 2.0};
    s.quantity = Quantity::ccdf;
  } else {
    throw ArgumentError("unknown preset '" + std::string(name) + "' (exp-mean, exp-ccdf, det-mean, det-ccdf)");
  }
  if (s.quantity == Quantity::ccdf) {
    for (int i = 0; i <= 60; ++i) {
      s.t_grid.push_back(0.25 * i);
    }
  }
  return s;
}

std::vector<std::string> preset_names() { return {"exp-mean", "exp-ccdf", "det-mean", "det-ccdf"}; }

std::string relation_name(Relation r) {
  switch (r) {
    case Relation::a_le_b: return "a<=st b";
    case Relation::b_le_a: return "b<=st a";
    case Relation::incomparable: return "incomparable";
  }
  return "?";
}

std::vector<double> order_grid(PolicyId a, PolicyId b, const TrafficModel& traffic, int points) {
  const auto ga = default_ccdf_grid(a, traffic, points), gb = default_ccdf_grid(b, traffic, points);
  const double lo = std::min(ga.front(), gb.front()), hi = std::max(ga.back(), gb.back());
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) {
    grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
  }
  grid.back() = hi;
  return grid;
}

OrderVerdict order_check(PolicyId a, PolicyId b, const TrafficModel& traffic, std::vector<double> t_grid,
                         std::optional<double> tol, OrderSource source, const SimBudget& budget) {
  if (tol && !(*tol >= 0.0)) {
    throw ArgumentError("tolerance must be nonnegative");
  }
  if (t_grid.empty()) {
    t_grid = order_grid(a, b, traffic);
  }
  const std::size_t n = t_grid.size();
  std::vector<double> fa(n), fb(n), slack(n, tol.value_or(1e-6));
  if (source == OrderSource::analytic) {
    for (std::size_t i = 0; i < n; ++i) {
      fa[i] = analytic_ccdf(a, traffic, t_grid[i]);
      fb[i] = analytic_ccdf(b, traffic, t_grid[i]);
    }
  } else {
    const SimStats sa = simulate(a, traffic, t_grid, budget), sb = simulate(b, traffic, t_grid, budget);
    fa = sa.ccdf();
    fb = sb.ccdf();
    if (!tol) {
      for (std::size_t i = 0; i < n; ++i) {
        slack[i] = 3.0 * std::sqrt(fa[i] * (1.0 - fa[i]) / static_cast<double>(sa.departures) +
                                   fb[i] * (1.0 - fb[i]) / static_cast<double>(sb.departures));
      }
    }
  }
  OrderVerdict v{a, b, Relation::incomparable, -1.0, -1.0, t_grid, source};
  bool a_le = true, b_le = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = fa[i] - fb[i];
    v.max_violation = std::max(v.max_violation, d);
    v.max_reverse = std::max(v.max_reverse, -d);
    a_le = a_le && d <= slack[i];
    b_le = b_le && -d <= slack[i];
  }
  if (a_le && b_le) {
    v.relation = v.max_reverse >= v.max_violation ? Relation::a_le_b : Relation::b_le_a;
  } else if (a_le) {
    v.relation = Relation::a_le_b;
  } else if (b_le) {
    v.relation = Relation::b_le_a;
  }
  return v;
}

HighTrafficReport high_traffic_check(PolicyId policy, const ServiceDistribution& dist, double rho_large,
                                     const SimBudget& budget) {
  if (policy.preemptive()) {
    throw UnsupportedError("P1 has no distribution-free high-traffic limit");
  }
  if (!(rho_large >= 50.0)) {
    throw ArgumentError("high-traffic checks need rho >= 50");
  }
  const auto limit = high_traffic_transform(policy, dist);
  const bool two_sided = dist.family() != Family::generic;
  HighTrafficReport r;
  r.policy = policy;
  r.rho = rho_large;
  r.limit_mean = transform_mean(limit.eval, two_sided);
  r.limit_variance = transform_variance(limit.eval, two_sided);
  const double mean = dist.mean();
  for (int i = 1; i <= 40; ++i) {
    r.grid.push_back(0.2 * i * mean);
  }
  const TrafficModel traffic = at_rho(dist, rho_large);
  const SimStats s = simulate(policy, traffic, r.grid, budget);
  r.sim_mean = s.time_avg_mean();
  r.sim_variance = s.variance();
  r.sim_mean_se = s.mean_standard_error();
  const auto sim_ccdf = s.ccdf();
  InversionConfig loose;
  loose.abs_tol = 1e-5;
  r.ccdf_sup_gap = 0.0;
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    try {
      r.ccdf_sup_gap = std::max(r.ccdf_sup_gap, std::abs(sim_ccdf[i] - invert_ccdf(limit, r.grid[i], loose)));
    } catch (const NumericError&) {
      // the limit CCDF has kinks for deterministic service; skip unresolved points
    }
  }
  return r;
}

MonotonicityReport monotonicity_probe(double m) {
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw ArgumentError("m must be positive");
  }
  MonotonicityReport r;
  r.m = m;
  r.s = {1e-3, 1e-2, 1e-1};
  auto l = [m](double s) { return lm_transform(m, s).real(); };
  int negatives = 0;
  for (double s : r.s) {
    const double h = s / 4.0;
    const double d2 = (-l(s + 2 * h) + 16 * l(s + h) - 30 * l(s) + 16 * l(s - h) - l(s - 2 * h)) / (12 * h * h);
    r.second_derivative.push_back(d2);
    negatives += d2 < 0.0;
  }
  r.sign_pattern = negatives == 3 ? "negative" : negatives == 0 ? "positive" : "mixed";
  r.criterion_predicts_negative = m < 1.0;
  r.consistent = (r.second_derivative.front() < 0.0) == r.criterion_predicts_negative;
  return r;
}

std::string format_number(double x) {
  if (std::isnan(x)) {
    return "nan";
  }
  if (std::isinf(x)) {
    return x > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

std::string to_csv(const SweepTable& table) {
  const bool with_t = table.spec.quantity == Quantity::ccdf;
  std::ostringstream out;
  out << "rho,policy," << (with_t ? "t," : "") << "quantity,analytic,simulated,sim_se,abs_gap,status\n";
  auto field = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string(); };
  for (const auto& c : table.cells) {
    std::string status = "ok";
    if (!c.analytic_error.empty() && !c.sim_error.empty()) {
      status = "error";
    } else if (!c.analytic_error.empty()) {
      status = "analytic_unsupported";
    } else if (!c.sim_error.empty()) {
      status = "sim_error";
    }
    out << format_number(c.rho) << ',' << c.policy.token() << ',';
    if (with_t) {
      out << format_number(*c.t) << ',';
    }
    out << quantity_name(table.spec.quantity) << ',' << field(c.analytic) << ',' << field(c.simulated) << ','
        << field(c.sim_standard_error) << ',' << field(c.gap()) << ',' << status << '\n';
  }
  return out.str();
}

std::string to_json(const SweepTable& table) {
  json rows = json::array();
  for (const auto& c : table.cells) {
    json row{{"rho", num(c.rho)},
             {"policy", c.policy.token()},
             {"analytic", num(c.analytic)},
             {"simulated", num(c.simulated)},
             {"sim_se", num(c.sim_standard_error)},
             {"abs_gap", num(c.gap())}};
    if (c.t) {
      row["t"] = num(*c.t);
    }
    if (!c.analytic_error.empty()) {
      row["analytic_error"] = c.analytic_error;
    }
    if (!c.sim_error.empty()) {
      row["sim_error"] = c.sim_error;
    }
    rows.push_back(std::move(row));
  }
  json policies = json::array();
  for (auto p : table.spec.policies) {
    policies.push_back(p.token());
  }
  return json{{"quantity", quantity_name(table.spec.quantity)},
              {"engine", engine_name(table.spec.engine)},
              {"dist", table.spec.dist.spec()},
              {"policies", policies},
              {"cells", rows}}
      .dump(2);
}

std::string to_json(const OrderVerdict& v) {
  return json{{"a", v.a.token()},
              {"b", v.b.token()},
              {"verdict", relation_name(v.relation)},
              {"source", v.source == OrderSource::analytic ? "analytic" : "simulate"},
              {"max_violation", num(v.max_violation)},
              {"max_reverse", num(v.max_reverse)},
              {"grid_points", v.grid.size()},
              {"t_min", num(v.grid.front())},
              {"t_max", num(v.grid.back())}}
      .dump(2);
}

std::string to_json(const HighTrafficReport& r) {
  return json{{"policy", r.policy.token()},
              {"rho", num(r.rho)},
              {"limit_mean", num(r.limit_mean)},
              {"limit_variance", num(r.limit_variance)},
              {"sim_mean", num(r.sim_mean)},
              {"sim_mean_se", num(r.sim_mean_se)},
              {"sim_variance", num(r.sim_variance)},
              {"ccdf_sup_gap", num(r.ccdf_sup_gap)}}
      .dump(2);
}

std::string to_json(const MonotonicityReport& r) {
  return json{{"m", num(r.m)},
              {"s", nums(r.s)},
              {"second_derivative", nums(r.second_derivative)},
              {"sign_pattern", r.sign_pattern},
              {"criterion_predicts_negative", r.criterion_predicts_negative},
              {"consistent", r.consistent}}
      .dump(2);
}

std::string to_json(const SimStats& s) {
  json palm = json::object();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (s.buffer_cells >= 2) {
        const auto [count, mean] = s.palm_conditional(i, j);
        palm[std::to_string(i) + std::to_string(j)] = {{"count", count}, {"mean_age", num(mean)}};
      }
    }
  }
  json occupancy = json::array();
  for (int k = 0; k <= s.buffer_cells; ++k) {
    occupancy.push_back(num(s.occupancy_fraction(k)));
  }
  return json{{"time_avg_mean", num(s.time_avg_mean())},
              {"mean_se", num(s.mean_standard_error())},
              {"time_avg_second_moment", num(s.time_avg_second_moment())},
              {"variance", num(s.variance())},
              {"departures", s.departures},
              {"arrivals", s.arrivals},
              {"total_time", num(s.total_time)},
              {"mean_segment", num(s.mean_segment())},
              {"palm_k0_frac", num(s.palm_k0_frac())},
              {"k_lag1_correlation", num(s.k_lag1_correlation())},
              {"palm_conditional", palm},
              {"occupancy", occupancy},
              {"ccdf", {{"t", nums(s.ccdf_grid)}, {"p", nums(s.ccdf())}}}}
      .dump(2);
}

}  // namespace aoilab

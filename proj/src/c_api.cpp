#include "aoilab/aoilab.h"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "aoilab/analytic.hpp"
#include "aoilab/error.hpp"
#include "aoilab/experiments.hpp"
#include "aoilab/invert.hpp"
#include "aoilab/sim.hpp"

using namespace aoilab;

struct aoilab_model {
  PolicyId policy;
  TrafficModel traffic;
};

struct aoilab_sim {
  aoilab_model model;
  SimConfig cfg;
  int replications = 1;
  int jobs = 1;
  std::optional<SimRun> result;
  std::optional<SimStats> merged;

  const SimStats* stats() const {
    if (merged) return &*merged;
    if (result) return &result->stats;
    return nullptr;
  }
};

namespace {

thread_local std::string last_error;

aoilab_status fail(aoilab_status code, std::string message) {
  last_error = std::move(message);
  return code;
}

// Runs `body`, translating library exceptions into status codes.
template <class F>
aoilab_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return AOILAB_OK;
  } catch (const DomainError& e) {
    return fail(AOILAB_E_DOMAIN, e.what());
  } catch (const ArgumentError& e) {
    return fail(AOILAB_E_ARGUMENT, e.what());
  } catch (const UnsupportedError& e) {
    return fail(AOILAB_E_UNSUPPORTED, e.what());
  } catch (const NumericError& e) {
    std::ostringstream msg;
    msg.precision(12);
    msg << e.what() << " (estimates " << e.first_estimate() << " and " << e.second_estimate() << ")";
    return fail(AOILAB_E_NUMERIC, msg.str());
  } catch (const SimulationError& e) {
    return fail(AOILAB_E_SIMULATION, e.what());
  } catch (const std::bad_alloc&) {
    return fail(AOILAB_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AOILAB_E_INTERNAL, e.what());
  } catch (...) {
    return fail(AOILAB_E_INTERNAL, "unknown failure");
  }
}

#define AOILAB_REQUIRE(ptr)                                           \
  do {                                                                \
    if ((ptr) == nullptr) return fail(AOILAB_E_NULL, #ptr " is NULL"); \
  } while (0)

char* copy_out(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) {
    throw std::bad_alloc();
  }
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

using Options = std::map<std::string, std::string>;

Options parse_options(const char* text) {
  Options out;
  if (text == nullptr) {
    return out;
  }
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ';')) {
    std::istringstream lines(item);
    for (std::string line; std::getline(lines, line);) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
      const auto eq = line.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ArgumentError("option '" + line + "' is not key=value");
      }
      out[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  return out;
}

// Rejects keys the caller does not consume.
void only(const Options& o, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : o) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) {
      throw ArgumentError("unknown option '" + key + "'");
    }
  }
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ArgumentError("option " + key + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> number_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s)) out.push_back(parse_number<double>(key, item));
  return out;
}

Coupling parse_coupling(const std::string& s) {
  if (s == "message") return Coupling::by_message;
  if (s == "service") return Coupling::by_service_order;
  throw ArgumentError("coupling must be 'message' or 'service', not '" + s + "'");
}

InversionConfig inversion_options(const char* text) {
  const Options o = parse_options(text);
  only(o, {"method", "nodes", "abs_tol"});
  InversionConfig cfg;
  if (o.count("method")) cfg.method = parse_inversion_method(o.at("method"));
  if (o.count("nodes")) cfg.nodes = parse_number<int>("nodes", o.at("nodes"));
  if (o.count("abs_tol")) cfg.abs_tol = parse_number<double>("abs_tol", o.at("abs_tol"));
  cfg.validate();
  return cfg;
}

void apply_sim_options(const Options& o, SimConfig& cfg, int& replications, int& jobs) {
  for (const auto& [key, v] : o) {
    if (key == "segments") cfg.segments = parse_number<long long>(key, v);
    else if (key == "warmup") cfg.warmup_segments = parse_number<long long>(key, v);
    else if (key == "max_arrivals") cfg.max_arrivals = parse_number<long long>(key, v);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "replication") cfg.replication = parse_number<std::uint64_t>(key, v);
    else if (key == "replications") replications = parse_number<int>(key, v);
    else if (key == "jobs") jobs = parse_number<int>(key, v);
    else if (key == "coupling") cfg.coupling = parse_coupling(v);
    else if (key == "batches") cfg.batches = parse_number<int>(key, v);
    else if (key == "grid") cfg.ccdf_grid = number_list(key, v);
    else if (key == "max_events") cfg.max_events_per_segment = parse_number<long long>(key, v);
    else if (key == "record_path") cfg.record_path = parse_number<int>(key, v) != 0;
    else throw ArgumentError("unknown option '" + key + "'");
  }
  if (replications < 1 || jobs < 1) {
    throw ArgumentError("replications and jobs must be at least 1");
  }
  cfg.validate();
}

SimBudget budget_options(const Options& o) {
  SimBudget b;
  if (o.count("segments")) b.segments = parse_number<long long>("segments", o.at("segments"));
  if (o.count("seed")) b.seed = parse_number<std::uint64_t>("seed", o.at("seed"));
  if (o.count("replications")) b.replications = parse_number<int>("replications", o.at("replications"));
  if (o.count("coupling")) b.coupling = parse_coupling(o.at("coupling"));
  if (b.segments < 1 || b.replications < 1) {
    throw ArgumentError("segments and replications must be at least 1");
  }
  return b;
}

std::vector<PolicyId> policy_list(const std::string& s) {
  std::vector<PolicyId> out;
  for (const auto& token : split(s)) out.push_back(parse_policy(token));
  if (out.empty()) throw ArgumentError("empty policy list");
  return out;
}

std::string require_text(const char* s, const char* what) {
  if (s == nullptr) throw ArgumentError(std::string(what) + " is NULL");
  return s;
}

}  // namespace

extern "C" {

const char* aoilab_version(void) { return "0.1.0"; }

const char* aoilab_status_name(aoilab_status status) {
  switch (status) {
    case AOILAB_OK: return "ok";
    case AOILAB_E_NULL: return "null argument";
    case AOILAB_E_ARGUMENT: return "invalid argument";
    case AOILAB_E_DOMAIN: return "domain error";
    case AOILAB_E_UNSUPPORTED: return "unsupported";
    case AOILAB_E_NUMERIC: return "numeric error";
    case AOILAB_E_SIMULATION: return "simulation error";
    case AOILAB_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* aoilab_last_error(void) { return last_error.c_str(); }

void aoilab_string_free(char* s) { std::free(s); }

aoilab_status aoilab_model_create(const char* policy, const char* dist, double lambda, aoilab_model** out) {
  AOILAB_REQUIRE(policy);
  AOILAB_REQUIRE(dist);
  AOILAB_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new aoilab_model{parse_policy(policy), TrafficModel(lambda, parse_distribution(dist))}; });
}

void aoilab_model_destroy(aoilab_model* model) { delete model; }

aoilab_status aoilab_model_rho(const aoilab_model* model, double* out) {
  AOILAB_REQUIRE(model);
  AOILAB_REQUIRE(out);
  return guarded([&] { *out = model->traffic.rho(); });
}

aoilab_status aoilab_mean(const aoilab_model* model, double* out) {
  AOILAB_REQUIRE(model);
  AOILAB_REQUIRE(out);
  return guarded([&] { *out = aoi_mean(model->policy, model->traffic); });
}

aoilab_status aoilab_variance(const aoilab_model* model, double* out) {
  AOILAB_REQUIRE(model);
  AOILAB_REQUIRE(out);
  return guarded([&] { *out = aoi_variance(model->policy, model->traffic); });
}

aoilab_status aoilab_transform(const aoilab_model* model, double s_re, double s_im, double* out_re,
                               double* out_im) {
  AOILAB_REQUIRE(model);
  AOILAB_REQUIRE(out_re);
  AOILAB_REQUIRE(out_im);
  return guarded([&] {
    const Complex v = aoi_lt(model->policy, model->traffic, Complex(s_re, s_im));
    *out_re = v.real();
    *out_im = v.imag();
  });
}

aoilab_status aoilab_high_traffic_transform(const aoilab_model* model, double s, double* out) {
  AOILAB_REQUIRE(model);
  AOILAB_REQUIRE(out);
  return guarded([&] { *out = high_traffic_limit_lt(model->policy, model->traffic.dist, s).real(); });
}

aoilab_status aoilab_density(const aoilab_model* model, double t, const char* options, double* out) {
  AOILAB_REQUIRE(model);
  AOILAB_REQUIRE(out);
  return guarded([&] {
    const InversionConfig cfg = inversion_options(options);
    const bool exact = model->traffic.dist.family() == Family::deterministic &&
                       (options == nullptr || parse_options(options).count("method") == 0);
    if (exact) {
      *out = deterministic_density(model->policy, model->traffic, t);
    } else if (model->policy.preemptive() && model->traffic.dist.family() == Family::deterministic) {
      const double d = model->traffic.dist.mean();
      *out = det_p1_density(model->traffic.rho(), t / d, cfg) / d;
    } else {
      *out = invert_density(aoi_transform(model->policy, model->traffic), t, cfg);
    }
  });
}

aoilab_status aoilab_ccdf(const aoilab_model* model, double t, const char* options, double* out) {
  AOILAB_REQUIRE(model);
  AOILAB_REQUIRE(out);
  return guarded([&] {
    const InversionConfig cfg = inversion_options(options);
    const bool exact = model->traffic.dist.family() == Family::deterministic &&
                       (options == nullptr || parse_options(options).count("method") == 0);
    *out = exact ? deterministic_ccdf(model->policy, model->traffic, t)
                 : invert_ccdf(aoi_transform(model->policy, model->traffic), t, cfg);
  });
}

aoilab_status aoilab_detp1_density(double rho, double t, const char* options, double* out) {
  AOILAB_REQUIRE(out);
  return guarded([&] { *out = det_p1_density(rho, t, inversion_options(options)); });
}

aoilab_status aoilab_detp1_moment(double rho, int p, double* out) {
  AOILAB_REQUIRE(out);
  return guarded([&] { *out = det_p1_moment(rho, p); });
}

aoilab_status aoilab_sim_create(const aoilab_model* model, aoilab_sim** out) {
  AOILAB_REQUIRE(model);
  AOILAB_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto sim = std::make_unique<aoilab_sim>(aoilab_sim{*model, SimConfig{}, 1, 1, std::nullopt, std::nullopt});
    sim->cfg.policy = model->policy;
    sim->cfg.traffic = model->traffic;
    *out = sim.release();
  });
}

void aoilab_sim_destroy(aoilab_sim* sim) { delete sim; }

aoilab_status aoilab_sim_configure(aoilab_sim* sim, const char* options) {
  AOILAB_REQUIRE(sim);
  return guarded([&] {
    SimConfig cfg = sim->cfg;
    int replications = sim->replications, jobs = sim->jobs;
    apply_sim_options(parse_options(options), cfg, replications, jobs);
    sim->cfg = std::move(cfg);
    sim->replications = replications;
    sim->jobs = jobs;
  });
}

aoilab_status aoilab_sim_run(aoilab_sim* sim) {
  AOILAB_REQUIRE(sim);
  return guarded([&] {
    sim->result.reset();
    sim->merged.reset();
    if (sim->replications > 1) {
      sim->merged = run_replications(sim->cfg, sim->replications, sim->jobs);
    } else {
      sim->result = run(sim->cfg);
    }
  });
}

aoilab_status aoilab_sim_mean(const aoilab_sim* sim, double* out) {
  AOILAB_REQUIRE(sim);
  AOILAB_REQUIRE(out);
  if (sim->stats() == nullptr) return fail(AOILAB_E_ARGUMENT, "simulation has not been run");
  *out = sim->stats()->time_avg_mean();
  return AOILAB_OK;
}

aoilab_status aoilab_sim_variance(const aoilab_sim* sim, double* out) {
  AOILAB_REQUIRE(sim);
  AOILAB_REQUIRE(out);
  if (sim->stats() == nullptr) return fail(AOILAB_E_ARGUMENT, "simulation has not been run");
  *out = sim->stats()->variance();
  return AOILAB_OK;
}

aoilab_status aoilab_sim_stats_json(const aoilab_sim* sim, char** out) {
  AOILAB_REQUIRE(sim);
  AOILAB_REQUIRE(out);
  if (sim->stats() == nullptr) return fail(AOILAB_E_ARGUMENT, "simulation has not been run");
  return guarded([&] { *out = copy_out(to_json(*sim->stats())); });
}

aoilab_status aoilab_sim_path_csv(const aoilab_sim* sim, char** out) {
  AOILAB_REQUIRE(sim);
  AOILAB_REQUIRE(out);
  if (sim->stats() == nullptr) return fail(AOILAB_E_ARGUMENT, "simulation has not been run");
  return guarded([&] {
    std::string csv = "epoch,age,occupancy\n";
    if (sim->result) {
      const AoiPath& p = sim->result->path;
      for (std::size_t k = 0; k < p.epochs.size(); ++k) {
        csv += format_number(p.epochs[k]) + ',' + format_number(p.ages[k]) + ',' + std::to_string(p.occupancy[k]) + '\n';
      }
    }
    *out = copy_out(csv);
  });
}

aoilab_status aoilab_sweep(const char* options, char** out) {
  AOILAB_REQUIRE(out);
  return guarded([&] {
    const Options o = parse_options(options);
    only(o, {"preset", "policies", "dist", "rho", "quantity", "t", "engine", "segments", "seed", "replications",
             "coupling", "jobs", "format"});
    SweepSpec spec = o.count("preset") ? preset(o.at("preset")) : SweepSpec{};
    if (o.count("policies")) spec.policies = policy_list(o.at("policies"));
    if (o.count("dist")) spec.dist = parse_distribution(o.at("dist"));
    if (o.count("rho")) spec.rho_grid = number_list("rho", o.at("rho"));
    if (o.count("quantity")) spec.quantity = parse_quantity(o.at("quantity"));
    if (o.count("t")) spec.t_grid = number_list("t", o.at("t"));
    if (o.count("engine")) spec.engine = parse_engine(o.at("engine"));
    spec.sim = budget_options(o);
    const int jobs = o.count("jobs") ? parse_number<int>("jobs", o.at("jobs")) : 1;
    const std::string format = o.count("format") ? o.at("format") : "csv";
    if (format != "csv" && format != "json") {
      throw ArgumentError("format must be csv or json");
    }
    const SweepTable table = sweep(spec, jobs);
    *out = copy_out(format == "csv" ? to_csv(table) : to_json(table));
  });
}

aoilab_status aoilab_order(const char* a, const char* b, const char* dist, double lambda, const char* options,
                           char** out_json) {
  AOILAB_REQUIRE(out_json);
  return guarded([&] {
    const Options o = parse_options(options);
    only(o, {"t", "tol", "source", "segments", "seed", "replications", "coupling"});
    const TrafficModel traffic(lambda, parse_distribution(require_text(dist, "dist")));
    std::optional<double> tol;
    if (o.count("tol")) tol = parse_number<double>("tol", o.at("tol"));
    OrderSource source = OrderSource::analytic;
    if (o.count("source")) {
      const auto& s = o.at("source");
      if (s == "simulate" || s == "sim") source = OrderSource::simulate;
      else if (s != "analytic") throw ArgumentError("source must be analytic or simulate");
    }
    const auto v = order_check(parse_policy(require_text(a, "a")), parse_policy(require_text(b, "b")), traffic,
                               o.count("t") ? number_list("t", o.at("t")) : std::vector<double>{}, tol, source,
                               budget_options(o));
    *out_json = copy_out(to_json(v));
  });
}

aoilab_status aoilab_pathwise(const char* policies, const char* dist, double lambda, const char* options,
                              char** out_json) {
  AOILAB_REQUIRE(out_json);
  return guarded([&] {
    const auto list = policy_list(require_text(policies, "policies"));
    if (list.size() < 2) {
      throw ArgumentError("pathwise comparison needs at least two policies");
    }
    SimConfig cfg;
    cfg.traffic = TrafficModel(lambda, parse_distribution(require_text(dist, "dist")));
    cfg.coupling = Coupling::by_service_order;
    cfg.max_arrivals = 100000;
    cfg.ccdf_grid = {1.0};
    int replications = 1, jobs = 1;
    apply_sim_options(parse_options(options), cfg, replications, jobs);
    cfg.record_path = true;
    const auto runs = coupled_run(list, cfg);
    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t i = 0; i + 1 < list.size(); ++i) {
      const auto cmp = compare_paths(runs.at(list[i]).path, runs.at(list[i + 1]).path);
      pairs.push_back({{"a", list[i].token()},
                       {"b", list[i + 1].token()},
                       {"max_excess", cmp.max_excess},
                       {"violations", cmp.violations},
                       {"epochs_checked", cmp.epochs_checked},
                       {"first_violation", cmp.first_violation ? nlohmann::json(*cmp.first_violation) : nullptr},
                       {"holds", cmp.violations == 0}});
    }
    const nlohmann::json report{{"dist", cfg.traffic.dist.spec()},
                                {"lambda", lambda},
                                {"coupling", cfg.coupling == Coupling::by_message ? "message" : "service"},
                                {"seed", cfg.seed},
                                {"pairs", pairs}};
    *out_json = copy_out(report.dump(2));
  });
}

aoilab_status aoilab_high_traffic_check(const char* policy, const char* dist, double rho, const char* options,
                                        char** out_json) {
  AOILAB_REQUIRE(out_json);
  return guarded([&] {
    const Options o = parse_options(options);
    only(o, {"segments", "seed", "replications", "coupling"});
    const auto r = high_traffic_check(parse_policy(require_text(policy, "policy")),
                                      parse_distribution(require_text(dist, "dist")), rho, budget_options(o));
    *out_json = copy_out(to_json(r));
  });
}

aoilab_status aoilab_monotonicity_probe(double m, char** out_json) {
  AOILAB_REQUIRE(out_json);
  return guarded([&] { *out_json = copy_out(to_json(monotonicity_probe(m))); });
}

}  // extern "C"

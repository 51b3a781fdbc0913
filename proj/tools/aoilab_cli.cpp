// aoilab command-line front end. Talks to the library only through aoilab.h.
#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aoilab/aoilab.h"

using nlohmann::json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kNumeric = 3, kSimulation = 4 };

// Carries a library status out of a subcommand.
struct Failure {
  aoilab_status status;
  std::string message;
};

void check(aoilab_status s) {
  if (s != AOILAB_OK) {
    throw Failure{s, aoilab_last_error()};
  }
}

int exit_code(aoilab_status s) {
  switch (s) {
    case AOILAB_OK: return kOk;
    case AOILAB_E_NULL:
    case AOILAB_E_ARGUMENT:
    case AOILAB_E_DOMAIN:
    case AOILAB_E_UNSUPPORTED: return kUsage;
    case AOILAB_E_NUMERIC: return kNumeric;
    case AOILAB_E_SIMULATION: return kSimulation;
    default: return kInternal;
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  aoilab_string_free(s);
  return out;
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 9);
  return std::string(buf, r.ptr);
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (double x : xs) out += (out.empty() ? "" : ",") + fmt(x);
  return out;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Failure{AOILAB_E_INTERNAL, "sha256 failed"};
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

// Every option of a subcommand with its resolved value (given or default).
json resolved_config(const CLI::App* sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_type_size() == 0) {
      cfg[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      std::string joined;
      for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      cfg[name] = joined;
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

struct Run {
  explicit Run(const CLI::App* s) : sub(s) {}

  const CLI::App* sub;
  std::optional<std::uint64_t> seed;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest

  json manifest() const {
    json files = json::array();
    for (const auto& [path, digest] : outputs) files.push_back({{"path", path}, {"sha256", digest}});
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {{"command", sub->get_name()},
            {"config", resolved_config(sub)},
            {"seed", seed ? json(*seed) : json(nullptr)},
            {"tool_version", aoilab_version()},
            {"timing", {{"timestamp", utc_now()}, {"wall_clock_seconds", wall}}},
            {"outputs", files}};
  }

  // Writes to `path`, or stdout when empty; files get a sidecar manifest.
  void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
      std::cout << text;
      if (!text.empty() && text.back() != '\n') std::cout << '\n';
      return;
    }
    write_file(path, text);
    outputs.emplace_back(path, sha256_hex(text));
  }

  void finish() {
    const std::string text = manifest().dump(2) + "\n";
    for (const auto& output : outputs) {
      write_file(output.first + ".manifest.json", text);
    }
  }

  static void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Failure{AOILAB_E_ARGUMENT, "cannot write " + path};
  }
};

struct Model {
  aoilab_model* m = nullptr;
  Model(const std::string& policy, const std::string& dist, double lambda) {
    check(aoilab_model_create(policy.c_str(), dist.c_str(), lambda, &m));
  }
  ~Model() { aoilab_model_destroy(m); }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
};

std::string inversion_options(const std::string& method, int nodes, double abs_tol) {
  std::string o = "nodes=" + std::to_string(nodes) + ";abs_tol=" + fmt(abs_tol);
  if (!method.empty()) o += ";method=" + method;
  return o;
}

// ---- analyze

struct AnalyzeArgs {
  std::string policy = "b2", dist = "exp:1", format = "csv", out, method;
  double lambda = 1.0;
  std::vector<std::string> quantities{"mean"};
  std::vector<double> s{1.0}, t{1.0};
  int nodes = 64;
  double abs_tol = 1e-8;
};

void analyze(const AnalyzeArgs& a, Run& run) {
  const Model model(a.policy, a.dist, a.lambda);
  const std::string inv = inversion_options(a.method, a.nodes, a.abs_tol);
  json rows = json::array();
  auto row = [&](const std::string& q, std::optional<double> arg, auto&& eval) {
    double v = NAN;
    const aoilab_status st = eval(v);
    json r{{"quantity", q}, {"arg", arg ? json(*arg) : json(nullptr)}};
    if (st == AOILAB_OK) {
      r["value"] = v;
      r["status"] = "ok";
    } else if (st == AOILAB_E_UNSUPPORTED) {
      r["value"] = nullptr;
      r["status"] = "unsupported";
      r["detail"] = aoilab_last_error();
    } else {
      check(st);
    }
    rows.push_back(r);
  };
  for (const auto& q : a.quantities) {
    if (q == "mean") {
      row(q, std::nullopt, [&](double& v) { return aoilab_mean(model.m, &v); });
    } else if (q == "variance" || q == "sd") {
      row(q, std::nullopt, [&](double& v) {
        const auto st = aoilab_variance(model.m, &v);
        if (q == "sd") v = std::sqrt(v);
        return st;
      });
    } else if (q == "lt" || q == "limit") {
      for (double s : a.s) {
        row(q, s, [&](double& v) {
          double im = 0.0;
          return q == "lt" ? aoilab_transform(model.m, s, 0.0, &v, &im) : aoilab_high_traffic_transform(model.m, s, &v);
        });
      }
    } else if (q == "density" || q == "ccdf") {
      for (double t : a.t) {
        row(q, t, [&](double& v) {
          return q == "density" ? aoilab_density(model.m, t, inv.c_str(), &v) : aoilab_ccdf(model.m, t, inv.c_str(), &v);
        });
      }
    } else {
      throw Failure{AOILAB_E_ARGUMENT, "unknown quantity '" + q + "' (mean, sd, variance, lt, limit, density, ccdf)"};
    }
  }
  if (a.format == "json") {
    run.emit(json{{"policy", a.policy}, {"dist", a.dist}, {"lambda", a.lambda}, {"rows", rows}}.dump(2), a.out);
    return;
  }
  std::string csv = "policy,dist,lambda,quantity,arg,value,status\n";
  for (const auto& r : rows) {
    csv += a.policy + ',' + a.dist + ',' + fmt(a.lambda) + ',' + r["quantity"].get<std::string>() + ',' +
           (r["arg"].is_null() ? "" : fmt(r["arg"].get<double>())) + ',' +
           (r["value"].is_null() ? "" : fmt(r["value"].get<double>())) + ',' + r["status"].get<std::string>() + '\n';
  }
  run.emit(csv, a.out);
}

// ---- simulate

struct SimulateArgs {
  std::string policy = "b2", dist = "exp:1", coupling = "message", out, path_out;
  double lambda = 1.0;
  long long segments = 100000;
  std::optional<long long> warmup, max_arrivals, max_events;
  std::uint64_t seed = 1;
  int replications = 1, jobs = 1, batches = 50;
  std::vector<double> grid;
};

std::string sim_options(const SimulateArgs& a, bool record_path) {
  std::ostringstream o;
  o << "segments=" << a.segments << ";seed=" << a.seed << ";replications=" << a.replications << ";jobs=" << a.jobs
    << ";batches=" << a.batches << ";coupling=" << a.coupling << ";record_path=" << (record_path ? 1 : 0);
  if (a.warmup) o << ";warmup=" << *a.warmup;
  if (a.max_arrivals) o << ";max_arrivals=" << *a.max_arrivals;
  if (a.max_events) o << ";max_events=" << *a.max_events;
  if (!a.grid.empty()) o << ";grid=" << join(a.grid);
  return o.str();
}

void simulate(const SimulateArgs& a, Run& run) {
  run.seed = a.seed;
  const Model model(a.policy, a.dist, a.lambda);
  aoilab_sim* raw = nullptr;
  check(aoilab_sim_create(model.m, &raw));
  std::unique_ptr<aoilab_sim, void (*)(aoilab_sim*)> sim(raw, aoilab_sim_destroy);
  check(aoilab_sim_configure(sim.get(), sim_options(a, !a.path_out.empty()).c_str()));
  check(aoilab_sim_run(sim.get()));
  char* text = nullptr;
  check(aoilab_sim_stats_json(sim.get(), &text));
  json report = json::parse(take(text));
  report["policy"] = a.policy;
  report["dist"] = a.dist;
  report["lambda"] = a.lambda;
  if (!a.path_out.empty()) {
    check(aoilab_sim_path_csv(sim.get(), &text));
    run.emit(take(text), a.path_out);
  }
  report["manifest"] = run.manifest();
  run.emit(report.dump(2) + "\n", a.out);
}

// ---- sweep

struct SweepArgs {
  std::string preset, policies, dist, quantity, engine, coupling, format = "csv", out;
  std::vector<double> rho, t;
  std::optional<long long> segments;
  std::uint64_t seed = 1;
  int replications = 1, jobs = 1;
};

void sweep(const SweepArgs& a, Run& run) {
  run.seed = a.seed;
  std::ostringstream o;
  o << "seed=" << a.seed << ";replications=" << a.replications << ";jobs=" << a.jobs << ";format=" << a.format;
  if (!a.preset.empty()) o << ";preset=" << a.preset;
  if (!a.policies.empty()) o << ";policies=" << a.policies;
  if (!a.dist.empty()) o << ";dist=" << a.dist;
  if (!a.quantity.empty()) o << ";quantity=" << a.quantity;
  if (!a.engine.empty()) o << ";engine=" << a.engine;
  if (!a.coupling.empty()) o << ";coupling=" << a.coupling;
  if (!a.rho.empty()) o << ";rho=" << join(a.rho);
  if (!a.t.empty()) o << ";t=" << join(a.t);
  if (a.segments) o << ";segments=" << *a.segments;
  char* out = nullptr;
  check(aoilab_sweep(o.str().c_str(), &out));
  run.emit(take(out), a.out);
}

// ---- order

struct OrderArgs {
  std::string a = "p2", b = "b2", dist = "exp:1", source = "analytic", coupling, chain, out;
  double lambda = 1.0;
  std::optional<double> tol;
  std::vector<double> t;
  long long segments = 200000;
  std::optional<long long> max_arrivals;
  std::uint64_t seed = 1;
  bool pathwise = false;
};

void order(const OrderArgs& a, Run& run) {
  run.seed = a.seed;
  char* out = nullptr;
  if (a.pathwise) {
    std::ostringstream o;
    o << "seed=" << a.seed << ";max_arrivals=" << a.max_arrivals.value_or(100000)
      << ";coupling=" << (a.coupling.empty() ? "service" : a.coupling);
    const std::string policies = a.chain.empty() ? a.a + "," + a.b : a.chain;
    check(aoilab_pathwise(policies.c_str(), a.dist.c_str(), a.lambda, o.str().c_str(), &out));
  } else {
    std::ostringstream o;
    o << "source=" << a.source << ";segments=" << a.segments << ";seed=" << a.seed;
    if (a.tol) o << ";tol=" << fmt(*a.tol);
    if (!a.t.empty()) o << ";t=" << join(a.t);
    if (!a.coupling.empty()) o << ";coupling=" << a.coupling;
    check(aoilab_order(a.a.c_str(), a.b.c_str(), a.dist.c_str(), a.lambda, o.str().c_str(), &out));
  }
  run.emit(take(out), a.out);
}

// ---- invert

struct InvertArgs {
  std::string policy = "b2", dist = "exp:1", what = "density", method, format = "csv", out;
  double lambda = 1.0, rho = 1.0;
  std::vector<double> t{1.0};
  bool detp1 = false, check_moments = false;
  int nodes = 64;
  double abs_tol = 1e-8;
};

// E[alpha] and E[alpha^2] from the inverted det-P1 density, composite Simpson on [1, upper].
std::pair<double, double> detp1_moments_from_density(double rho, const std::string& opts) {
  const double m = std::exp(rho) / rho;
  const double upper = 1.0 + 40.0 * m;
  const int panels = 4000 + 2 * static_cast<int>(upper);
  const double h = (upper - 1.0) / panels;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double x = 1.0 + i * h;
    double f = 0.0;
    // the density jumps at 1; sample the right limit
    check(aoilab_detp1_density(rho, i == 0 ? 1.0 + 1e-12 : x, opts.c_str(), &f));
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    m1 += w * x * f;
    m2 += w * x * x * f;
  }
  return {m1 * h / 3.0, m2 * h / 3.0};
}

void invert(const InvertArgs& a, Run& run) {
  const std::string opts = inversion_options(a.method, a.nodes, a.abs_tol);
  json rows = json::array();
  if (a.detp1) {
    for (double t : a.t) {
      double v = 0.0;
      check(aoilab_detp1_density(a.rho, t, opts.c_str(), &v));
      rows.push_back({{"t", t}, {"density", v}});
    }
  } else {
    const Model model(a.policy, a.dist, a.lambda);
    for (double t : a.t) {
      double v = 0.0;
      if (a.what == "density") {
        check(aoilab_density(model.m, t, opts.c_str(), &v));
      } else if (a.what == "ccdf") {
        check(aoilab_ccdf(model.m, t, opts.c_str(), &v));
      } else {
        throw Failure{AOILAB_E_ARGUMENT, "--what must be density or ccdf"};
      }
      rows.push_back({{"t", t}, {a.what, v}});
    }
  }
  json report{{"rows", rows}};
  if (a.detp1 && a.check_moments) {
    const auto [m1, m2] = detp1_moments_from_density(a.rho, opts);
    double e1 = 0.0, e2 = 0.0;
    check(aoilab_detp1_moment(a.rho, 1, &e1));
    check(aoilab_detp1_moment(a.rho, 2, &e2));
    report["moment_check"] = {{"mean_from_density", m1}, {"mean_exact", e1},
                              {"second_from_density", m2}, {"second_exact", e2},
                              {"mean_rel_error", std::abs(m1 / e1 - 1.0)},
                              {"second_rel_error", std::abs(m2 / e2 - 1.0)}};
  }
  if (a.format == "json") {
    run.emit(report.dump(2), a.out);
    return;
  }
  const std::string column = a.detp1 ? "density" : a.what;
  std::string csv = "t," + column + "\n";
  for (const auto& r : rows) csv += fmt(r["t"].get<double>()) + ',' + fmt(r[column].get<double>()) + '\n';
  if (report.contains("moment_check")) {
    const auto& mc = report["moment_check"];
    csv += "# mean " + fmt(mc["mean_from_density"].get<double>()) + " exact " + fmt(mc["mean_exact"].get<double>()) +
           ", second moment " + fmt(mc["second_from_density"].get<double>()) + " exact " +
           fmt(mc["second_exact"].get<double>()) + "\n";
  }
  run.emit(csv, a.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-of-information analysis and simulation for B(n)/P(n) queues"};
  app.set_config("--config", "", "key=value configuration file (flags override it)");
  app.set_version_flag("--version", std::string(aoilab_version()));
  app.require_subcommand(1);

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "analytic mean, sd, transform, density or CCDF");
  analyze_cmd->add_option("--policy", an.policy, "b1, p1, b2, p2, ...")->capture_default_str();
  analyze_cmd->add_option("--dist", an.dist, "exp:<rate> or det:<value>")->capture_default_str();
  analyze_cmd->add_option("--lambda", an.lambda, "arrival rate")->capture_default_str();
  analyze_cmd->add_option("--quantity", an.quantities, "mean, sd, variance, lt, limit, density, ccdf")
      ->delimiter(',')
      ->capture_default_str();
  analyze_cmd->add_option("--s", an.s, "transform arguments")->delimiter(',')->capture_default_str();
  analyze_cmd->add_option("--t", an.t, "time points")->delimiter(',')->capture_default_str();
  analyze_cmd->add_option("--method", an.method, "auto, talbot, euler, trapezoid");
  analyze_cmd->add_option("--nodes", an.nodes)->capture_default_str();
  analyze_cmd->add_option("--abs-tol", an.abs_tol)->capture_default_str();
  analyze_cmd->add_option("--format", an.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  analyze_cmd->add_option("--out", an.out, "output file (default stdout)");

  SimulateArgs sm;
  auto* simulate_cmd = app.add_subcommand("simulate", "discrete-event simulation with exact time averages");
  simulate_cmd->add_option("--policy", sm.policy)->capture_default_str();
  simulate_cmd->add_option("--dist", sm.dist)->capture_default_str();
  simulate_cmd->add_option("--lambda", sm.lambda)->capture_default_str();
  simulate_cmd->add_option("--segments", sm.segments)->capture_default_str();
  simulate_cmd->add_option("--warmup", sm.warmup);
  simulate_cmd->add_option("--max-arrivals", sm.max_arrivals);
  simulate_cmd->add_option("--max-events", sm.max_events, "starvation guard per segment");
  simulate_cmd->add_option("--seed", sm.seed)->envname("AOILAB_SEED")->capture_default_str();
  simulate_cmd->add_option("--replications", sm.replications)->capture_default_str();
  simulate_cmd->add_option("--jobs", sm.jobs)->capture_default_str();
  simulate_cmd->add_option("--batches", sm.batches)->capture_default_str();
  simulate_cmd->add_option("--coupling", sm.coupling)->check(CLI::IsMember({"message", "service"}))->capture_default_str();
  simulate_cmd->add_option("--grid", sm.grid, "CCDF time points")->delimiter(',');
  simulate_cmd->add_option("--out", sm.out);
  simulate_cmd->add_option("--path-out", sm.path_out, "write the reset sequence as CSV");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "tabulate a quantity over rho and policies");
  sweep_cmd->add_option("--preset", sw.preset)->check(CLI::IsMember({"exp-mean", "exp-ccdf", "det-mean", "det-ccdf"}));
  sweep_cmd->add_option("--policies", sw.policies, "comma list");
  sweep_cmd->add_option("--dist", sw.dist);
  sweep_cmd->add_option("--rho", sw.rho)->delimiter(',');
  sweep_cmd->add_option("--quantity", sw.quantity, "mean, sd, ccdf");
  sweep_cmd->add_option("--t", sw.t)->delimiter(',');
  sweep_cmd->add_option("--engine", sw.engine, "analytic, simulate, both");
  sweep_cmd->add_option("--segments", sw.segments);
  sweep_cmd->add_option("--seed", sw.seed)->envname("AOILAB_SEED")->capture_default_str();
  sweep_cmd->add_option("--replications", sw.replications)->capture_default_str();
  sweep_cmd->add_option("--coupling", sw.coupling)->check(CLI::IsMember({"message", "service"}));
  sweep_cmd->add_option("--jobs", sw.jobs)->capture_default_str();
  sweep_cmd->add_option("--format", sw.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  sweep_cmd->add_option("--out", sw.out);

  OrderArgs od;
  auto* order_cmd = app.add_subcommand("order", "stochastic or pathwise ordering of two policies");
  order_cmd->add_option("--a", od.a)->capture_default_str();
  order_cmd->add_option("--b", od.b)->capture_default_str();
  order_cmd->add_option("--dist", od.dist)->capture_default_str();
  order_cmd->add_option("--lambda", od.lambda)->capture_default_str();
  order_cmd->add_option("--source", od.source)->check(CLI::IsMember({"analytic", "simulate"}))->capture_default_str();
  order_cmd->add_option("--tol", od.tol);
  order_cmd->add_option("--t", od.t)->delimiter(',');
  order_cmd->add_option("--segments", od.segments)->capture_default_str();
  order_cmd->add_option("--seed", od.seed)->envname("AOILAB_SEED")->capture_default_str();
  order_cmd->add_option("--coupling", od.coupling)->check(CLI::IsMember({"message", "service"}));
  order_cmd->add_flag("--pathwise", od.pathwise, "coupled sample paths instead of CCDFs");
  order_cmd->add_option("--chain", od.chain, "pathwise: comma list checked pairwise, e.g. b2,b3,b4");
  order_cmd->add_option("--max-arrivals", od.max_arrivals, "pathwise run length (default 100000)");
  order_cmd->add_option("--out", od.out);

  InvertArgs iv;
  auto* invert_cmd = app.add_subcommand("invert", "numerical Laplace inversion");
  invert_cmd->add_option("--policy", iv.policy)->capture_default_str();
  invert_cmd->add_option("--dist", iv.dist)->capture_default_str();
  invert_cmd->add_option("--lambda", iv.lambda)->capture_default_str();
  invert_cmd->add_option("--what", iv.what)->check(CLI::IsMember({"density", "ccdf"}))->capture_default_str();
  invert_cmd->add_option("--t", iv.t)->delimiter(',')->capture_default_str();
  invert_cmd->add_flag("--detp1", iv.detp1, "deterministic-service P1 (service time 1)");
  invert_cmd->add_option("--rho", iv.rho, "load for --detp1")->capture_default_str();
  invert_cmd->add_flag("--check-moments", iv.check_moments, "integrate the density and compare moments");
  invert_cmd->add_option("--method", iv.method, "auto, talbot, euler, trapezoid");
  invert_cmd->add_option("--nodes", iv.nodes)->capture_default_str();
  invert_cmd->add_option("--abs-tol", iv.abs_tol)->capture_default_str();
  invert_cmd->add_option("--format", iv.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  invert_cmd->add_option("--out", iv.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run(sub);
  try {
    if (sub == analyze_cmd) analyze(an, run);
    else if (sub == simulate_cmd) simulate(sm, run);
    else if (sub == sweep_cmd) sweep(sw, run);
    else if (sub == order_cmd) order(od, run);
    else invert(iv, run);
    run.finish();
  } catch (const Failure& f) {
    std::cerr << "aoilab: " << aoilab_status_name(f.status) << ": " << f.message << '\n';
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "aoilab: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}

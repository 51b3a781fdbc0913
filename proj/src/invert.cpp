#include "aoilab/invert.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "aoilab/error.hpp"

namespace aoilab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kEulerAveraging = 11;
constexpr long kTrapezoidCap = 1L << 20;

using Fn = std::function<Complex(Complex)>;

// Cotangent contour z(theta) = (M / t) w(theta), theta in (-pi, pi), midpoint
// rule with `nodes` points; conjugate symmetry halves the work.
double talbot(const Fn& f, double t, int nodes, double abs_tol) {
  const int scale = std::max(12, static_cast<int>(std::ceil(-std::log(abs_tol * 1e-2) / 1.358)));
  const double c = scale / t;
  double sum = 0.0;
  for (int k = nodes / 2; k < nodes; ++k) {
    const double theta = -kPi + (k + 0.5) * 2.0 * kPi / nodes;
    const double a = 0.6407 * theta;
    const double cot = std::cos(a) / std::sin(a);
    const Complex w(0.5017 * theta * cot - 0.6122, 0.2645 * theta);
    const double sin_a = std::sin(a);
    const Complex dw(0.5017 * cot - 0.5017 * a / (sin_a * sin_a), 0.2645);
    const Complex z = c * w;
    sum += (std::exp(z * t) * f(z) * c * dw).imag();
  }
  return 2.0 * sum / nodes;
}

struct FourierSeries {
  const Fn& f;
  double t;
  double a;  // abscissa shift A

  double prefactor() const { return std::exp(a / 2.0) / t; }
  double term(long k) const {
    const Complex s((a + 2.0 * kPi * static_cast<double>(k) * Complex(0.0, 1.0)) / (2.0 * t));
    const double v = f(s).real();
    if (k == 0) {
      return 0.5 * v;
    }
    return (k % 2 ? -v : v);
  }
};

// Abscissa shift A: aliasing error is about e^{-A} sup|f|. `growth` bounds
// |f(3t)| for inverse functions that are not bounded by 1.
double shift_for(double abs_tol, double growth) { return -std::log(abs_tol / 10.0) + std::log1p(growth); }

double euler(const Fn& f, double t, int terms, double abs_tol, double growth) {
  const FourierSeries series{f, t, shift_for(abs_tol, growth)};
  std::vector<double> partial(terms + kEulerAveraging + 1);
  double running = 0.0;
  for (int k = 0; k <= terms + kEulerAveraging; ++k) {
    running += series.term(k);
    partial[k] = running;
  }
  double averaged = 0.0, binom = 1.0;
  for (int k = 0; k <= kEulerAveraging; ++k) {
    averaged += binom * partial[terms + k];
    binom = binom * (kEulerAveraging - k) / (k + 1);
  }
  return series.prefactor() * averaged / std::pow(2.0, kEulerAveraging);
}

struct TrapezoidResult {
  double value;
  long terms;
};

// Partial sums until two consecutive term bounds fall below abs_tol / 10, or
// exactly `fixed_terms` terms when positive.
TrapezoidResult trapezoid(const Fn& f, double t, double abs_tol, double growth, long fixed_terms) {
  const FourierSeries series{f, t, shift_for(abs_tol, growth)};
  const double pre = series.prefactor();
  double sum = series.term(0);
  int quiet = 0;
  long k = 1;
  for (;; ++k) {
    if (fixed_terms > 0 && k > fixed_terms) {
      break;
    }
    if (k > kTrapezoidCap) {
      throw NumericError("bromwich-trapezoid reached its term cap of " + std::to_string(kTrapezoidCap) +
                             " without meeting the tail bound",
                         pre * sum, 0.0);
    }
    const double term = series.term(k);
    sum += term;
    if (fixed_terms <= 0) {
      quiet = pre * std::abs(term) < abs_tol / 10.0 ? quiet + 1 : 0;
      if (quiet == 2) {
        break;
      }
    }
  }
  return {pre * sum, std::min(k, fixed_terms > 0 ? fixed_terms : k)};
}

double run_once(InversionMethod method, const Fn& f, double t, int nodes, double abs_tol, double growth) {
  switch (method) {
    case InversionMethod::talbot:
      return talbot(f, t, nodes, abs_tol);
    case InversionMethod::euler_summation:
      return euler(f, t, nodes, abs_tol, growth);
    default:
      break;
  }
  throw ArgumentError("unreachable inversion method");
}

double invert(const AoiTransform& lt, const Fn& f, double t, const InversionConfig& cfg, double growth = 0.0) {
  cfg.validate();
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw ArgumentError("inversion needs a finite t > 0");
  }
  const InversionMethod method = resolve_method(lt, cfg);
  double first = 0.0, second = 0.0;
  if (method == InversionMethod::bromwich_trapezoid) {
    const auto coarse = trapezoid(f, t, cfg.abs_tol, growth, 0);
    first = coarse.value;
    second = trapezoid(f, t, cfg.abs_tol, growth, 2 * coarse.terms).value;
  } else {
    first = run_once(method, f, t, cfg.nodes, cfg.abs_tol, growth);
    second = run_once(method, f, t, 2 * cfg.nodes, cfg.abs_tol, growth);
  }
  if (!std::isfinite(first) || !std::isfinite(second) || std::abs(first - second) > cfg.abs_tol) {
    throw NumericError(inversion_method_name(method) + " inversion of '" + lt.label + "' at t=" +
                           std::to_string(t) + " did not settle under node doubling",
                       first, second);
  }
  return second;
}

}  // namespace

void InversionConfig::validate() const {
  if (nodes < 16) {
    throw ArgumentError("inversion needs at least 16 nodes");
  }
  if (!(abs_tol > 0.0)) {
    throw ArgumentError("inversion tolerance must be positive");
  }
}

InversionMethod parse_inversion_method(std::string_view name) {
  if (name == "automatic" || name == "auto") {
    return InversionMethod::automatic;
  }
  if (name == "talbot") {
    return InversionMethod::talbot;
  }
  if (name == "euler-summation" || name == "euler") {
    return InversionMethod::euler_summation;
  }
  if (name == "bromwich-trapezoid" || name == "trapezoid") {
    return InversionMethod::bromwich_trapezoid;
  }
  throw ArgumentError("unknown inversion method '" + std::string(name) +
                      "' (expected automatic, talbot, euler-summation or bromwich-trapezoid)");
}

std::string inversion_method_name(InversionMethod method) {
  switch (method) {
    case InversionMethod::automatic:
      return "automatic";
    case InversionMethod::talbot:
      return "talbot";
    case InversionMethod::euler_summation:
      return "euler-summation";
    case InversionMethod::bromwich_trapezoid:
      return "bromwich-trapezoid";
  }
  return "unknown";
}

InversionMethod resolve_method(const AoiTransform& lt, const InversionConfig& cfg) {
  if (cfg.method != InversionMethod::automatic) {
    return cfg.method;
  }
  return lt.contour_safe ? InversionMethod::talbot : InversionMethod::euler_summation;
}

double invert_density(const AoiTransform& lt, double t, const InversionConfig& cfg) {
  return invert(lt, lt.eval, t, cfg);
}

double invert_ccdf(const AoiTransform& lt, double t, const InversionConfig& cfg) {
  if (t == 0.0) {
    cfg.validate();
    return 1.0;
  }
  const Fn tail = [&lt](Complex s) { return (1.0 - lt.eval(s)) / s; };
  return invert(lt, tail, t, cfg);
}

AoiTransform lm_aoi_transform(double m) {
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw ArgumentError("L_m needs a finite m > 0");
  }
  AoiTransform lt;
  lt.label = "L_m m=" + std::to_string(m);
  lt.eval = [m](Complex s) { return lm_transform(m, s); };
  // e^s in the denominator: infinitely many poles along m s e^s = -1
  lt.contour_safe = false;
  return lt;
}

double det_p1_density(double rho, double t, const InversionConfig& cfg) {
  if (!(rho > 0.0)) {
    throw ArgumentError("rho must be positive");
  }
  cfg.validate();
  if (t < 1.0) {
    return 0.0;  // the age is never below one service time
  }
  const double m = std::exp(rho) / rho;
  auto lt = lm_aoi_transform(m);
  lt.policy = PolicyId::P(1);

  // L_m = sum_j (-1)^{j-1} e^{-js} / (m s)^j. The first terms carry the jump
  // at t = 1 and the kinks at t = 2, 3, ... that stall Fourier-series inversion;
  // they are inverted exactly and only the smoother remainder numerically.
  constexpr int kSubtracted = 5;
  const Fn remainder = [m](Complex s) {
    Complex value = lm_transform(m, s);
    const Complex ratio = std::exp(-s) / (m * s);
    Complex power = 1.0;
    for (int j = 1; j <= kSubtracted; ++j) {
      power *= ratio;
      value -= (j % 2 ? 1.0 : -1.0) * power;
    }
    return value;
  };
  double exact = 0.0, growth = 0.0, factorial = 1.0;
  for (int j = 1; j <= kSubtracted; ++j) {
    if (j > 1) {
      factorial *= j - 1;
    }
    const double scale = factorial * std::pow(m, j);
    if (t >= j) {
      exact += (j % 2 ? 1.0 : -1.0) * std::pow(t - j, j - 1) / scale;
    }
    growth += std::pow(3.0 * t, j - 1) / scale;
  }
  return exact + invert(lt, remainder, t, cfg, growth);
}

}  // namespace aoilab

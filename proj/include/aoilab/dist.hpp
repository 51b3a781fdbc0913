#pragma once

#include <complex>
#include <functional>
#include <string>
#include <string_view>
#include <variant>

#include "aoilab/rng.hpp"

namespace aoilab {

using Complex = std::complex<double>;

struct Exponential {
  double rate;
};

struct Deterministic {
  double value;
};

/// Caller-described service law. The transform must be analytic on Re(s) >= 0.
/// `density` is only needed for kernel quadrature; `second_moment` may be
/// +infinity.
struct GenericLaw {
  std::string name;
  double mean = 0.0;
  double second_moment = 0.0;
  std::function<Complex(Complex)> transform;
  std::function<double(CounterRng&)> sampler;
  std::function<double(double)> density;
  std::function<double(double)> cdf;
};

enum class Family { exponential, deterministic, generic };

/// Service-time law G. Sizes are strictly positive with finite mean.
class ServiceDistribution {
public:
  using Law = std::variant<Exponential, Deterministic, GenericLaw>;

  static ServiceDistribution exponential(double rate);
  static ServiceDistribution deterministic(double value);
  static ServiceDistribution generic(GenericLaw law);

  Family family() const noexcept;
  const Law& law() const noexcept { return law_; }

  double mean() const;
  /// mu = 1 / mean.
  double rate() const { return 1.0 / mean(); }

  /// Round-trippable CLI token (`exp:<rate>`, `det:<value>`); generic laws
  /// render as `generic:<name>`.
  std::string spec() const;

private:
  explicit ServiceDistribution(Law law) : law_(std::move(law)) {}
  Law law_;
};

/// Evaluation domain. `checked` enforces the family's half-plane of
/// convergence; `continued` evaluates the meromorphic continuation (exponential
/// law: everywhere except the pole at -rate), which contour inversion needs.
enum class Domain { checked, continued };

/// E[exp(-s sigma)].
Complex laplace_g(const ServiceDistribution& dist, Complex s, Domain domain = Domain::checked);

/// d^order/ds^order of laplace_g, order in {1, 2}.
Complex laplace_g_derivative(const ServiceDistribution& dist, Complex s, int order);

/// (G^(a) - G^(b)) / (b - a), continuous across a == b where it equals -G^'(a).
/// Evaluated without cancellation for the exponential and deterministic laws.
Complex laplace_g_divided_difference(const ServiceDistribution& dist, Complex a, Complex b,
                                     Domain domain = Domain::checked);

/// Transform of the stationary-excess law: mu (1 - G^(s)) / s, equal to 1 at s = 0.
Complex laplace_gi(const ServiceDistribution& dist, Complex s, Domain domain = Domain::checked);

/// E[sigma^p] for p in {1, 2}. May be +infinity for a generic law.
double moment(const ServiceDistribution& dist, int p);

/// P(sigma <= x).
double cdf(const ServiceDistribution& dist, double x);

double sample(const ServiceDistribution& dist, CounterRng& rng);

/// Parses `exp:<rate>` or `det:<value>`. Throws ArgumentError naming the
/// 1-based column of the first offending character.
ServiceDistribution parse_distribution(std::string_view spec);

}  // namespace aoilab

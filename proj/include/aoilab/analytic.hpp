#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>

#include "aoilab/dist.hpp"
#include "aoilab/model.hpp"

namespace aoilab {

/// Evaluable Laplace transform s -> E[exp(-s X)] of a nonnegative random
/// variable, plus what the inverter needs to know about it.
struct AoiTransform {
  std::string label;
  std::optional<PolicyId> policy;
  std::function<Complex(Complex)> eval;
  /// True when every singularity lies on the closed left half-plane and the
  /// transform decays there, so a deformed (Talbot-type) contour is valid.
  /// False for transforms carrying delay factors exp(-s d).
  bool contour_safe = true;

  Complex operator()(Complex s) const { return eval(s); }
};

/// One of the four Palm-conditional transforms
/// E0[exp(-s alpha(S0)); K_{-1} = i, K_0 = j].
struct PalmTerm {
  int i;
  int j;
  Complex value;
};

// ---------------------------------------------------------------------------
// Markov-renewal structure of the occupancy at successful departures.

/// Q_ij(x) = P0(S_{n+1} - S_n <= x, K_{n+1} = j | K_n = i), i, j in {0, 1}.
/// Closed form for exponential and deterministic service; adaptive quadrature
/// over the density otherwise.
double kernel_q(const TrafficModel& traffic, int i, int j, double x);

/// P0(K_n = 0) = G^(lambda).
double k_chain_p0(const TrafficModel& traffic);

/// Phi_i(s) = E0[exp(-s (S1 - S0)) | K_0 = i]; unconditional Phi(s) when i is empty.
Complex segment_lt(const TrafficModel& traffic, std::optional<int> i, Complex s);

/// E0[S1 - S0] = 1/mu + G^(lambda)/lambda.
double mean_segment(const TrafficModel& traffic);

// ---------------------------------------------------------------------------
// Stationary AoI transforms.

/// Conditional Palm transform for B2 or P2.
PalmTerm palm_conditional_lt(PolicyId policy, const TrafficModel& traffic, int i, int j, Complex s);

/// Stationary transform assembled from the four Palm terms through the Palm
/// inversion fixed point. B2 and P2 only.
Complex palm_assembled_lt(PolicyId policy, const TrafficModel& traffic, Complex s);

/// The three independent factors of the B2/P2 product form:
/// service, wait-type term, and the stationary-residual mixture.
std::array<Complex, 3> aoi_factors(PolicyId policy, const TrafficModel& traffic, Complex s,
                                   Domain domain = Domain::checked);

/// E[exp(-s alpha(0))] for B1, P1, B2, P2. Throws UnsupportedError for n >= 3.
Complex aoi_lt(PolicyId policy, const TrafficModel& traffic, Complex s, Domain domain = Domain::checked);

/// Wraps aoi_lt; evaluates the meromorphic continuation when contour-safe.
AoiTransform aoi_transform(PolicyId policy, const TrafficModel& traffic);

/// Closed-form mean. +infinity when the formula needs an infinite second
/// moment of the service time.
double aoi_mean(PolicyId policy, const TrafficModel& traffic);

/// Variance: closed form for P2 with exponential service, otherwise the second
/// central difference of log E[exp(-s alpha)] at s = 0.
double aoi_variance(PolicyId policy, const TrafficModel& traffic);
double aoi_sd(PolicyId policy, const TrafficModel& traffic);

/// Mean and variance of any transform from finite differences of its log at 0.
/// Uses a symmetric stencil when `two_sided`, a forward one otherwise.
double transform_mean(const std::function<Complex(Complex)>& lt, bool two_sided = true);
double transform_variance(const std::function<Complex(Complex)>& lt, bool two_sided = true);

// ---------------------------------------------------------------------------
// Exponential service, explicit forms.

Complex b2_exponential_lt(double lambda, double mu, Complex s);
Complex p2_exponential_lt(double lambda, double mu, Complex s);
double b2_exponential_mean(double lambda, double mu);
double p2_exponential_mean(double lambda, double mu);
double p2_exponential_sd(double lambda, double mu);

/// Stationary AoI density of B2 or P2 with exponential(mu) service.
double closed_density_exp(PolicyId policy, double lambda, double t, double mu = 1.0);

// ---------------------------------------------------------------------------
// High traffic.

/// Limit transform as rho -> infinity: G^ G^_I for P(n >= 2), G^^n G^_I for B(n).
Complex high_traffic_limit_lt(PolicyId policy, const ServiceDistribution& dist, Complex s,
                              Domain domain = Domain::checked);
AoiTransform high_traffic_transform(PolicyId policy, const ServiceDistribution& dist);

// ---------------------------------------------------------------------------
// P1 with deterministic service.

/// L_m(s) = 1 / (m s e^s + 1).
Complex lm_transform(double m, Complex s);

/// Q_p(z) = sum_{k=1..p} (p)_k k^(p-k) z^k.
double q_polynomial(int p, double z);

/// E[alpha^p] = (-1)^p Q_p(-m), m = e^rho / rho, unit service time.
double det_p1_moment(double rho, int p);

/// Density and CCDF of the variable with transform L_m, by the finite
/// alternating series obtained from expanding 1/(1 + m s e^s) in e^{-s}/(m s).
double lm_density_series(double m, double t);
double lm_ccdf_series(double m, double t);

// ---------------------------------------------------------------------------
// Deterministic service, time domain.

/// P(alpha > t) and the density for B1, P1, B2, P2 under deterministic
/// service, computed from the independent-summand decomposition by
/// one-dimensional Gauss-Legendre quadrature (B2, P2), closed form (B1), or
/// the L_m series (P1).
double deterministic_ccdf(PolicyId policy, const TrafficModel& traffic, double t);
double deterministic_density(PolicyId policy, const TrafficModel& traffic, double t);

}  // namespace aoilab

#pragma once

#include <string>
#include <string_view>

#include "aoilab/analytic.hpp"

namespace aoilab {

enum class InversionMethod {
  /// talbot when the transform is contour-safe, euler_summation otherwise.
  automatic,
  /// Fixed deformed contour with midpoint rule (cotangent contour).
  talbot,
  /// Fourier-series (Bromwich trapezoid) partial sums accelerated by binomial averaging.
  euler_summation,
  /// Plain Fourier-series partial sums, stopped on a term bound.
  bromwich_trapezoid,
};

struct InversionConfig {
  InversionMethod method = InversionMethod::automatic;
  /// Contour nodes (talbot) or series terms before averaging (euler_summation).
  int nodes = 64;
  double abs_tol = 1e-8;

  /// Throws ArgumentError unless nodes >= 16 and abs_tol > 0.
  void validate() const;
};

InversionMethod parse_inversion_method(std::string_view name);
std::string inversion_method_name(InversionMethod method);

/// Method actually used for `lt` under `cfg`.
InversionMethod resolve_method(const AoiTransform& lt, const InversionConfig& cfg);

/// Density f(t) of the variable with transform `lt`, t > 0. Each estimate is
/// recomputed with twice the nodes (twice the term budget for
/// bromwich_trapezoid); a gap above abs_tol raises NumericError carrying both.
double invert_density(const AoiTransform& lt, double t, const InversionConfig& cfg = {});

/// P(X > t) from (1 - lt(s)) / s. Exactly 1 at t = 0.
double invert_ccdf(const AoiTransform& lt, double t, const InversionConfig& cfg = {});

/// Transform L_m(s) = 1 / (m s e^s + 1) with metadata.
AoiTransform lm_aoi_transform(double m);

/// Density of P1 AoI under unit deterministic service and intensity rho,
/// by inverting L_m with m = e^rho / rho.
double det_p1_density(double rho, double t, const InversionConfig& cfg = {});

}  // namespace aoilab

#pragma once

#include <compare>
#include <string>
#include <string_view>

#include "aoilab/dist.hpp"

namespace aoilab {

/// Buffer discipline. B(n): FIFO with blocking, n cells including the one in
/// service. P(n), n >= 2: non-preemptive push-out, cell 2 always holds the most
/// recent stored message. P(1): the only preemptive policy, a new arrival
/// replaces the message in service.
struct PolicyId {
  enum class Kind { blocking, pushout };

  Kind kind = Kind::blocking;
  int n = 1;

  static PolicyId B(int n);
  static PolicyId P(int n);

  bool preemptive() const noexcept { return kind == Kind::pushout && n == 1; }
  /// Lowercase CLI token, e.g. "b2" or "p1".
  std::string token() const;
  /// Display name, e.g. "B2".
  std::string name() const;

  auto operator<=>(const PolicyId&) const = default;
};

/// Parses b<n> / p<n> (case-insensitive), n >= 1.
PolicyId parse_policy(std::string_view token);

/// Poisson arrivals of rate lambda feeding i.i.d. service times from `dist`.
struct TrafficModel {
  double lambda;
  ServiceDistribution dist;

  TrafficModel(double lambda, ServiceDistribution dist);

  /// Traffic intensity lambda * E[sigma].
  double rho() const { return lambda * dist.mean(); }
  double mu() const { return dist.rate(); }
};

}  // namespace aoilab

#include <cmath>
#include <numbers>

#include "aoilab/error.hpp"
#include "aoilab/invert.hpp"
#include "doctest.h"

using namespace aoilab;

namespace {

AoiTransform rational(std::function<Complex(Complex)> f) {
  AoiTransform lt;
  lt.label = "test";
  lt.eval = std::move(f);
  return lt;
}

InversionConfig with(InversionMethod m) {
  InversionConfig cfg;
  cfg.method = m;
  return cfg;
}

// hypoexponential(a, b) density, a != b
double hypo(double a, double b, double t) { return a * b / (a - b) * (std::exp(-b * t) - std::exp(-a * t)); }

const PolicyId kB1 = PolicyId::B(1), kP1 = PolicyId::P(1), kB2 = PolicyId::B(2), kP2 = PolicyId::P(2);

}  // namespace

TEST_CASE("exponential pair with each contour-free method") {
  const auto e = rational([](Complex s) { return 1.0 / (1.0 + s); });
  for (auto m : {InversionMethod::automatic, InversionMethod::talbot, InversionMethod::euler_summation}) {
    CHECK(std::abs(invert_density(e, 1.0, with(m)) - std::exp(-1.0)) < 1e-8);
    CHECK(std::abs(invert_ccdf(e, 1.0, with(m)) - std::exp(-1.0)) < 1e-8);
  }
  CHECK(invert_ccdf(e, 0.0) == 1.0);
  CHECK(std::abs(invert_ccdf(e, 1e-6) - std::exp(-1e-6)) < 1e-8);
  CHECK(std::abs(invert_ccdf(e, 1e-9) - 1.0) < 1e-8);
}

TEST_CASE("bromwich-trapezoid: converges on fast decay, stops at its cap on slow decay") {
  // Erlang(3): transform decays like |s|^-3
  const auto erlang3 = rational([](Complex s) { return std::pow(1.0 / (1.0 + s), 3); });
  const auto cfg = with(InversionMethod::bromwich_trapezoid);
  for (double t : {0.5, 2.0, 5.0}) {
    CHECK(std::abs(invert_density(erlang3, t, cfg) - 0.5 * t * t * std::exp(-t)) < 1e-8);
  }
  const auto e = rational([](Complex s) { return 1.0 / (1.0 + s); });
  CHECK_THROWS_AS(invert_density(e, 1.0, cfg), NumericError);
}

TEST_CASE("round trip against the closed exponential densities") {
  const TrafficModel tm(1.0, ServiceDistribution::exponential(1.0));
  for (PolicyId p : {kB2, kP2}) {
    const auto lt = aoi_transform(p, tm);
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      CHECK(std::abs(invert_density(lt, t) - closed_density_exp(p, 1.0, t)) < 1e-6);
    }
  }
  CHECK(std::abs(invert_density(aoi_transform(kB2, tm), 1.0) - 0.245253) < 1e-6);
  // lambda != mu, general mu
  const TrafficModel other(2.0, ServiceDistribution::exponential(1.0));
  for (PolicyId p : {kB2, kP2}) {
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      CHECK(std::abs(invert_density(aoi_transform(p, other), t) - closed_density_exp(p, 2.0, t)) < 1e-8);
    }
  }
  // B1 is sigma + tau plus an independent Bernoulli(rho/(1+rho)) copy of an
  // exponential; P1 is sigma + tau.
  const double lam = 2.0, mu = 1.0, rho = lam / mu, delta = lam - mu;
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const double two = hypo(lam, mu, t);
    const double three = mu * mu * lam * (std::exp(-mu * t) * (delta * t - 1.0) + std::exp(-lam * t)) / (delta * delta);
    const double b1 = two / (1.0 + rho) + three * rho / (1.0 + rho);
    CHECK(std::abs(invert_density(aoi_transform(kB1, other), t) - b1) < 1e-8);
    CHECK(std::abs(invert_density(aoi_transform(kP1, other), t) - two) < 1e-8);
  }
}

TEST_CASE("CCDF against the integrated closed density") {
  const TrafficModel tm(1.0, ServiceDistribution::exponential(1.0));
  // int_2^inf (u^2 + u) e^{-u} du / 3 = 13 e^{-2} / 3
  CHECK(std::abs(invert_ccdf(aoi_transform(kB2, tm), 2.0) - 13.0 * std::exp(-2.0) / 3.0) < 1e-6);
  // P2 at lambda = 1: int_t^inf, by the antiderivatives of each exponential term
  auto p2_tail = [](double t) {
    return (8.0 + 2.0 * t) * std::exp(-2.0 * t) / 6.0 + (6.0 * t - 1.0) * std::exp(-t) / 3.0;
  };
  for (double t : {0.5, 1.0, 3.0}) {
    CHECK(std::abs(invert_ccdf(aoi_transform(kP2, tm), t) - p2_tail(t)) < 1e-8);
  }
}

TEST_CASE("CCDF derivative is minus the density; CCDF is nonincreasing") {
  const TrafficModel tm(1.5, ServiceDistribution::exponential(1.0));
  for (PolicyId p : {kB1, kP1, kB2, kP2}) {
    const auto lt = aoi_transform(p, tm);
    double previous = 1.0;
    for (double t = 0.25; t < 8.0; t += 0.25) {
      const double h = 1e-3;
      const double slope = (invert_ccdf(lt, t + h) - invert_ccdf(lt, t - h)) / (2.0 * h);
      CHECK(std::abs(slope + invert_density(lt, t)) < 1e-4);
      const double c = invert_ccdf(lt, t);
      CHECK(c <= previous + 1e-8);
      CHECK(c >= -1e-8);
      previous = c;
    }
  }
}

TEST_CASE("node doubling leaves acceptance transforms unchanged") {
  const TrafficModel tm(1.0, ServiceDistribution::exponential(1.0));
  for (PolicyId p : {kB1, kP1, kB2, kP2}) {
    const auto lt = aoi_transform(p, tm);
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      InversionConfig a, b;
      b.nodes = 128;
      CHECK(std::abs(invert_density(lt, t, a) - invert_density(lt, t, b)) < a.abs_tol);
      CHECK(std::abs(invert_ccdf(lt, t, a) - invert_ccdf(lt, t, b)) < a.abs_tol);
    }
  }
}

TEST_CASE("high-traffic limit transform inverts to the Erlang law") {
  const auto e1 = ServiceDistribution::exponential(1.0);
  const auto b2 = high_traffic_transform(kB2, e1);
  const auto p2 = high_traffic_transform(kP2, e1);
  for (double t : {0.5, 1.0, 3.0}) {
    CHECK(std::abs(invert_density(b2, t) - 0.5 * t * t * std::exp(-t)) < 1e-9);
    CHECK(std::abs(invert_density(p2, t) - t * std::exp(-t)) < 1e-9);
  }
}

TEST_CASE("deterministic P1 density from L_m") {
  const double e = std::numbers::e;
  // agrees with the exact alternating series away from the integer breakpoints
  for (double rho : {0.5, 1.0, 3.0}) {
    const double m = std::exp(rho) / rho;
    for (double t : {0.5, 1.25, 2.5, 3.75, 6.1, 11.3}) {
      CHECK(std::abs(det_p1_density(rho, t) - lm_density_series(m, t)) < 1e-8);
    }
  }
  // normalization and moments by quadrature over the inverted density
  double mass = 0.0, first = 0.0, second = 0.0;
  const int panels = 40;
  for (int a = 0; a < 30; ++a) {
    const double lo = a + 1e-9, hi = a + 1.0 - 1e-9, h = (hi - lo) / panels;
    for (int k = 0; k <= panels; ++k) {
      const double t = lo + k * h;
      const double w = (k == 0 || k == panels ? 1.0 : (k % 2 ? 4.0 : 2.0)) * h / 3.0;
      const double f = det_p1_density(1.0, t);
      mass += w * f, first += w * t * f, second += w * t * t * f;
    }
  }
  CHECK(std::abs(mass - 1.0) < 1e-3);
  CHECK(first == doctest::Approx(e).epsilon(1e-2));
  CHECK(second == doctest::Approx(2 * e * e - 2 * e).epsilon(2e-2));
}

TEST_CASE("generic inversion of L_m without subtraction reports non-convergence") {
  const auto lm = lm_aoi_transform(std::numbers::e);
  CHECK_FALSE(lm.contour_safe);
  CHECK(resolve_method(lm, {}) == InversionMethod::euler_summation);
  try {
    invert_density(lm, 1.5);
    FAIL("expected a NumericError");
  } catch (const NumericError& err) {
    CHECK(err.first_estimate() != err.second_estimate());
  }
  CHECK_THROWS_AS(invert_density(lm, 1.5, with(InversionMethod::bromwich_trapezoid)), NumericError);
}

TEST_CASE("configuration validation and method names") {
  const auto e = rational([](Complex s) { return 1.0 / (1.0 + s); });
  InversionConfig bad;
  bad.nodes = 8;
  CHECK_THROWS_AS(invert_density(e, 1.0, bad), ArgumentError);
  bad.nodes = 64;
  bad.abs_tol = 0.0;
  CHECK_THROWS_AS(invert_density(e, 1.0, bad), ArgumentError);
  CHECK_THROWS_AS(invert_ccdf(e, 0.0, bad), ArgumentError);
  CHECK_THROWS_AS(invert_density(e, 0.0), ArgumentError);
  CHECK_THROWS_AS(invert_density(e, -1.0), ArgumentError);
  CHECK_THROWS_AS(det_p1_density(0.0, 1.0), ArgumentError);
  for (auto m : {InversionMethod::automatic, InversionMethod::talbot, InversionMethod::euler_summation,
                 InversionMethod::bromwich_trapezoid}) {
    CHECK(parse_inversion_method(inversion_method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_inversion_method("stehfest"), ArgumentError);
  CHECK(resolve_method(aoi_transform(kB2, TrafficModel(1.0, ServiceDistribution::exponential(1.0))), {}) ==
        InversionMethod::talbot);
  CHECK(resolve_method(aoi_transform(kB2, TrafficModel(1.0, ServiceDistribution::deterministic(1.0))), {}) ==
        InversionMethod::euler_summation);
}

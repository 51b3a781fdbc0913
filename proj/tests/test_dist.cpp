#include <cmath>

#include "aoilab/dist.hpp"
#include "aoilab/error.hpp"
#include "doctest.h"

using namespace aoilab;

TEST_CASE("laplace_g on the two built-in families") {
  const auto e1 = ServiceDistribution::exponential(1.0);
  const auto d1 = ServiceDistribution::deterministic(1.0);
  CHECK(laplace_g(e1, 0.0).real() == 1.0);
  CHECK(laplace_g(e1, 1.0).real() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(laplace_g(d1, 1.0).real() == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(laplace_g(e1, -1.0), DomainError);
  CHECK_THROWS_AS(laplace_g(e1, Complex(-2.0, 3.0)), DomainError);
  // the exponential law extends analytically left of the axis
  CHECK(laplace_g(e1, -0.5).real() == doctest::Approx(2.0));
}

TEST_CASE("stationary-excess transform") {
  const auto e1 = ServiceDistribution::exponential(1.0);
  const auto d1 = ServiceDistribution::deterministic(1.0);
  CHECK(laplace_gi(e1, 0.0).real() == 1.0);
  CHECK(laplace_gi(d1, 1e-14).real() == 1.0);
  CHECK(laplace_gi(e1, 1.0).real() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(laplace_gi(d1, 2.0).real() == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-14));
  // continuous through the removable point
  CHECK(laplace_gi(d1, 1e-8).real() == doctest::Approx(1.0 - 0.5e-8).epsilon(1e-12));
}

TEST_CASE("identity s G_I / mu + G = 1 off zero") {
  const ServiceDistribution laws[] = {ServiceDistribution::exponential(0.7),
                                      ServiceDistribution::deterministic(1.3)};
  CounterRng rng(11);
  for (const auto& law : laws) {
    for (int k = 0; k < 200; ++k) {
      const Complex s(5.0 * rng.uniform_open(), 10.0 * (rng.uniform_open() - 0.5));
      const Complex lhs = laplace_gi(law, s) * s / law.rate() + laplace_g(law, s);
      CHECK(std::abs(lhs - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("G^ is in (0, 1] and strictly decreasing on the real axis") {
  const ServiceDistribution laws[] = {ServiceDistribution::exponential(2.0),
                                      ServiceDistribution::deterministic(0.5)};
  for (const auto& law : laws) {
    double previous = 1.0;
    for (double s = 0.05; s < 40.0; s *= 1.3) {
      const double g = laplace_g(law, s).real();
      CHECK(g > 0.0);
      CHECK(g < previous);
      previous = g;
    }
  }
}

TEST_CASE("divided difference agrees with the naive quotient away from the diagonal") {
  const ServiceDistribution laws[] = {ServiceDistribution::exponential(1.5),
                                      ServiceDistribution::deterministic(0.8)};
  for (const auto& law : laws) {
    const Complex a(0.3, 0.2), b(1.7, -0.4);
    const Complex naive = (laplace_g(law, a) - laplace_g(law, b)) / (b - a);
    CHECK(std::abs(laplace_g_divided_difference(law, a, b) - naive) < 1e-14);
    // on the diagonal it is -G'
    const Complex diag = laplace_g_divided_difference(law, a, a);
    CHECK(std::abs(diag + laplace_g_derivative(law, a, 1)) < 1e-14);
  }
}

TEST_CASE("moments") {
  CHECK(moment(ServiceDistribution::exponential(1.0), 1) == 1.0);
  CHECK(moment(ServiceDistribution::exponential(1.0), 2) == 2.0);
  CHECK(moment(ServiceDistribution::deterministic(1.0), 2) == 1.0);
  CHECK_THROWS_AS(moment(ServiceDistribution::deterministic(1.0), 3), ArgumentError);
}

TEST_CASE("generic law with an infinite second moment is representable") {
  GenericLaw law;
  law.name = "heavy";
  law.mean = 1.0;
  law.second_moment = std::numeric_limits<double>::infinity();
  law.transform = [](Complex s) { return 1.0 / (1.0 + s); };
  law.sampler = [](CounterRng& r) { return r.exponential(1.0); };
  const auto g = ServiceDistribution::generic(law);
  CHECK(std::isinf(moment(g, 2)));
  CHECK_THROWS_AS(laplace_g(g, -0.1), DomainError);
  // stencil derivative of 1/(1+s) at s=1 is -1/4
  CHECK(laplace_g_derivative(g, 1.0, 1).real() == doctest::Approx(-0.25).epsilon(1e-9));
  CHECK(laplace_g_derivative(g, 1.0, 2).real() == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("sampling: law of large numbers and Monte-Carlo transform") {
  const auto d1 = ServiceDistribution::deterministic(1.0);
  CounterRng rng(3);
  CHECK(sample(d1, rng) == 1.0);

  for (double rate : {1.0, 2.0}) {
    const auto law = ServiceDistribution::exponential(rate);
    CounterRng r(42, static_cast<std::uint64_t>(rate));
    const int n = 1000000;
    double sum = 0.0;
    double e05 = 0.0, e05sq = 0.0, e1 = 0.0, e1sq = 0.0, e2 = 0.0, e2sq = 0.0;
    for (int k = 0; k < n; ++k) {
      const double x = sample(law, r);
      REQUIRE(x > 0.0);
      sum += x;
      const double a = std::exp(-0.5 * x), b = std::exp(-x), c = std::exp(-2.0 * x);
      e05 += a, e05sq += a * a, e1 += b, e1sq += b * b, e2 += c, e2sq += c * c;
    }
    CHECK(std::abs(sum / n - 1.0 / rate) < 0.01 / rate);
    auto within3se = [&](double s, double m1, double m2) {
      const double mean = m1 / n;
      const double se = std::sqrt((m2 / n - mean * mean) / n);
      return std::abs(mean - laplace_g(law, s).real()) < 3.0 * se;
    };
    CHECK(within3se(0.5, e05, e05sq));
    CHECK(within3se(1.0, e1, e1sq));
    CHECK(within3se(2.0, e2, e2sq));
  }
}

TEST_CASE("distribution spec parsing") {
  CHECK(parse_distribution("exp:2").rate() == 2.0);
  CHECK(parse_distribution("det:0.5").mean() == 0.5);
  CHECK(parse_distribution("exp:1.5").spec() == "exp:1.5");
  CHECK_THROWS_WITH_AS(parse_distribution("exp"), doctest::Contains("column 4"), ArgumentError);
  CHECK_THROWS_WITH_AS(parse_distribution("exp:1x"), doctest::Contains("column 6"), ArgumentError);
  CHECK_THROWS_WITH_AS(parse_distribution("gam:1"), doctest::Contains("column 1"), ArgumentError);
  CHECK_THROWS_AS(parse_distribution("det:-1"), ArgumentError);
  CHECK_THROWS_AS(parse_distribution("det:0"), ArgumentError);
}

TEST_CASE("counter-based generator is reproducible and splittable") {
  CounterRng a(99), b(99);
  for (int k = 0; k < 10; ++k) {
    CHECK(a() == b());
  }
  CounterRng c(99, 1);
  CounterRng d(99, 0);
  CHECK(c() != d());
  const auto s1 = a.substream(5), s2 = a.substream(5);
  CHECK(CounterRng(s1)() == CounterRng(s2)());
}

#include "aoilab/dist.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "aoilab/error.hpp"

namespace aoilab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// (1 - e^{-z}) / z, entire.
Complex one_minus_exp_over(Complex z) {
  if (std::abs(z) < 1e-3) {
    return 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0 + z * z * z * z / 120.0;
  }
  return (1.0 - std::exp(-z)) / z;
}

void require_exponential_domain(const Exponential& e, Complex s, Domain domain) {
  if (domain == Domain::checked ? s.real() <= -e.rate : s == Complex(-e.rate, 0.0)) {
    throw DomainError("exponential transform requires Re(s) > -rate");
  }
}

void require_generic_domain(Complex s) {
  if (s.real() < 0.0) {
    throw DomainError("generic service transform requires Re(s) >= 0");
  }
}

// Derivatives of an analytic function sampled along the imaginary direction,
// which keeps the stencil inside Re(s) >= 0.
Complex imaginary_stencil_derivative(const std::function<Complex(Complex)>& f, Complex s,
                                     int order) {
  const double h = 1e-3 * std::max(1.0, std::abs(s));
  const Complex ih(0.0, h);
  const Complex fm2 = f(s - 2.0 * ih), fm1 = f(s - ih), fp1 = f(s + ih), fp2 = f(s + 2.0 * ih);
  if (order == 1) {
    return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * ih);
  }
  const Complex f0 = f(s);
  return -(-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

ServiceDistribution ServiceDistribution::exponential(double rate) {
  if (!finite_positive(rate)) {
    throw ArgumentError("exponential rate must be finite and positive");
  }
  return ServiceDistribution(Exponential{rate});
}

ServiceDistribution ServiceDistribution::deterministic(double value) {
  if (!finite_positive(value)) {
    throw ArgumentError("deterministic size must be finite and positive");
  }
  return ServiceDistribution(Deterministic{value});
}

ServiceDistribution ServiceDistribution::generic(GenericLaw law) {
  if (!finite_positive(law.mean)) {
    throw ArgumentError("generic law needs a finite positive mean");
  }
  if (!(law.second_moment >= law.mean * law.mean)) {
    throw ArgumentError("generic law second moment must be at least mean^2");
  }
  if (!law.transform || !law.sampler) {
    throw ArgumentError("generic law needs a transform evaluator and a sampler");
  }
  return ServiceDistribution(std::move(law));
}

Family ServiceDistribution::family() const noexcept {
  return std::visit(Overloaded{[](const Exponential&) { return Family::exponential; },
                               [](const Deterministic&) { return Family::deterministic; },
                               [](const GenericLaw&) { return Family::generic; }},
                    law_);
}

double ServiceDistribution::mean() const {
  return std::visit(Overloaded{[](const Exponential& e) { return 1.0 / e.rate; },
                               [](const Deterministic& d) { return d.value; },
                               [](const GenericLaw& g) { return g.mean; }},
                    law_);
}

std::string ServiceDistribution::spec() const {
  std::ostringstream out;
  out.precision(17);
  std::visit(Overloaded{[&](const Exponential& e) { out << "exp:" << e.rate; },
                        [&](const Deterministic& d) { out << "det:" << d.value; },
                        [&](const GenericLaw& g) { out << "generic:" << g.name; }},
             law_);
  return out.str();
}

Complex laplace_g(const ServiceDistribution& dist, Complex s, Domain domain) {
  return std::visit(Overloaded{[&](const Exponential& e) -> Complex {
                                 require_exponential_domain(e, s, domain);
                                 return e.rate / (e.rate + s);
                               },
                               [&](const Deterministic& d) -> Complex { return std::exp(-s * d.value); },
                               [&](const GenericLaw& g) -> Complex {
                                 require_generic_domain(s);
                                 return g.transform(s);
                               }},
                    dist.law());
}

Complex laplace_g_derivative(const ServiceDistribution& dist, Complex s, int order) {
  if (order != 1 && order != 2) {
    throw ArgumentError("transform derivative order must be 1 or 2");
  }
  return std::visit(
      Overloaded{[&](const Exponential& e) -> Complex {
                   require_exponential_domain(e, s, Domain::checked);
                   const Complex inv = 1.0 / (e.rate + s);
                   return order == 1 ? -e.rate * inv * inv : 2.0 * e.rate * inv * inv * inv;
                 },
                 [&](const Deterministic& d) -> Complex {
                   const Complex g = std::exp(-s * d.value);
                   return order == 1 ? -d.value * g : d.value * d.value * g;
                 },
                 [&](const GenericLaw& g) -> Complex {
                   require_generic_domain(s);
                   return imaginary_stencil_derivative(g.transform, s, order);
                 }},
      dist.law());
}

Complex laplace_g_divided_difference(const ServiceDistribution& dist, Complex a, Complex b, Domain domain) {
  return std::visit(
      Overloaded{[&](const Exponential& e) -> Complex {
                   require_exponential_domain(e, a, domain);
                   require_exponential_domain(e, b, domain);
                   return e.rate / ((e.rate + a) * (e.rate + b));
                 },
                 [&](const Deterministic& d) -> Complex {
                   return d.value * std::exp(-a * d.value) * one_minus_exp_over((b - a) * d.value);
                 },
                 [&](const GenericLaw& g) -> Complex {
                   require_generic_domain(a);
                   require_generic_domain(b);
                   if (std::abs(b - a) < 1e-9) {
                     return -imaginary_stencil_derivative(g.transform, 0.5 * (a + b), 1);
                   }
                   return (g.transform(a) - g.transform(b)) / (b - a);
                 }},
      dist.law());
}

Complex laplace_gi(const ServiceDistribution& dist, Complex s, Domain domain) {
  if (std::abs(s) < 1e-12) {
    return 1.0;
  }
  return dist.rate() * laplace_g_divided_difference(dist, 0.0, s, domain);
}

double moment(const ServiceDistribution& dist, int p) {
  if (p != 1 && p != 2) {
    throw ArgumentError("moment order must be 1 or 2");
  }
  return std::visit(Overloaded{[&](const Exponential& e) {
                                 return p == 1 ? 1.0 / e.rate : 2.0 / (e.rate * e.rate);
                               },
                               [&](const Deterministic& d) { return p == 1 ? d.value : d.value * d.value; },
                               [&](const GenericLaw& g) { return p == 1 ? g.mean : g.second_moment; }},
                    dist.law());
}

double cdf(const ServiceDistribution& dist, double x) {
  return std::visit(Overloaded{[&](const Exponential& e) { return x <= 0.0 ? 0.0 : -std::expm1(-e.rate * x); },
                               [&](const Deterministic& d) { return x >= d.value ? 1.0 : 0.0; },
                               [&](const GenericLaw& g) -> double {
                                 if (!g.cdf) {
                                   throw UnsupportedError("generic law '" + g.name + "' has no cdf");
                                 }
                                 return g.cdf(x);
                               }},
                    dist.law());
}

double sample(const ServiceDistribution& dist, CounterRng& rng) {
  return std::visit(Overloaded{[&](const Exponential& e) { return rng.exponential(e.rate); },
                               [&](const Deterministic& d) { return d.value; },
                               [&](const GenericLaw& g) { return g.sampler(rng); }},
                    dist.law());
}

ServiceDistribution parse_distribution(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw ArgumentError("distribution spec '" + std::string(spec) +
                        "': expected '<family>:<parameter>' (column " +
                        std::to_string(spec.size() + 1) + ")");
  }
  const std::string_view family = spec.substr(0, colon);
  const std::string_view number = spec.substr(colon + 1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
  const auto column = colon + 2 + static_cast<std::size_t>(end - number.data());
  if (ec != std::errc() || end != number.data() + number.size() || number.empty()) {
    throw ArgumentError("distribution spec '" + std::string(spec) + "': bad number at column " +
                        std::to_string(column));
  }
  if (!finite_positive(value)) {
    throw ArgumentError("distribution spec '" + std::string(spec) +
                        "': parameter must be positive (column " + std::to_string(colon + 2) + ")");
  }
  if (family == "exp") {
    return ServiceDistribution::exponential(value);
  }
  if (family == "det") {
    return ServiceDistribution::deterministic(value);
  }
  throw ArgumentError("distribution spec '" + std::string(spec) +
                      "': unknown family at column 1 (expected exp or det)");
}

}  // namespace aoilab

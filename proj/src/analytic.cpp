#include "aoilab/analytic.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "aoilab/error.hpp"

namespace aoilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_binary_state(int i, int j) {
  if ((i != 0 && i != 1) || (j != 0 && j != 1)) {
    throw ArgumentError("kernel states must be 0 or 1");
  }
}

bool is_two_cell(PolicyId p) { return p.n == 2; }

void require_two_cell(PolicyId policy) {
  if (!is_two_cell(policy)) {
    throw UnsupportedError("Palm-conditional transforms are available for B2 and P2 only, not " +
                           policy.name());
  }
}

void require_closed_form(PolicyId policy) {
  if (policy.n > 2) {
    throw UnsupportedError("no closed form for " + policy.name() + " (buffers of three or more cells)");
  }
}

Complex g_hat(const TrafficModel& tm, Complex s, Domain domain = Domain::checked) {
  return laplace_g(tm.dist, s, domain);
}

// G^(s) - G^(s + lambda) without cancellation.
Complex g_drop(const TrafficModel& tm, Complex s) {
  return tm.lambda * laplace_g_divided_difference(tm.dist, s, s + tm.lambda);
}

// Mean-value building block shared by the B2 and P2 formulas.
double residual_mean_term(const TrafficModel& tm) {
  const double lam = tm.lambda;
  const double g = k_chain_p0(tm);
  const double dg = laplace_g_derivative(tm.dist, lam, 1).real();
  return (g - lam * dg + 0.5 * lam * lam * moment(tm.dist, 2)) / (lam * (tm.rho() + g));
}

// (e^{-y} - 1 + y) / y^2, entire, equal to 1/2 at 0.
double exp_second_remainder(double y) {
  if (std::abs(y) < 0.1) {
    double term = 0.5, sum = 0.0;
    for (int k = 2; k < 20; ++k) {
      sum += term;
      term *= -y / (k + 1);
    }
    return sum;
  }
  return (std::exp(-y) - 1.0 + y) / (y * y);
}

// (1 - e^{-y}) / y, equal to 1 at 0.
double exp_first_remainder(double y) {
  if (y == 0.0) {
    return 1.0;
  }
  return -std::expm1(-y) / y;
}

double normalized_density_b2(double lam, double t) {
  if (lam == 1.0) {
    return (t * t + t) * std::exp(-t) / 3.0;
  }
  const double delta = lam - 1.0;
  if (std::abs(delta) < 1e-3) {
    // Same expression regrouped so that the (lambda - 1)^2 cancellation is explicit.
    return lam / (lam * lam + lam + 1.0) * std::exp(-t) *
           (t + 0.5 * lam * t * t + t * t * exp_second_remainder(delta * t));
  }
  const double c = lam / ((lam * lam + lam + 1.0) * delta * delta);
  const double q = 0.5 * lam * delta * delta * t * t + lam * delta * t - 1.0;
  return c * (q * std::exp(-t) + std::exp(-lam * t));
}

double normalized_density_p2(double lam, double t) {
  if (lam == 1.0) {
    return (7.0 + 2.0 * t) * std::exp(-2.0 * t) / 3.0 + (6.0 * t - 7.0) * std::exp(-t) / 3.0;
  }
  const double r = lam * lam + lam + 1.0;
  const double delta = lam - 1.0;
  const double q2 = ((lam * lam + lam) * t + lam * lam + 3.0 * lam + 3.0) / r;
  if (std::abs(delta) < 1e-3) {
    const double e1 = lam * (lam + 2.0) * t / r - (lam * lam + 3.0 * lam + 3.0) / r +
                      lam * t * exp_first_remainder(delta * t);
    return e1 * std::exp(-t) + q2 * std::exp(-(lam + 1.0) * t);
  }
  const double q1 = ((lam * lam * lam + lam * lam - 2.0 * lam) * t - lam * lam + lam + 3.0) / (r * delta);
  return q1 * std::exp(-t) + q2 * std::exp(-(lam + 1.0) * t) - lam / delta * std::exp(-lam * t);
}

// sum_j (-1)^{j-1} (x - j)^{j - 1 + shift} / ((j - 1 + shift)! m^j), j = 1..floor(x).
double lm_series(double m, double x, int shift) {
  if (!(m > 0.0)) {
    throw ArgumentError("L_m series needs m > 0");
  }
  long double sum = 0.0L, biggest = 0.0L;
  const long double log_m = std::log(static_cast<long double>(m));
  const int terms = static_cast<int>(std::floor(x));
  for (int j = 1; j <= terms; ++j) {
    const int power = j - 1 + shift;
    const long double base = static_cast<long double>(x) - j;
    long double magnitude;
    if (power == 0) {
      magnitude = std::exp(-j * log_m);
    } else if (base <= 0.0L) {
      magnitude = 0.0L;
    } else {
      magnitude = std::exp(power * std::log(base) - std::lgamma(static_cast<long double>(power) + 1.0L) -
                           j * log_m);
    }
    biggest = std::max(biggest, magnitude);
    sum += (j % 2 == 1) ? magnitude : -magnitude;
  }
  if (biggest * 1e-18L > 1e-10L) {
    throw NumericError("L_m series loses precision at this argument", static_cast<double>(sum),
                       static_cast<double>(biggest));
  }
  return static_cast<double>(sum);
}

// E[h(u - X)] where X has an atom of mass `atom` at 0 and density `weight`
// on [lo, hi]; `breaks` are the arguments at which h is not smooth.
template <class Weight, class Fn>
double shifted_expectation(double u, double atom, double lo, double hi, Weight weight, Fn h,
                           std::initializer_list<double> breaks) {
  double total = atom * h(u);
  if (hi <= lo) {
    return total;
  }
  std::vector<double> cuts{lo, hi};
  for (double b : breaks) {
    const double x = u - b;
    if (x > lo && x < hi) {
      cuts.push_back(x);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] - cuts[k] <= 0.0) {
      continue;
    }
    total += boost::math::quadrature::gauss<double, 30>::integrate(
        [&](double x) { return weight(x) * h(u - x); }, cuts[k], cuts[k + 1]);
  }
  return total;
}

struct TwoCellDeterministic {
  double d, lam, g, w1, w2;

  explicit TwoCellDeterministic(const TrafficModel& tm)
      : d(tm.dist.mean()), lam(tm.lambda), g(std::exp(-tm.lambda * tm.dist.mean())) {
    const double rho = lam * d;
    w1 = g / (rho + g);
    w2 = rho / (rho + g);
  }

  // Third summand: d + Exp(lambda) with weight w1, Uniform(0, d) with weight w2.
  double residual_ccdf(double v) const {
    if (v < 0.0) {
      return 1.0;
    }
    const double shifted = v < d ? 1.0 : std::exp(-lam * (v - d));
    const double uniform = v < d ? 1.0 - v / d : 0.0;
    return w1 * shifted + w2 * uniform;
  }

  double residual_density(double v) const {
    if (v < 0.0) {
      return 0.0;
    }
    return v < d ? w2 / d : w1 * lam * std::exp(-lam * (v - d));
  }

  template <class Fn>
  double blocking(double u, Fn h) const {
    // (d - tau)^+: atom e^{-lambda d} at 0, density lambda e^{-lambda (d - x)} on (0, d).
    return shifted_expectation(
        u, g, 0.0, d, [&](double x) { return lam * std::exp(-lam * (d - x)); }, h, {0.0, d});
  }

  template <class Fn>
  double pushout(double u, Fn h) const {
    // tau 1{tau < d}: atom e^{-lambda d} at 0, density lambda e^{-lambda x} on (0, d).
    return shifted_expectation(
        u, g, 0.0, d, [&](double x) { return lam * std::exp(-lam * x); }, h, {0.0, d});
  }
};

void require_deterministic(const TrafficModel& tm) {
  if (tm.dist.family() != Family::deterministic) {
    throw ArgumentError("time-domain decomposition requires deterministic service");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

double kernel_q(const TrafficModel& traffic, int i, int j, double x) {
  require_binary_state(i, j);
  if (!(x >= 0.0)) {
    throw ArgumentError("kernel argument must be nonnegative");
  }
  if (x == 0.0) {
    return 0.0;
  }
  const double lam = traffic.lambda;
  const double decay = std::isinf(x) ? 0.0 : std::exp(-lam * x);

  // G(x), H(x) = int_0^x e^{-lam u} dG, R(x) = e^{-lam x} int_0^x e^{lam u} dG.
  double big_g = 0.0, h = 0.0, r = 0.0;
  switch (traffic.dist.family()) {
    case Family::exponential: {
      const double mu = traffic.mu();
      big_g = cdf(traffic.dist, x);
      h = mu / (mu + lam) * (std::isinf(x) ? 1.0 : -std::expm1(-(mu + lam) * x));
      if (!std::isinf(x)) {
        const double lo = std::min(lam, mu), hi = std::max(lam, mu);
        r = mu * std::exp(-lo * x) * x * exp_first_remainder((hi - lo) * x);
      }
      break;
    }
    case Family::deterministic: {
      const double d = traffic.dist.mean();
      if (x >= d) {
        big_g = 1.0;
        h = std::exp(-lam * d);
        r = std::isinf(x) ? 0.0 : std::exp(-lam * (x - d));
      }
      break;
    }
    case Family::generic: {
      const auto& law = std::get<GenericLaw>(traffic.dist.law());
      if (!law.density) {
        throw UnsupportedError("kernel quadrature needs the density of generic law '" + law.name + "'");
      }
      auto integrate = [&](auto weight) {
        double err = 0.0;
        const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            [&](double u) { return weight(u) * law.density(u); }, 0.0, x, 15, 1e-12, &err);
        if (!(err <= 1e-10)) {
          throw NumericError("kernel quadrature did not reach 1e-10 (error estimate " +
                                 std::to_string(err) + ")",
                             value, err);
        }
        return value;
      };
      big_g = integrate([](double) { return 1.0; });
      h = integrate([&](double u) { return std::exp(-lam * u); });
      if (!std::isinf(x)) {
        r = integrate([&](double u) { return std::exp(-lam * (x - u)); });
      }
      break;
    }
  }

  if (i == 1) {
    return j == 0 ? h : big_g - h;
  }
  return j == 0 ? h - decay * big_g : big_g - h - r + decay * big_g;
}

double k_chain_p0(const TrafficModel& traffic) { return laplace_g(traffic.dist, traffic.lambda).real(); }

Complex segment_lt(const TrafficModel& traffic, std::optional<int> i, Complex s) {
  const double lam = traffic.lambda;
  const Complex g = g_hat(traffic, s);
  if (!i) {
    const double p0 = k_chain_p0(traffic);
    return (1.0 - p0 + p0 * lam / (lam + s)) * g;
  }
  if (*i == 0) {
    return lam / (lam + s) * g;
  }
  if (*i == 1) {
    return g;
  }
  throw ArgumentError("segment state must be 0 or 1");
}

double mean_segment(const TrafficModel& traffic) {
  return traffic.dist.mean() + k_chain_p0(traffic) / traffic.lambda;
}

// ---------------------------------------------------------------------------

PalmTerm palm_conditional_lt(PolicyId policy, const TrafficModel& traffic, int i, int j, Complex s) {
  require_two_cell(policy);
  require_binary_state(i, j);
  const double lam = traffic.lambda;
  const Complex shifted = g_hat(traffic, s + lam);
  const Complex next = j == 0 ? shifted : g_drop(traffic, s);

  Complex previous;
  if (i == 0) {
    previous = k_chain_p0(traffic);
  } else if (policy.kind == PolicyId::Kind::blocking) {
    // lambda (G^(s) - G^(lambda)) / (lambda - s), continuous through s = lambda.
    previous = lam * laplace_g_divided_difference(traffic.dist, s, lam);
  } else {
    previous = lam / (lam + s) * (1.0 - shifted);
  }
  return PalmTerm{i, j, previous * next};
}

Complex palm_assembled_lt(PolicyId policy, const TrafficModel& traffic, Complex s) {
  require_two_cell(policy);
  const double lam = traffic.lambda;
  const double rho = traffic.rho();
  Complex on_empty = 0.0, on_busy = 0.0;
  for (int i = 0; i < 2; ++i) {
    on_empty += palm_conditional_lt(policy, traffic, i, 0, s).value;
    on_busy += palm_conditional_lt(policy, traffic, i, 1, s).value;
  }
  // (lambda / s) [E0(.;K0=0)(1 - Phi_0) + E0(.;K0=1)(1 - Phi_1)] / (rho + G^(lambda)),
  // with 1 - Phi_i rewritten through G^_I so the s = 0 singularity cancels exactly.
  const Complex excess = laplace_gi(traffic.dist, s);
  const Complex numerator = on_empty * (1.0 + rho * excess) / (lam + s) + on_busy * excess / traffic.mu();
  return lam * numerator / (rho + k_chain_p0(traffic));
}

std::array<Complex, 3> aoi_factors(PolicyId policy, const TrafficModel& traffic, Complex s, Domain domain) {
  require_two_cell(policy);
  const double lam = traffic.lambda;
  const double g_lam = k_chain_p0(traffic);
  const double rho = traffic.rho();
  const Complex shifted = g_hat(traffic, s + lam, domain);

  const Complex service = g_hat(traffic, s, domain);
  const Complex wait = policy.kind == PolicyId::Kind::blocking
                           ? g_lam + lam * laplace_g_divided_difference(traffic.dist, s, lam, domain)
                           : g_lam + lam / (lam + s) * (1.0 - shifted);
  const Complex residual =
      (lam / (lam + s) * shifted + rho * laplace_gi(traffic.dist, s, domain)) / (rho + g_lam);
  return {service, wait, residual};
}

Complex aoi_lt(PolicyId policy, const TrafficModel& traffic, Complex s, Domain domain) {
  require_closed_form(policy);
  const double lam = traffic.lambda;
  if (policy.n == 2) {
    const auto f = aoi_factors(policy, traffic, s, domain);
    return f[0] * f[1] * f[2];
  }
  if (policy.kind == PolicyId::Kind::blocking) {
    const double mu = traffic.mu();
    return lam * mu / (lam + mu) * g_hat(traffic, s, domain) * (1.0 + traffic.rho() * laplace_gi(traffic.dist, s, domain)) /
           (lam + s);
  }
  const Complex shifted = lam * g_hat(traffic, s + lam, domain);
  return shifted / (s + shifted);
}

AoiTransform aoi_transform(PolicyId policy, const TrafficModel& traffic) {
  require_closed_form(policy);
  AoiTransform lt;
  lt.label = policy.name() + " " + traffic.dist.spec() + " lambda=" + std::to_string(traffic.lambda);
  lt.policy = policy;
  lt.contour_safe = traffic.dist.family() == Family::exponential;
  const Domain domain = lt.contour_safe ? Domain::continued : Domain::checked;
  lt.eval = [policy, traffic, domain](Complex s) { return aoi_lt(policy, traffic, s, domain); };
  return lt;
}

double aoi_mean(PolicyId policy, const TrafficModel& traffic) {
  require_closed_form(policy);
  const double lam = traffic.lambda;
  const double mu = traffic.mu();
  const double g = k_chain_p0(traffic);
  if (policy.preemptive()) {
    return 1.0 / (lam * g);
  }
  const double second = moment(traffic.dist, 2);
  if (std::isinf(second)) {
    return kInf;
  }
  if (policy.n == 1) {
    return 1.0 / mu + 1.0 / lam + lam * mu * second / (2.0 * (lam + mu));
  }
  const double dg = laplace_g_derivative(traffic.dist, lam, 1).real();
  if (policy.kind == PolicyId::Kind::blocking) {
    return 2.0 / mu - (1.0 - g) / lam + residual_mean_term(traffic);
  }
  return 1.0 / mu + (1.0 - g + lam * dg) / lam + residual_mean_term(traffic);
}

double transform_mean(const std::function<Complex(Complex)>& lt, bool two_sided) {
  const double h = 1e-5;
  if (two_sided) {
    return -(std::log(lt(h).real()) - std::log(lt(-h).real())) / (2.0 * h);
  }
  const double l1 = std::log(lt(h).real()), l2 = std::log(lt(2.0 * h).real());
  return -(4.0 * l1 - l2) / (2.0 * h);
}

double transform_variance(const std::function<Complex(Complex)>& lt, bool two_sided) {
  const double h = 1e-4;
  if (two_sided) {
    return (std::log(lt(h).real()) + std::log(lt(-h).real())) / (h * h);
  }
  const double l1 = std::log(lt(h).real()), l2 = std::log(lt(2.0 * h).real()),
               l3 = std::log(lt(3.0 * h).real());
  return (-5.0 * l1 + 4.0 * l2 - l3) / (h * h);
}

double aoi_variance(PolicyId policy, const TrafficModel& traffic) {
  require_closed_form(policy);
  if (policy == PolicyId::P(2) && traffic.dist.family() == Family::exponential) {
    const double sd = p2_exponential_sd(traffic.lambda, traffic.mu());
    return sd * sd;
  }
  if (!policy.preemptive() && std::isinf(moment(traffic.dist, 2))) {
    return kInf;
  }
  const bool two_sided = traffic.dist.family() != Family::generic;
  return transform_variance([&](Complex s) { return aoi_lt(policy, traffic, s); }, two_sided);
}

double aoi_sd(PolicyId policy, const TrafficModel& traffic) {
  return std::sqrt(aoi_variance(policy, traffic));
}

// ---------------------------------------------------------------------------

Complex b2_exponential_lt(double lambda, double mu, Complex s) {
  const double base = lambda * lambda + lambda * mu + mu * mu;
  const Complex service = mu / (s + mu);
  return service * service * service * lambda / (s + lambda) *
         (s * s + 2.0 * s * (lambda + mu) + base) / base;
}

Complex p2_exponential_lt(double lambda, double mu, Complex s) {
  const double base = lambda * lambda + lambda * mu + mu * mu;
  return mu / (mu + s) * (mu / (mu + lambda) + lambda / (lambda + mu + s)) *
         (mu * mu / base * lambda / (lambda + s) * (lambda + mu) / (lambda + mu + s) +
          (lambda * lambda + lambda * mu) / base * mu / (mu + s));
}

double b2_exponential_mean(double lambda, double mu) {
  const double l = lambda, m = mu;
  return (3 * l * l * l + 2 * l * l * m + 2 * l * m * m + m * m * m) / (l * m * (l * l + l * m + m * m));
}

double p2_exponential_mean(double lambda, double mu) {
  const double l = lambda, m = mu;
  const double num = 2 * std::pow(l, 5) + 7 * std::pow(l, 4) * m + 8 * std::pow(l, 3) * m * m +
                     7 * l * l * std::pow(m, 3) + 4 * l * std::pow(m, 4) + std::pow(m, 5);
  return num / (l * m * (l + m) * (l + m) * (l * l + l * m + m * m));
}

double p2_exponential_sd(double lambda, double mu) {
  const double r = lambda / mu;
  static constexpr double coeffs[] = {2, 12, 35, 60, 66, 56, 45, 34, 18, 6, 1};
  double poly = 0.0;
  for (double c : coeffs) {
    poly = poly * r + c;
  }
  return std::sqrt(poly) / (mu * r * (r + 1.0) * (r + 1.0) * (r * r + r + 1.0));
}

double closed_density_exp(PolicyId policy, double lambda, double t, double mu) {
  if (!(t >= 0.0)) {
    throw ArgumentError("density argument must be nonnegative");
  }
  if (!(lambda > 0.0) || !(mu > 0.0)) {
    throw ArgumentError("rates must be positive");
  }
  if (policy == PolicyId::B(2)) {
    return mu * normalized_density_b2(lambda / mu, mu * t);
  }
  if (policy == PolicyId::P(2)) {
    return mu * normalized_density_p2(lambda / mu, mu * t);
  }
  throw UnsupportedError("closed exponential density is available for B2 and P2 only");
}

// ---------------------------------------------------------------------------

Complex high_traffic_limit_lt(PolicyId policy, const ServiceDistribution& dist, Complex s, Domain domain) {
  if (policy.preemptive()) {
    throw UnsupportedError("P1 has no distribution-free high-traffic limit");
  }
  const Complex g = laplace_g(dist, s, domain);
  const int copies = policy.kind == PolicyId::Kind::pushout ? 1 : policy.n;
  return std::pow(g, copies) * laplace_gi(dist, s, domain);
}

AoiTransform high_traffic_transform(PolicyId policy, const ServiceDistribution& dist) {
  if (policy.preemptive()) {
    throw UnsupportedError("P1 has no distribution-free high-traffic limit");
  }
  AoiTransform lt;
  lt.label = policy.name() + " high-traffic limit " + dist.spec();
  lt.policy = policy;
  lt.contour_safe = dist.family() == Family::exponential;
  const Domain domain = lt.contour_safe ? Domain::continued : Domain::checked;
  lt.eval = [policy, dist, domain](Complex s) { return high_traffic_limit_lt(policy, dist, s, domain); };
  return lt;
}

// ---------------------------------------------------------------------------

Complex lm_transform(double m, Complex s) { return 1.0 / (m * s * std::exp(s) + 1.0); }

double q_polynomial(int p, double z) {
  if (p < 1) {
    throw ArgumentError("Q_p needs p >= 1");
  }
  long double sum = 0.0L, falling = 1.0L, zk = 1.0L;
  for (int k = 1; k <= p; ++k) {
    falling *= (p - k + 1);
    zk *= z;
    sum += falling * std::pow(static_cast<long double>(k), p - k) * zk;
  }
  return static_cast<double>(sum);
}

double det_p1_moment(double rho, int p) {
  if (!(rho > 0.0)) {
    throw ArgumentError("rho must be positive");
  }
  if (p < 1) {
    throw ArgumentError("moment order must be at least 1");
  }
  const double m = std::exp(rho) / rho;
  const double sign = (p % 2 == 0) ? 1.0 : -1.0;
  return sign * q_polynomial(p, -m);
}

double lm_density_series(double m, double t) {
  if (t < 1.0) {
    return 0.0;
  }
  return lm_series(m, t, 0);
}

double lm_ccdf_series(double m, double t) {
  if (t < 1.0) {
    return 1.0;
  }
  return 1.0 - lm_series(m, t, 1);
}

// ---------------------------------------------------------------------------

double deterministic_ccdf(PolicyId policy, const TrafficModel& traffic, double t) {
  require_deterministic(traffic);
  require_closed_form(policy);
  const double d = traffic.dist.mean();
  const double lam = traffic.lambda;
  if (t < d) {
    return 1.0;
  }
  const double u = t - d;
  if (policy.preemptive()) {
    const double rho = lam * d;
    return lm_ccdf_series(std::exp(rho) / rho, t / d);
  }
  if (policy.n == 1) {
    // d + tau + B U with B ~ Bernoulli(rho / (1 + rho)), U ~ Uniform(0, d).
    const double rho = lam * d;
    const double p = rho / (1.0 + rho);
    const double a = std::min(u, d);
    const double inner = std::exp(-lam * (u - a)) * -std::expm1(-lam * a) / lam + (d - a);
    return (1.0 - p) * std::exp(-lam * u) + p * inner / d;
  }
  const TwoCellDeterministic parts(traffic);
  auto h = [&](double v) { return parts.residual_ccdf(v); };
  return policy.kind == PolicyId::Kind::blocking ? parts.blocking(u, h) : parts.pushout(u, h);
}

double deterministic_density(PolicyId policy, const TrafficModel& traffic, double t) {
  require_deterministic(traffic);
  require_closed_form(policy);
  const double d = traffic.dist.mean();
  const double lam = traffic.lambda;
  if (t < d) {
    return 0.0;
  }
  const double u = t - d;
  if (policy.preemptive()) {
    const double rho = lam * d;
    return lm_density_series(std::exp(rho) / rho, t / d) / d;
  }
  if (policy.n == 1) {
    const double rho = lam * d;
    const double p = rho / (1.0 + rho);
    const double a = std::min(u, d);
    return (1.0 - p) * lam * std::exp(-lam * u) + p / d * std::exp(-lam * (u - a)) * -std::expm1(-lam * a);
  }
  const TwoCellDeterministic parts(traffic);
  auto h = [&](double v) { return parts.residual_density(v); };
  return policy.kind == PolicyId::Kind::blocking ? parts.blocking(u, h) : parts.pushout(u, h);
}

}  // namespace aoilab

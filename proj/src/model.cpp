#include "aoilab/model.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "aoilab/error.hpp"

namespace aoilab {

PolicyId PolicyId::B(int n) {
  if (n < 1) {
    throw ArgumentError("buffer size must be at least 1");
  }
  return PolicyId{Kind::blocking, n};
}

PolicyId PolicyId::P(int n) {
  if (n < 1) {
    throw ArgumentError("buffer size must be at least 1");
  }
  return PolicyId{Kind::pushout, n};
}

std::string PolicyId::token() const {
  return (kind == Kind::blocking ? "b" : "p") + std::to_string(n);
}

std::string PolicyId::name() const {
  return (kind == Kind::blocking ? "B" : "P") + std::to_string(n);
}

PolicyId parse_policy(std::string_view token) {
  if (token.size() < 2) {
    throw ArgumentError("policy '" + std::string(token) + "': expected b<n> or p<n> (column 1)");
  }
  const char head = static_cast<char>(std::tolower(static_cast<unsigned char>(token.front())));
  if (head != 'b' && head != 'p') {
    throw ArgumentError("policy '" + std::string(token) + "': unknown kind at column 1");
  }
  int n = 0;
  const auto digits = token.substr(1);
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc() || end != digits.data() + digits.size() || n < 1) {
    throw ArgumentError("policy '" + std::string(token) + "': bad buffer size at column " +
                        std::to_string(2 + (end - digits.data())));
  }
  return head == 'b' ? PolicyId::B(n) : PolicyId::P(n);
}

TrafficModel::TrafficModel(double lambda, ServiceDistribution dist)
    : lambda(lambda), dist(std::move(dist)) {
  if (!(std::isfinite(lambda) && lambda > 0.0)) {
    throw ArgumentError("arrival rate must be finite and positive");
  }
}

}  // namespace aoilab

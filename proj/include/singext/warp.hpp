#pragma once

#include <json.hpp>
#include <vector>

namespace singext {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// One summand of a warping function f(t).
struct WarpTerm {
  enum class Type { constant, sine, exp };
  Type type = Type::constant;
  double value = 0.0;      // constant
  double amplitude = 0.0;  // sine: amplitude * sin(frequency * t + phase)
  double frequency = 1.0;
  double phase = 0.0;
  double scale = 0.0;  // exp: scale * exp(rate * t)
  double rate = 0.0;
};

// Warping function of a surface of revolution, a finite sum of constant,
// sine and exponential terms so derivatives and enclosures are exact.
class WarpFunction {
 public:
  WarpFunction() = default;
  explicit WarpFunction(std::vector<WarpTerm> terms) : terms_(std::move(terms)) {}

  static WarpFunction from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  double operator()(double t) const { return derivative(0, t); }
  double derivative(int k, double t) const;
  // Enclosure of the k-th derivative over [lo, hi].
  Interval range(int k, double lo, double hi) const;
  // Enclosure over the whole real line; bounds may be infinite.
  Interval global_range(int k) const;

  const std::vector<WarpTerm>& terms() const { return terms_; }

 private:
  std::vector<WarpTerm> terms_;
};

}  // namespace singext

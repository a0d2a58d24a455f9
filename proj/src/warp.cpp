#include "singext/warp.hpp"

#include <algorithm>
#include <cmath>

#include "singext/error.hpp"
#include "singext/types.hpp"

namespace singext {

namespace {

// Exact range of sin over [a, b].
Interval sin_range(double a, double b) {
  if (b - a >= 2.0 * kPi) return {-1.0, 1.0};
  double lo = std::min(std::sin(a), std::sin(b));
  double hi = std::max(std::sin(a), std::sin(b));
  // peaks at pi/2 + 2 pi n, troughs at -pi/2 + 2 pi n
  if (std::floor((b - kPi / 2) / (2 * kPi)) >= std::ceil((a - kPi / 2) / (2 * kPi))) hi = 1.0;
  if (std::floor((b + kPi / 2) / (2 * kPi)) >= std::ceil((a + kPi / 2) / (2 * kPi))) lo = -1.0;
  return {lo, hi};
}

Interval scale_interval(Interval x, double c) {
  if (c >= 0) return {c * x.lo, c * x.hi};
  return {c * x.hi, c * x.lo};
}

}  // namespace

WarpFunction WarpFunction::from_json(const nlohmann::json& j) {
  const nlohmann::json& arr = j.is_array() ? j : j.at("terms");
  std::vector<WarpTerm> terms;
  for (const auto& t : arr) {
    WarpTerm w;
    const std::string type = t.at("type").get<std::string>();
    if (type == "constant") {
      w.type = WarpTerm::Type::constant;
      w.value = t.at("value").get<double>();
    } else if (type == "sine") {
      w.type = WarpTerm::Type::sine;
      w.amplitude = t.at("amplitude").get<double>();
      w.frequency = t.value("frequency", 1.0);
      w.phase = t.value("phase", 0.0);
    } else if (type == "exp") {
      w.type = WarpTerm::Type::exp;
      w.scale = t.value("scale", 1.0);
      w.rate = t.at("rate").get<double>();
    } else {
      fail(ErrorCode::InvalidInput, "unknown warp term type '" + type + "'");
    }
    terms.push_back(w);
  }
  if (terms.empty()) fail(ErrorCode::InvalidInput, "warp function has no terms");
  return WarpFunction(std::move(terms));
}

nlohmann::json WarpFunction::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& w : terms_) {
    switch (w.type) {
      case WarpTerm::Type::constant: arr.push_back({{"type", "constant"}, {"value", w.value}}); break;
      case WarpTerm::Type::sine:
        arr.push_back({{"type", "sine"}, {"amplitude", w.amplitude}, {"frequency", w.frequency}, {"phase", w.phase}});
        break;
      case WarpTerm::Type::exp: arr.push_back({{"type", "exp"}, {"scale", w.scale}, {"rate", w.rate}}); break;
    }
  }
  return {{"terms", arr}};
}

double WarpFunction::derivative(int k, double t) const {
  double s = 0.0;
  for (const auto& w : terms_) {
    switch (w.type) {
      case WarpTerm::Type::constant: s += (k == 0) ? w.value : 0.0; break;
      case WarpTerm::Type::sine:
        s += w.amplitude * std::pow(w.frequency, k) * std::sin(w.frequency * t + w.phase + k * kPi / 2);
        break;
      case WarpTerm::Type::exp: s += w.scale * std::pow(w.rate, k) * std::exp(w.rate * t); break;
    }
  }
  return s;
}

Interval WarpFunction::range(int k, double lo, double hi) const {
  Interval acc{0.0, 0.0};
  for (const auto& w : terms_) {
    Interval r{0.0, 0.0};
    switch (w.type) {
      case WarpTerm::Type::constant:
        if (k == 0) r = {w.value, w.value};
        break;
      case WarpTerm::Type::sine: {
        double a = w.frequency * lo + w.phase + k * kPi / 2;
        double b = w.frequency * hi + w.phase + k * kPi / 2;
        if (a > b) std::swap(a, b);
        r = scale_interval(sin_range(a, b), w.amplitude * std::pow(w.frequency, k));
        break;
      }
      case WarpTerm::Type::exp: {
        double c = w.scale * std::pow(w.rate, k);
        double ea = std::exp(w.rate * lo), eb = std::exp(w.rate * hi);
        r = {std::min(c * ea, c * eb), std::max(c * ea, c * eb)};
        break;
      }
    }
    acc.lo += r.lo;
    acc.hi += r.hi;
  }
  return acc;
}

Interval WarpFunction::global_range(int k) const {
  Interval acc{0.0, 0.0};
  for (const auto& w : terms_) {
    Interval r{0.0, 0.0};
    switch (w.type) {
      case WarpTerm::Type::constant:
        if (k == 0) r = {w.value, w.value};
        break;
      case WarpTerm::Type::sine: {
        double c = std::abs(w.amplitude * std::pow(w.frequency, k));
        if (w.frequency == 0.0 && k > 0) c = 0.0;
        r = (w.frequency == 0.0 && k == 0) ? Interval{w.amplitude * std::sin(w.phase), w.amplitude * std::sin(w.phase)}
                                           : Interval{-c, c};
        break;
      }
      case WarpTerm::Type::exp: {
        double c = w.scale * std::pow(w.rate, k);
        if (w.rate == 0.0) {
          r = {c, c};
        } else if (c > 0) {
          r = {0.0, kInf};
        } else if (c < 0) {
          r = {-kInf, 0.0};
        }
        break;
      }
    }
    acc.lo += r.lo;
    acc.hi += r.hi;
  }
  return acc;
}

}  // namespace singext

#include "reng/interest.hpp"

#include <algorithm>
#include <cmath>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

namespace reng {

InterestCurve::InterestCurve(double r) : InterestCurve(std::vector<double>{0.0}, std::vector<double>{r}) {}

InterestCurve::InterestCurve(std::vector<double> knots, std::vector<double> rates)
    : knots_(std::move(knots)), rates_(std::move(rates)) {
  if (knots_.empty() || knots_.size() != rates_.size())
    throw ConfigError("interest curve: knots and rates must be non-empty and of equal length");
  if (knots_[0] != 0.0) throw ConfigError("interest curve: first knot must be 0");
  for (size_t k = 0; k < knots_.size(); ++k) {
    if (!std::isfinite(rates_[k]) || !std::isfinite(knots_[k]))
      throw ConfigError("interest curve: non-finite knot or rate");
    if (k && !(knots_[k] > knots_[k - 1])) throw ConfigError("interest curve: knots must increase");
  }
  cum_.assign(knots_.size(), 0.0);
  for (size_t k = 1; k < knots_.size(); ++k)
    cum_[k] = cum_[k - 1] + rates_[k - 1] * (knots_[k] - knots_[k - 1]);
}

InterestCurve InterestCurve::forward_curve_at(const InterestCurve& realized, const InterestCurve& forward,
                                              double u) {
  if (!(u >= 0.0)) throw ConfigError("forward curve date must be non-negative");
  std::vector<double> knots, rates;
  for (size_t k = 0; k < realized.knots_.size() && realized.knots_[k] < u; ++k) {
    knots.push_back(realized.knots_[k]);
    rates.push_back(realized.rates_[k]);
  }
  auto push = [&](double t, double r) {
    if (!knots.empty() && knots.back() == t) rates.back() = r;
    else {
      knots.push_back(t);
      rates.push_back(r);
    }
  };
  push(u, forward.force(u));
  for (size_t k = 0; k < forward.knots_.size(); ++k)
    if (forward.knots_[k] > u) push(forward.knots_[k], forward.rates_[k]);
  return InterestCurve(std::move(knots), std::move(rates));
}

double InterestCurve::force(double t) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  const size_t k = it == knots_.begin() ? 0 : static_cast<size_t>(it - knots_.begin()) - 1;
  return rates_[k];
}

double InterestCurve::log_accumulation(double t) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  const size_t k = it == knots_.begin() ? 0 : static_cast<size_t>(it - knots_.begin()) - 1;
  return cum_[k] + rates_[k] * (t - knots_[k]);
}

double InterestCurve::accumulation(double t) const { return std::exp(log_accumulation(t)); }

double InterestCurve::value_factor(double t, double s) const {
  return std::exp(log_accumulation(t) - log_accumulation(s));
}

double InterestCurve::annuity(double a, double b, double ref) const {
  if (!(b > a)) return 0.0;
  const double lref = log_accumulation(ref);
  double total = 0.0, x = a;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), a);
  size_t k = it == knots_.begin() ? 0 : static_cast<size_t>(it - knots_.begin()) - 1;
  while (x < b) {
    const double end = k + 1 < knots_.size() ? std::min(b, knots_[k + 1]) : b;
    const double r = rates_[k], len = end - x;
    const double w = std::exp(lref - log_accumulation(x));
    total += w * (std::abs(r * len) < 1e-300 ? len : -std::expm1(-r * len) / r);
    x = end;
    ++k;
  }
  return total;
}

double accumulation(const InterestCurve& c, double t) { return c.accumulation(t); }

json interest_to_json(const InterestCurve& c) {
  if (c.is_constant()) return json{{"kind", "constant"}, {"rate", c.rates()[0]}};
  return json{{"kind", "piecewise"}, {"knots", c.knots()}, {"rates", c.rates()}};
}

InterestCurve interest_from_json(const json& j) {
  const auto kind = get_req<std::string>(j, "kind", "interest");
  if (kind == "constant") {
    check_keys(j, {"kind", "rate"}, "interest");
    return InterestCurve(get_req<double>(j, "rate", "interest"));
  }
  if (kind == "piecewise") {
    check_keys(j, {"kind", "knots", "rates"}, "interest");
    return InterestCurve(get_req<std::vector<double>>(j, "knots", "interest"),
                         get_req<std::vector<double>>(j, "rates", "interest"));
  }
  if (kind == "forward") {
    check_keys(j, {"kind", "as_of", "realized", "forward"}, "interest");
    return InterestCurve::forward_curve_at(interest_from_json(j.at("realized")),
                                           interest_from_json(j.at("forward")),
                                           get_req<double>(j, "as_of", "interest"));
  }
  throw ConfigError("interest.kind must be constant, piecewise or forward");
}

}  // namespace reng

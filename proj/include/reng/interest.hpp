#pragma once
#include <vector>

#include "json.hpp"

namespace reng {

using json = nlohmann::json;

// Piecewise-constant force of interest; rate k applies on [knot_k, knot_{k+1}),
// the last rate extends to infinity.
class InterestCurve {
 public:
  InterestCurve() : InterestCurve(0.0) {}
  explicit InterestCurve(double constant_force);
  InterestCurve(std::vector<double> knots, std::vector<double> rates);

  static InterestCurve constant(double r) { return InterestCurve(r); }
  static InterestCurve piecewise(std::vector<double> knots, std::vector<double> rates) {
    return InterestCurve(std::move(knots), std::move(rates));
  }
  // Realized force before u, forward force from u on.
  static InterestCurve forward_curve_at(const InterestCurve& realized, const InterestCurve& forward,
                                        double u);

  double force(double t) const;
  double log_accumulation(double t) const;
  double accumulation(double t) const;
  // kappa(t) / kappa(s)
  double value_factor(double t, double s) const;
  // int_a^b kappa(ref)/kappa(v) dv
  double annuity(double a, double b, double ref) const;

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& rates() const { return rates_; }
  bool is_constant() const { return rates_.size() == 1; }

 private:
  std::vector<double> knots_, rates_, cum_;
};

double accumulation(const InterestCurve& c, double t);

json interest_to_json(const InterestCurve& c);
InterestCurve interest_from_json(const json& j);

}  // namespace reng

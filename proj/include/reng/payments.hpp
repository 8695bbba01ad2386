#pragma once
#include <limits>
#include <vector>

#include "reng/interest.hpp"
#include "reng/valid_time.hpp"

namespace reng {

struct LumpSum {
  State from = State::a;
  State to = State::i;
  double amount = 0.0;
};

struct PaymentSpec {
  double annuity_rate = 1.0;
  double coverage_period = std::numeric_limits<double>::infinity();
  double qualifying_period = 0.0;
  double retirement_age = 67.0;
  double premium_rate = 0.0;
  double reactivated_rate = 0.0;
  std::vector<LumpSum> lump_sums;

  void validate() const;
  // Contract horizon in policy time: min(retirement age, omega) - age at origin.
  double horizon(const CovariateVector& cov, const Numerics& num = {}) const;
  bool covered_onset(double onset) const { return onset <= coverage_period + 1e-12; }
  // Continuous payment rate in state j at time t with duration u (premiums negative).
  double rate(State j, double t, double u, double horizon) const;
  double disability_rate(double t, double u, bool covered, double horizon) const;
  double lump(State j, State k, double t, double u, double horizon) const;
  bool pays_in(State j) const;
  bool pays_from(State j) const;  // any payment from state j or later states
};

json payment_spec_to_json(const PaymentSpec& p);
PaymentSpec payment_spec_from_json(const json& j);

// int_from^to kappa(ref)/kappa(v) rate_j(v, v - entry) dv, exact for the piecewise-constant rates.
double stream_value(const PaymentSpec& spec, const InterestCurve& curve, State j, double entry,
                    double from, double to, double ref, double horizon);

// Value at t of contractual payments on (t, horizon] along a realized path.
double present_value(const JumpPath& path, double t, const PaymentSpec& spec, const InterestCurve& curve,
                     const Numerics& num = {});

// Value at t of contractual payments on [0, t] accumulated with interest.
double accumulated_value(const JumpPath& path, double t, const PaymentSpec& spec,
                         const InterestCurve& curve, const Numerics& num = {});

}  // namespace reng

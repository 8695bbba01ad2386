#pragma once
#include <functional>
#include <optional>

#include "reng/valid_time.hpp"

namespace reng {

// Weibull proportional reverse time hazard:
// F(u) = (1 - exp(-(lambda u)^k))^exp(beta_age (age at onset - age_ref) + beta_male 1{M}).
struct DelayDistribution {
  double lambda = 1.0;
  double k = 1.0;
  double beta_age = 0.0;
  double beta_male = 0.0;
  double age_ref = 0.0;

  double exponent(const CovariateVector& cov, double onset) const;
  double cdf(double u, const CovariateVector& cov, double onset) const;
  double log_density(double u, const CovariateVector& cov, double onset) const;
  double quantile(double p, const CovariateVector& cov, double onset) const;
  void validate() const;
};

struct ReportingDelay {
  DelayDistribution disability;
  std::optional<DelayDistribution> reactivation;  // used in estimation only
};

json delay_to_json(const DelayDistribution& d);
DelayDistribution delay_from_json(const json& j);
json reporting_delay_to_json(const ReportingDelay& f);
ReportingDelay reporting_delay_from_json(const json& j);

double delay_cdf(const DelayDistribution& d, double u, const CovariateVector& cov, double onset);
// P(not reported by t | onset s); 1 for s > t.
double ibnr_factor(const DelayDistribution& d, double s, double t, const CovariateVector& cov);

// Probability that a disability at s leaves the insured alive at t (covered claim, duration 0 at s).
using OnsetSurvival = std::function<double(double s)>;
OnsetSurvival disabled_survival(const HazardSet& hz, const CovariateVector& cov, double t, const Numerics& num = {});

// Unnormalized onset density w(s) = I(s,t) S_i(s,t) mu_ai(s,s) p_aa(0,s) on (0,t] with quadrature
// weights q: sum q f(s) approximates the integral of w f. Panels are graded towards s = t,
// where the IBNR factor can drop steeply.
struct OnsetWeights {
  std::vector<double> s, w, q;
  double active_mass = 0.0;  // p_aa(0,t)
  double ibnr_mass = 0.0;    // integral of w
  double total() const { return active_mass + ibnr_mass; }
};
// Simpson nodes and weights on [0, t], geometrically refined near t.
void onset_quadrature(double t, double step, std::vector<double>& nodes, std::vector<double>& weights);

OnsetWeights onset_weights(double t, const DelayDistribution& d, const CovariateVector& cov, const HazardSet& hz,
                           const Numerics& num = {}, const OnsetSurvival& survival = {});

double prob_cbnr(double t, const DelayDistribution& d, const CovariateVector& cov, const HazardSet& hz,
                 const Numerics& num = {}, const OnsetSurvival& survival = {});

}  // namespace reng

#include "reng/delay.hpp"

#include <cmath>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

namespace reng {

double DelayDistribution::exponent(const CovariateVector& cov, double onset) const {
  return beta_age * (cov.age_at_origin + onset - age_ref) + (cov.gender == Gender::M ? beta_male : 0.0);
}

double DelayDistribution::cdf(double u, const CovariateVector& cov, double onset) const {
  if (!(u > 0.0)) return 0.0;
  const double base = -std::expm1(-std::pow(lambda * u, k));
  return std::pow(base, std::exp(exponent(cov, onset)));
}

double DelayDistribution::log_density(double u, const CovariateVector& cov, double onset) const {
  if (!(u > 0.0)) return -INFINITY;
  const double c = std::exp(exponent(cov, onset));
  const double z = std::pow(lambda * u, k);
  const double base = -std::expm1(-z);
  // d/du base = k z / u e^{-z}
  return std::log(c) + (c - 1.0) * std::log(base) + std::log(k) + std::log(z) - std::log(u) - z;
}

double DelayDistribution::quantile(double p, const CovariateVector& cov, double onset) const {
  if (!(p > 0.0)) return 0.0;
  if (!(p < 1.0)) return INFINITY;
  const double c = std::exp(exponent(cov, onset));
  const double base = std::pow(p, 1.0 / c);
  return std::pow(-std::log1p(-base), 1.0 / k) / lambda;
}

void DelayDistribution::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("reporting delay: lambda must be positive");
  if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("reporting delay: k must be positive");
  if (!std::isfinite(beta_age) || !std::isfinite(beta_male) || !std::isfinite(age_ref))
    throw ConfigError("reporting delay: coefficients must be finite");
}

json delay_to_json(const DelayDistribution& d) {
  return {{"lambda", d.lambda},
          {"k", d.k},
          {"beta", {{"age_at_onset", d.beta_age}, {"male", d.beta_male}}},
          {"age_ref", d.age_ref}};
}

DelayDistribution delay_from_json(const json& j) {
  check_keys(j, {"lambda", "k", "beta", "age_ref"}, "reporting delay");
  DelayDistribution d;
  d.lambda = get_req<double>(j, "lambda", "reporting delay");
  d.k = get_req<double>(j, "k", "reporting delay");
  d.age_ref = get_or<double>(j, "age_ref", 0.0);
  if (j.contains("beta")) {
    check_keys(j["beta"], {"age_at_onset", "male"}, "reporting delay beta");
    d.beta_age = get_or<double>(j["beta"], "age_at_onset", 0.0);
    d.beta_male = get_or<double>(j["beta"], "male", 0.0);
  }
  d.validate();
  return d;
}

json reporting_delay_to_json(const ReportingDelay& f) {
  json out{{"disability", delay_to_json(f.disability)}};
  if (f.reactivation) out["reactivation"] = delay_to_json(*f.reactivation);
  return out;
}

ReportingDelay reporting_delay_from_json(const json& j) {
  check_keys(j, {"disability", "reactivation"}, "reporting_delay");
  ReportingDelay f;
  if (!j.contains("disability")) throw ConfigError("reporting_delay: disability block missing");
  f.disability = delay_from_json(j["disability"]);
  if (j.contains("reactivation")) f.reactivation = delay_from_json(j["reactivation"]);
  return f;
}

double delay_cdf(const DelayDistribution& d, double u, const CovariateVector& cov, double onset) {
  return d.cdf(u, cov, onset);
}

double ibnr_factor(const DelayDistribution& d, double s, double t, const CovariateVector& cov) {
  if (s > t) return 1.0;
  return 1.0 - d.cdf(t - s, cov, s);
}

OnsetSurvival disabled_survival(const HazardSet& hz, const CovariateVector& cov, double t, const Numerics& num) {
  return [&hz, cov, t, num](double s) {
    return transition_row({s, State::i, 0.0}, t, hz, cov, num).alive();
  };
}

void onset_quadrature(double t, double step, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.clear();
  weights.clear();
  if (!(t > 0.0)) return;
  auto panel = [&](double a, double b) {
    if (!(b > a)) return;
    const double h = (b - a) / 6.0;
    if (!nodes.empty() && nodes.back() == a) {
      weights.back() += h;
    } else {
      nodes.push_back(a);
      weights.push_back(h);
    }
    nodes.push_back(0.5 * (a + b));
    weights.push_back(4.0 * h);
    nodes.push_back(b);
    weights.push_back(h);
  };
  const double tail = std::min(t, step);
  const long n = std::max<long>(0, static_cast<long>(std::ceil((t - tail) / step - 1e-9)));
  const double dx = n > 0 ? (t - tail) / n : 0.0;
  for (long m = 0; m < n; ++m) panel(m * dx, m + 1 == n ? t - tail : (m + 1) * dx);
  // tail in u = t - s: [tail, tail/2], [tail/2, tail/4], ...
  double u = tail;
  for (int j = 0; j < 40 && u > 1e-12 * std::max(1.0, t); ++j) {
    panel(t - u, t - 0.5 * u);
    u *= 0.5;
  }
  panel(t - u, t);
}

OnsetWeights onset_weights(double t, const DelayDistribution& d, const CovariateVector& cov, const HazardSet& hz,
                           const Numerics& num, const OnsetSurvival& survival) {
  if (t < 0.0) throw InvalidArgument("onset_weights: t must be non-negative");
  OnsetWeights out;
  auto ai = hz.ai ? std::optional(hz.ai->decompose(cov)) : std::nullopt;
  auto ad = hz.ad ? std::optional(hz.ad->decompose(cov)) : std::nullopt;
  auto log_paa = [&](double s) {
    return -(ai ? cumulative_hazard_exact(*ai, 0.0, s, 0.0) : 0.0) -
           (ad ? cumulative_hazard_exact(*ad, 0.0, s, 0.0) : 0.0);
  };
  out.active_mass = std::exp(log_paa(t));
  if (!ai || t == 0.0) return out;
  const OnsetSurvival S = survival ? survival : disabled_survival(hz, cov, t, num);
  onset_quadrature(t, num.onset_step, out.s, out.q);
  out.w.resize(out.s.size());
  for (size_t m = 0; m < out.s.size(); ++m) {
    const double s = out.s[m];
    const double I = ibnr_factor(d, s, t, cov);
    out.w[m] = I > 0.0 ? I * S(s) * hazard_value(*ai, s, s) * std::exp(log_paa(s)) : 0.0;
    out.ibnr_mass += out.q[m] * out.w[m];
  }
  return out;
}

double prob_cbnr(double t, const DelayDistribution& d, const CovariateVector& cov, const HazardSet& hz,
                 const Numerics& num, const OnsetSurvival& survival) {
  const double p = onset_weights(t, d, cov, hz, num, survival).total();
  if (!(p > 0.0))
    throw DegenerateModel("P(CBNR) vanishes: no active survival and no unreported disability mass at t");
  return std::min(p, 1.0);
}

}  // namespace reng

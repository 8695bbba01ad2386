#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "reng/delay.hpp"
#include "reng/errors.hpp"

using namespace reng;

namespace {

CovariateVector person(double age = 40.0, Gender g = Gender::M) {
  CovariateVector c;
  c.age_at_origin = age;
  c.gender = g;
  return c;
}

HazardSet constants(double ai, double ad, double ir, double id, double rd) {
  HazardSet h;
  if (ai > 0) h.ai = constant_hazard("a", "i", ai);
  if (ad > 0) h.ad = constant_hazard("a", "d", ad);
  if (ir > 0) h.ir = constant_hazard("i", "r", ir);
  if (id > 0) h.id = constant_hazard("i", "d", id);
  if (rd > 0) h.rd = constant_hazard("r", "d", rd);
  return h;
}

}  // namespace

TEST(Delay, CdfExamples) {
  DelayDistribution d;
  EXPECT_EQ(delay_cdf(d, 0.0, person(), 0.0), 0.0);
  EXPECT_NEAR(delay_cdf(d, std::log(2.0), person(), 0.0), 0.5, 1e-15);
  d.beta_male = std::log(2.0);
  EXPECT_NEAR(delay_cdf(d, std::log(2.0), person(), 0.0), 0.25, 1e-15);
  EXPECT_NEAR(delay_cdf(d, std::log(2.0), person(40.0, Gender::F), 0.0), 0.5, 1e-15);
}

TEST(Delay, CdfShape) {
  DelayDistribution d{1.7, 0.6, 0.03, -0.4, 45.0};
  double prev = 0.0;
  for (double u = 0.0; u < 20.0; u += 0.05) {
    const double F = d.cdf(u, person(38.0), 2.0);
    EXPECT_GE(F, prev);
    prev = F;
  }
  EXPECT_NEAR(d.cdf(1e4, person(38.0), 2.0), 1.0, 1e-12);
  for (double p : {0.1, 0.5, 0.93}) EXPECT_NEAR(d.cdf(d.quantile(p, person(38.0), 2.0), person(38.0), 2.0), p, 1e-12);
  // density integrates the cdf
  const double a = 0.3, b = 1.1;
  const double num = simpson([&](double u) { return std::exp(d.log_density(u, person(38.0), 2.0)); }, a, b, 1e-3);
  EXPECT_NEAR(num, d.cdf(b, person(38.0), 2.0) - d.cdf(a, person(38.0), 2.0), 1e-10);
}

TEST(Delay, IbnrFactor) {
  DelayDistribution d{2.0, 1.0};
  EXPECT_EQ(ibnr_factor(d, 3.0, 2.0, person()), 1.0);
  EXPECT_EQ(ibnr_factor(d, 2.0, 2.0, person()), 1.0);
  EXPECT_NEAR(ibnr_factor(d, 1.5, 2.0, person()), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(ibnr_factor(d, 1.5, 2.0, person()), 0.36788, 5e-6);
  double prev = 1.0;
  for (double t = 1.0; t < 5.0; t += 0.1) {
    const double I = ibnr_factor(d, 1.0, t, person());
    EXPECT_LE(I, prev);
    prev = I;
  }
}

TEST(Delay, ProbCbnrAtZero) {
  EXPECT_EQ(prob_cbnr(0.0, DelayDistribution{}, person(), constants(0.1, 0.02, 0, 0, 0)), 1.0);
}

TEST(Delay, InstantReporting) {
  DelayDistribution instant{1e9, 1.0};
  const double p = prob_cbnr(1.0, instant, person(), constants(0.1, 0.02, 0.5, 0.03, 0.01));
  EXPECT_NEAR(p, std::exp(-0.12), 1e-8);
  EXPECT_NEAR(p, 0.88692, 5e-6);
}

TEST(Delay, ConditionalOnsetMassConsistent) {
  DelayDistribution d{1.5, 0.8, 0.02, 0.3, 40.0};
  const auto hz = constants(0.1, 0.02, 0.5, 0.05, 0.02);
  const double t = 2.0;
  auto w = onset_weights(t, d, person(), hz);
  const double P = w.total();
  // P(tau_i > t | CBNR) + integral of the conditional onset density = 1
  const double cbni = w.active_mass / P;
  double dens = 0.0;
  for (size_t m = 0; m < w.s.size(); ++m) dens += w.q[m] * w.w[m] / P;
  EXPECT_NEAR(cbni + dens, 1.0, 1e-12);
  // quadrature weights integrate smooth functions on [0, t]
  double len = 0.0, sq = 0.0;
  for (size_t m = 0; m < w.s.size(); ++m) {
    len += w.q[m];
    sq += w.q[m] * w.s[m] * w.s[m];
  }
  EXPECT_NEAR(len, t, 1e-12);
  EXPECT_NEAR(sq, t * t * t / 3, 1e-12);
}

TEST(Delay, ProbCbnrDecreasing) {
  DelayDistribution d{1.5, 0.8};
  const auto hz = constants(0.1, 0.02, 0.5, 0.05, 0.02);
  double prev = 1.0;
  for (double t : {0.25, 0.75, 1.5, 2.5}) {
    const double p = prob_cbnr(t, d, person(), hz);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Delay, ProbCbnrAgainstSimulation) {
  const double ai = 0.15, ad = 0.02, ir = 0.6, id = 0.06, rd = 0.02, t = 1.5;
  DelayDistribution d{1.2, 0.7, 0.02, 0.3, 40.0};
  const auto cov = person(43.0);
  const double p = prob_cbnr(t, d, cov, constants(ai, ad, ir, id, rd));

  std::mt19937_64 gen(77);
  std::exponential_distribution<double> E(1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int n = 1000000;
  long hits = 0;
  for (int k = 0; k < n; ++k) {
    const double leave = E(gen) / (ai + ad);
    if (leave > t) {
      ++hits;
      continue;
    }
    if (U(gen) * (ai + ad) >= ai) continue;  // died active
    const double s = leave;
    const double report = s + d.quantile(U(gen), cov, s);
    if (report <= t) continue;
    // alive at t after disability at s
    double now = s;
    bool disabled = true, alive = true;
    while (alive) {
      const double out = disabled ? ir + id : rd;
      const double next = now + E(gen) / out;
      if (next > t) break;
      now = next;
      if (disabled && U(gen) * out < ir) disabled = false;
      else alive = false;
    }
    if (alive) ++hits;
  }
  const double mc = static_cast<double>(hits) / n;
  const double se = std::sqrt(mc * (1 - mc) / n);
  EXPECT_NEAR(p, mc, 3 * se);
}

TEST(Delay, JsonRoundTrip) {
  ReportingDelay f{{1.2, 0.7, 0.02, 0.3, 40.0}, DelayDistribution{3.0, 1.0}};
  auto back = reporting_delay_from_json(reporting_delay_to_json(f));
  EXPECT_DOUBLE_EQ(back.disability.cdf(0.4, person(), 1.0), f.disability.cdf(0.4, person(), 1.0));
  ASSERT_TRUE(back.reactivation);
  EXPECT_THROW(reporting_delay_from_json(json{{"disability", {{"lambda", -1.0}, {"k", 1.0}}}}), ConfigError);
  EXPECT_THROW(reporting_delay_from_json(json{{"disability", {{"lambda", 1.0}, {"k", 1.0}, {"x", 1}}}}),
               ConfigError);
}

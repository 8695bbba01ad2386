#include <gtest/gtest.h>

#include <cmath>

#include "reng/errors.hpp"
#include "reng/thiele.hpp"

using namespace reng;

namespace {

HazardSet constants(double ai, double ad, double ir, double id, double rd) {
  HazardSet h;
  if (ai > 0) h.ai = constant_hazard("a", "i", ai);
  if (ad > 0) h.ad = constant_hazard("a", "d", ad);
  if (ir > 0) h.ir = constant_hazard("i", "r", ir);
  if (id > 0) h.id = constant_hazard("i", "d", id);
  if (rd > 0) h.rd = constant_hazard("r", "d", rd);
  return h;
}

PaymentSpec unit_annuity(double coverage = INFINITY) {
  PaymentSpec p;
  p.annuity_rate = 1.0;
  p.coverage_period = coverage;
  p.retirement_age = 67.0;
  return p;
}

HazardSet shaped() {
  HazardSet h;
  h.ai = LogLinearHazard("a", "i", {{Regressor::CurrentAge, 0.04}, {Regressor::InterceptM, -4.5},
                                    {Regressor::InterceptF, -4.3}});
  h.ad = LogLinearHazard("a", "d", {{Regressor::CurrentAge, 0.09}, {Regressor::InterceptM, -9.50},
                                    {Regressor::InterceptF, -9.80}});
  h.ir = LogLinearHazard("i", "r", {{Regressor::InterceptM, -0.7}, {Regressor::InterceptF, -0.8},
                                    {Regressor::DurationCapped, -0.5, 2.0, ""}});
  h.id = LogLinearHazard("i", "d", {{Regressor::CurrentAge, 0.09}, {Regressor::InterceptM, -6.40},
                                    {Regressor::InterceptF, -6.80},
                                    {Regressor::DurationCapped, -0.25, 5.0, ""}});
  h.rd = h.ad;
  h.rd->origin = "r";
  return h;
}

}  // namespace

TEST(Interest, Accumulation) {
  EXPECT_EQ(accumulation(InterestCurve::constant(0.02), 0.0), 1.0);
  EXPECT_NEAR(accumulation(InterestCurve::constant(0.02), 10.0), 1.22140, 1e-5);
  auto pw = InterestCurve::piecewise({0.0, 1.0}, {0.01, 0.03});
  EXPECT_NEAR(accumulation(pw, 2.0), std::exp(0.04), 1e-15);
  EXPECT_NEAR(accumulation(pw, 2.0), 1.04081, 1e-5);
}

TEST(Interest, ForwardCurveSplicesRealizedAndForward) {
  auto realized = InterestCurve::constant(0.01);
  auto fwd = InterestCurve::piecewise({0.0, 5.0}, {0.03, 0.04});
  auto c = InterestCurve::forward_curve_at(realized, fwd, 2.0);
  EXPECT_NEAR(c.log_accumulation(6.0), 0.01 * 2 + 0.03 * 3 + 0.04 * 1, 1e-15);
  EXPECT_THROW(interest_from_json(json{{"kind", "constant"}, {"rate", 0.02}, {"x", 1}}), ConfigError);
}

TEST(Interest, AnnuityMatchesQuadrature) {
  auto c = InterestCurve::piecewise({0.0, 1.0, 2.5}, {0.01, 0.05, -0.01});
  const double q = simpson([&](double v) { return c.value_factor(0.7, v); }, 0.3, 4.0, 1e-4);
  EXPECT_NEAR(c.annuity(0.3, 4.0, 0.7), q, 1e-12);
}

TEST(Payments, PresentValueDisabilityYear) {
  JumpPath p;
  p.cov = {40, Gender::M, {}};
  p.horizon = 27;
  p.jumps = {{1.0, State::i}, {2.0, State::r}};
  auto spec = unit_annuity(3.0);
  EXPECT_NEAR(present_value(p, 0.0, spec, InterestCurve::constant(0.0)), 1.0, 1e-14);
  EXPECT_NEAR(present_value(p, 0.0, spec, InterestCurve::constant(0.02)),
              (std::exp(-0.02) - std::exp(-0.04)) / 0.02, 1e-14);
  EXPECT_NEAR(present_value(p, 0.0, spec, InterestCurve::constant(0.02)), 0.970462, 1e-6);
  JumpPath never;
  never.cov = p.cov;
  never.horizon = 27;
  EXPECT_EQ(present_value(never, 0.0, spec, InterestCurve::constant(0.02)), 0.0);
}

TEST(Thiele, ZeroPaymentsGiveZero) {
  PaymentSpec p;
  p.annuity_rate = 0.0;
  ReserveGrid g({shaped(), {40, Gender::M, {}}, p, InterestCurve::constant(0.02), {}});
  for (State j : {State::a, State::i, State::r, State::d}) EXPECT_EQ(g.V(j, 1.0, j == State::a ? 1.0 : 0.5), 0.0);
}

TEST(Thiele, ReactivatedAnnuityClosedForm) {
  PaymentSpec p;
  p.annuity_rate = 0.0;
  p.reactivated_rate = 1.0;
  p.retirement_age = 67.0;
  HazardSet h = constants(0, 0, 0, 0, 0.01);
  const double v = statewise_reserve(State::r, 0.0, 0.0, p, InterestCurve::constant(0.02), h, {57, Gender::F, {}});
  EXPECT_NEAR(v, (1 - std::exp(-0.3)) / 0.03, 1e-9);
  EXPECT_NEAR(v, 8.6394, 1e-4);
}

TEST(Thiele, DisabledAnnuityClosedForm) {
  HazardSet h = constants(0.1, 0.02, 0.3, 0.1, 0.05);
  ReserveGrid g({h, {47, Gender::M, {}}, unit_annuity(3.0), InterestCurve::constant(0.02), {}});
  for (double t : {1.0, 2.37, 5.5, 19.9}) {
    for (double u : {0.0, 0.5, 0.99}) {
      const double want = (1 - std::exp(-0.42 * (20.0 - t))) / 0.42;
      const double covered_onset = t - u <= 3.0;
      EXPECT_NEAR(g.V(State::i, t, u), covered_onset ? want : 0.0, 5e-8) << t << " " << u;
    }
  }
}

TEST(Thiele, ActiveReserveMatchesQuadratureOracle) {
  const double ai = 0.1, ad = 0.02, mi = 0.4, r = 0.02, cov_end = 3.0, H = 20.0;
  HazardSet h = constants(ai, ad, 0.3, 0.1, 0.05);
  ReserveGrid g({h, {47, Gender::M, {}}, unit_annuity(cov_end), InterestCurve::constant(r), {}});
  auto vi0 = [&](double s) { return s <= cov_end ? (1 - std::exp(-(mi + r) * (H - s))) / (mi + r) : 0.0; };
  for (double t : {0.0, 1.3, 2.9}) {
    const double want = simpson([&](double s) { return std::exp(-(ai + ad + r) * (s - t)) * ai * vi0(s); },
                                t, cov_end, 1e-4);
    EXPECT_NEAR(g.V(State::a, t, t), want, 1e-8) << t;
  }
  EXPECT_EQ(g.V(State::a, 3.5, 3.5), 0.0);
}

TEST(Thiele, StepHalvingChangesLittle) {
  PaymentSpec p = unit_annuity(3.0);
  p.premium_rate = 0.05;
  p.reactivated_rate = 0.2;
  p.qualifying_period = 0.25;
  Numerics coarse, fine;
  fine.rk4_step = coarse.rk4_step / 2;
  const CovariateVector c{40, Gender::F, {}};
  ReserveGrid g1({shaped(), c, p, InterestCurve::constant(0.02), coarse});
  ReserveGrid g2({shaped(), c, p, InterestCurve::constant(0.02), fine});
  for (auto [j, t, u] : {std::tuple{State::a, 1.0, 1.0}, {State::i, 2.0, 1.5}, {State::r, 4.0, 2.0},
                         {State::i, 10.0, 8.0}}) {
    const double a = g1.V(j, t, u), b = g2.V(j, t, u);
    EXPECT_LT(std::abs(a - b) / std::abs(b), 1e-7) << state_name(j);
  }
}

TEST(Thiele, RK4FourthOrder) {
  PaymentSpec p = unit_annuity();
  const CovariateVector c{40, Gender::F, {}};
  auto value = [&](double h) {
    Numerics n;
    n.rk4_step = h;
    n.onset_step = 1.0;
    ReserveGrid g({shaped(), c, p, InterestCurve::constant(0.02), n});
    return g.V(State::a, 0.0, 0.0);
  };
  const double v1 = value(0.25), v2 = value(0.125), v3 = value(0.0625);
  const double order = std::log2(std::abs(v1 - v2) / std::abs(v2 - v3));
  EXPECT_NEAR(order, 4.0, 0.3);
}

TEST(Thiele, MonotoneInAnnuityRate) {
  const CovariateVector c{40, Gender::M, {}};
  PaymentSpec p1 = unit_annuity(3.0), p2 = p1;
  p2.annuity_rate = 1.2;
  ReserveGrid g1({shaped(), c, p1, InterestCurve::constant(0.02), {}});
  ReserveGrid g2({shaped(), c, p2, InterestCurve::constant(0.02), {}});
  for (double t : {0.0, 1.0, 2.5}) {
    EXPECT_GT(g2.V(State::a, t, t), g1.V(State::a, t, t));
    EXPECT_GT(g2.V(State::i, t + 1, 1.0), g1.V(State::i, t + 1, 1.0));
  }
}

TEST(Thiele, DisabledReserveMatchesSimulation) {
  const CovariateVector c{50, Gender::M, {}};
  PaymentSpec p = unit_annuity(3.0);
  p.reactivated_rate = 0.3;
  const auto curve = InterestCurve::constant(0.02);
  const double t = 2.0, u = 0.5;
  ReserveGrid g({shaped(), c, p, curve, {}});
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int k = 0; k < n; ++k) {
    CounterRng rng(21, k);
    auto path = simulate_from({t, State::i, u}, c, shaped(), 17.0, rng);
    const double pv = present_value(path, t, p, curve);
    s += pv;
    s2 += pv * pv;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - g.V(State::i, t, u)), 3 * se);
}

TEST(Thiele, ActiveReserveMatchesSimulation) {
  const CovariateVector c{50, Gender::F, {}};
  PaymentSpec p = unit_annuity(3.0);
  p.premium_rate = 0.1;
  const auto curve = InterestCurve::constant(0.02);
  ReserveGrid g({shaped(), c, p, curve, {}});
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int k = 0; k < n; ++k) {
    CounterRng rng(22, k);
    auto path = simulate_from({0.5, State::a, 0.5}, c, shaped(), 17.0, rng);
    const double pv = present_value(path, 0.5, p, curve);
    s += pv;
    s2 += pv * pv;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - g.V(State::a, 0.5, 0.5)), 3 * se);
}

TEST(Conditional, VoidConditioningEqualsStatewise) {
  const CovariateVector c{45, Gender::M, {}};
  const auto spec = unit_annuity(3.0);
  const auto curve = InterestCurve::constant(0.02);
  const auto h = shaped();
  EXPECT_NEAR(conditional_reserve(State::i, 3.0, 1.0, 2.0, spec, curve, h, c),
              statewise_reserve(State::i, 3.0, 1.0, spec, curve, h, c), 1e-14);
  HazardSet nodeath = h;
  nodeath.ad.reset();
  nodeath.id.reset();
  nodeath.rd.reset();
  EXPECT_NEAR(conditional_reserve(State::i, 1.0, 0.0, 2.5, spec, curve, nodeath, c),
              statewise_reserve(State::i, 1.0, 0.0, spec, curve, nodeath, c), 1e-9);
  EXPECT_NEAR(conditional_reserve(State::a, 1.0, 1.0, 2.5, spec, curve, nodeath, c),
              statewise_reserve(State::a, 1.0, 1.0, spec, curve, nodeath, c), 1e-7);
}

TEST(Conditional, SurvivalMatchesTransitionRows) {
  const CovariateVector c{45, Gender::M, {}};
  const auto h = constants(0.3, 0.05, 0.3, 0.1, 0.05);
  ReserveGrid g({h, c, unit_annuity(3.0), InterestCurve::constant(0.02), {}});
  const auto cv = conditional_i(g, 1.0, 0.0, 2.0);
  EXPECT_NEAR(cv.survival, transition_row({1.0, State::i, 0.0}, 2.0, h, c).alive(), 1e-9);
  ConditionalCache cache(g, 2.0, 0.5);
  const auto ca = conditional_a(g, cache, 0.5);
  EXPECT_NEAR(ca.survival, transition_row({0.5, State::a, 0.5}, 2.0, h, c).alive(), 1e-8);
}

TEST(Conditional, DisabledReserveMatchesRejectionSampling) {
  const CovariateVector c{45, Gender::M, {}};
  const auto h = constants(0.3, 0.05, 0.3, 0.4, 0.05);
  const auto spec = unit_annuity(3.0);
  const auto curve = InterestCurve::constant(0.02);
  const double s = 1.0, t = 2.5;
  ReserveGrid g({h, c, spec, curve, {}});
  const double want = conditional_i(g, s, 0.0, t).value;
  double sum = 0, sum2 = 0;
  int kept = 0;
  for (int k = 0; kept < 100000; ++k) {
    CounterRng rng(31, k);
    auto path = simulate_from({s, State::i, 0.0}, c, h, 22.0, rng);
    if (path.death_time() <= t) continue;
    const double pv = present_value(path, s, spec, curve);
    sum += pv;
    sum2 += pv * pv;
    ++kept;
  }
  const double mean = sum / kept, se = std::sqrt((sum2 / kept - mean * mean) / kept);
  EXPECT_LT(std::abs(mean - want), 3 * se);
}

TEST(Conditional, DegenerateSurvivalThrows) {
  HazardSet h;
  h.id = LogLinearHazard("i", "d", {{Regressor::InterceptM, 9.0}, {Regressor::InterceptF, 9.0}});
  EXPECT_THROW(conditional_reserve(State::i, 1.0, 0.0, 3.0, unit_annuity(), InterestCurve::constant(0.0), h,
                                   {45, Gender::M, {}}),
               DegenerateConditioning);
}

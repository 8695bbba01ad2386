#include <gtest/gtest.h>

#include <cmath>

#include "reng/errors.hpp"
#include "reng/reserving.hpp"

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

AdjudicationHazards adjudication(double w12, double w21, double w13, double w14, double w24) {
  AdjudicationHazards g;
  g.shared = true;
  if (w12 > 0) g.rbnsi.w12 = constant_hazard("1", "2", w12);
  if (w21 > 0) g.rbnsi.w21 = constant_hazard("2", "1", w21);
  if (w13 > 0) g.rbnsi.w13 = constant_hazard("1", "3", w13);
  if (w14 > 0) g.rbnsi.w14 = constant_hazard("1", "4", w14);
  if (w24 > 0) g.rbnsi.w24 = constant_hazard("2", "4", w24);
  return g;
}

ModelParameters params(AdjudicationHazards g = adjudication(0.5, 1.0, 2.0, 0.3, 0.4),
                       DelayDistribution d = {2.0, 1.0}) {
  return {constants(0.08, 0.01, 0.4, 0.05, 0.01), g, {d, std::nullopt}};
}

PaymentSpec product(double premium = 0.0) {
  PaymentSpec p;
  p.annuity_rate = 1.0;
  p.coverage_period = 3.0;
  p.retirement_age = 67.0;
  p.premium_rate = premium;
  return p;
}

TransactionRecord rec(std::vector<Event> ev, double as_of, double age = 45.0) {
  TransactionRecord r;
  r.policy.id = "p";
  r.policy.cov.age_at_origin = age;
  r.policy.cov.gender = Gender::F;
  r.events = std::move(ev);
  r.as_of = as_of;
  return r;
}

}  // namespace

TEST(Reserving, InstantReportingIsActiveReserve) {
  ReserveEngine eng(params(adjudication(0.5, 1.0, 2.0, 0.3, 0.4), {1e9, 1.0}), product(0.1),
                    InterestCurve::constant(0.02));
  const double t = 2.0;
  auto b = eng.cbnr_reserve(rec({}, t), t);
  EXPECT_EQ(b.category, Category::CBNR);
  EXPECT_NEAR(*b.components.ibnr_term, 0.0, 1e-9);
  EXPECT_NEAR(b.total, eng.grid(rec({}, t).policy.cov).V(State::a, t, t), 1e-9);
}

TEST(Reserving, ZeroPaymentsZeroReserve) {
  PaymentSpec none = product();
  none.annuity_rate = 0.0;
  ReserveEngine eng(params(), none, InterestCurve::constant(0.02));
  EXPECT_NEAR(eng.reserve(rec({}, 2.0), 2.0).total, 0.0, 1e-14);
  EXPECT_NEAR(eng.reserve(rec({Event::report(1.5, 1.0)}, 2.0), 2.0).total, 0.0, 1e-14);
}

TEST(Reserving, RbnsiCertainAward) {
  const auto P = params(adjudication(0, 0, 1.5, 0, 0));
  ReserveEngine eng(P, product(), InterestCurve::constant(0.0));
  const double t = 2.0, G = 1.2;
  auto r = rec({Event::report(1.6, G)}, t);
  auto b = eng.rbnsi_reserve(r, t);
  const double want = conditional_reserve(State::i, G, 0.0, t, product(), InterestCurve::constant(0.0),
                                          P.hazards, r.policy.cov);
  EXPECT_NEAR(b.total, want, 1e-8);
  EXPECT_NEAR(*b.components.reject_term, 0.0, 1e-12);
}

TEST(Reserving, RbnsiCertainRejection) {
  const auto P = params(adjudication(0.5, 0.5, 0, 0.4, 0.2));
  const auto curve = InterestCurve::constant(0.03);
  ReserveEngine eng(P, product(), curve);
  const double t = 2.0, G = 1.2;
  auto r = rec({Event::report(1.6, G)}, t);
  auto b = eng.rbnsi_reserve(r, t);
  const double want = curve.value_factor(t, G) *
                      conditional_reserve(State::a, G, G, t, product(), curve, P.hazards, r.policy.cov);
  EXPECT_NEAR(b.total, want, 1e-7 * std::abs(want));
  EXPECT_NEAR(*b.components.award_term, 0.0, 1e-14);
}

TEST(Reserving, PremiumAdjustmentRefundsPaidPremiums) {
  const auto curve = InterestCurve::constant(0.03);
  ReserveEngine eng(params(), product(0.2), curve);
  auto b = eng.rbnsi_reserve(rec({Event::report(1.6, 1.2)}, 2.0), 2.0);
  EXPECT_NEAR(*b.components.premium_adjustment, 0.2 * curve.annuity(1.2, 2.0, 2.0), 1e-14);
}

TEST(Reserving, PayoutCollapses) {
  const auto P = params();
  ReserveEngine eng(P, product(), InterestCurve::constant(0.02));
  const double t = 3.0;
  auto r = rec({Event::report(1.2, 0.8), Event::start(1.6)}, t);
  auto b = eng.rbnsr_reserve(r, t);
  const double want = statewise_reserve(State::i, t, t - 0.8, product(), InterestCurve::constant(0.02),
                                        P.hazards, r.policy.cov);
  EXPECT_NEAR(b.total, want, 1e-8);
  EXPECT_NEAR(eng.naive_reserve(r, t), b.total, 1e-14);
}

TEST(Reserving, RbnsrCertainReactivation) {
  const auto P = params(adjudication(0.5, 0.5, 0, 0.4, 0.2));
  ReserveEngine eng(P, product(), InterestCurve::constant(0.02));
  const double t = 3.0;
  auto r = rec({Event::report(1.2, 0.8), Event::start(1.6), Event::stop(2.2, 3)}, t);
  auto b = eng.rbnsr_reserve(r, t);
  EXPECT_NEAR(b.total, eng.grid(r.policy.cov).V(State::r, t, t - 2.2), 1e-14);
}

TEST(Reserving, RbnsrContinuousAtCollapse) {
  const auto P = params(adjudication(0, 1e4, 1e4, 0, 0));
  const auto curve = InterestCurve::constant(0.02);
  ReserveEngine eng(P, product(), curve);
  const double t = 2.2;
  auto stopped = rec({Event::report(1.2, 0.8), Event::start(1.6), Event::stop(2.2, 3)}, t);
  auto paying = rec({Event::report(1.2, 0.8), Event::start(1.6)}, t);
  EXPECT_NEAR(eng.rbnsr_reserve(stopped, t).total, eng.rbnsr_reserve(paying, t).total, 1e-3);
}

TEST(Reserving, WrongCategoryThrows) {
  ReserveEngine eng(params(), product(), InterestCurve::constant(0.02));
  EXPECT_THROW(eng.cbnr_reserve(rec({Event::report(1.0, 0.5)}, 2.0), 2.0), InvalidCategory);
  EXPECT_THROW(eng.rbnsi_reserve(rec({}, 2.0), 2.0), InvalidCategory);
  EXPECT_THROW(eng.rbnsr_reserve(rec({Event::report(1.0, 0.5)}, 2.0), 2.0), InvalidCategory);
  auto settled = rec({Event::death(1.0)}, 2.0);
  EXPECT_EQ(eng.reserve(settled, 2.0).total, 0.0);
  EXPECT_EQ(eng.naive_reserve(settled, 2.0), 0.0);
}

TEST(Reserving, NaiveMapping) {
  ReserveEngine eng(params(), product(0.05), InterestCurve::constant(0.02));
  const double t = 2.0;
  const auto& g = eng.grid(rec({}, t).policy.cov);
  EXPECT_DOUBLE_EQ(eng.naive_reserve(rec({}, t), t), g.V(State::a, t, t));
  auto pending = rec({Event::report(1.5, 1.0)}, t);
  EXPECT_DOUBLE_EQ(eng.naive_reserve(pending, t), g.V(State::a, t, t));
  EXPECT_LT(eng.naive_reserve(pending, t), eng.reserve(pending, t).total);
  auto cbnr = rec({}, t);
  EXPECT_LT(eng.naive_reserve(cbnr, t), eng.reserve(cbnr, t).total);
}

TEST(Reserving, ComponentsSumToTotal) {
  ReserveEngine eng(params(), product(0.05), InterestCurve::constant(0.02));
  for (const auto& r : {rec({}, 2.0), rec({Event::report(1.5, 1.0)}, 2.0),
                        rec({Event::report(1.2, 0.8), Event::start(1.6), Event::stop(1.9, 2)}, 2.0)}) {
    auto b = eng.reserve(r, 2.0);
    EXPECT_NEAR(b.total, b.components.sum(), 1e-12);
    EXPECT_EQ(b.inputs_digest, eng.digest());
  }
}

TEST(Reserving, LinearInCurrency) {
  PaymentSpec p = product(0.05), q = p;
  q.annuity_rate *= 3;
  q.premium_rate *= 3;
  ReserveEngine a(params(), p, InterestCurve::constant(0.02)), b(params(), q, InterestCurve::constant(0.02));
  for (const auto& r : {rec({}, 2.0), rec({Event::report(1.5, 1.0)}, 2.0),
                        rec({Event::report(1.2, 0.8), Event::start(1.6), Event::stop(1.9, 3)}, 2.0)})
    EXPECT_NEAR(b.reserve(r, 2.0).total, 3 * a.reserve(r, 2.0).total, 1e-10);
}

TEST(Reserving, Portfolio) {
  ReserveEngine eng(params(), product(0.05), InterestCurve::constant(0.02));
  const double t = 2.0;
  auto empty = eng.portfolio_reserve({}, t);
  EXPECT_EQ(empty.total().count, 0);
  EXPECT_EQ(empty.total().proposed, 0.0);
  EXPECT_EQ(empty.by_category.size(), 4u);

  std::vector<TransactionRecord> same(7, rec({}, t));
  auto rep = eng.portfolio_reserve(same, t);
  EXPECT_NEAR(rep.total().proposed, 7 * eng.reserve(same[0], t).total, 1e-12);

  std::vector<TransactionRecord> mix;
  for (int k = 0; k < 40; ++k) {
    const double age = 30.0 + k % 5;
    switch (k % 4) {
      case 0: mix.push_back(rec({}, t, age)); break;
      case 1: mix.push_back(rec({Event::report(1.5, 0.2 * (k % 7))}, t, age)); break;
      case 2: mix.push_back(rec({Event::report(0.9, 0.5), Event::start(1.1)}, t, age)); break;
      default: mix.push_back(rec({Event::death(1.0)}, t, age));
    }
    mix.back().policy.id = "p" + std::to_string(k);
  }
  auto par = eng.portfolio_reserve(mix, t, 4);
  auto ser = eng.portfolio_reserve_serial(mix, t);
  double sum = 0.0;
  for (const auto& [c, s] : par.by_category) sum += s.proposed;
  EXPECT_NEAR(sum, par.total().proposed, 1e-9);
  ASSERT_EQ(par.policies.size(), ser.policies.size());
  for (size_t k = 0; k < mix.size(); ++k) {
    EXPECT_EQ(par.policies[k].total, ser.policies[k].total);
    EXPECT_EQ(par.naive[k], ser.naive[k]);
  }
  EXPECT_EQ(par.by_category.at(Category::Settled).count, 10);
}

#include <gtest/gtest.h>

#include <cmath>

#include "reng/errors.hpp"
#include "reng/transaction.hpp"

using namespace reng;

namespace {

TransactionRecord record(std::vector<Event> ev, double as_of, double age = 40.0) {
  TransactionRecord r;
  r.policy.id = "p1";
  r.policy.cov.age_at_origin = age;
  r.policy.cov.gender = Gender::M;
  r.events = std::move(ev);
  r.as_of = as_of;
  return r;
}

PaymentSpec unit_annuity() {
  PaymentSpec p;
  p.annuity_rate = 1.0;
  return p;
}

double pv0(const Cashflow& cf, const PaymentSpec& spec, const InterestCurve& c, double H) {
  return cf.value(spec, c, H, 0.0, -1.0, H + 1.0);
}

}  // namespace

TEST(Eligibility, EmptyLog) {
  auto e = derive_eligibility(record({}, 2.0), 2.0);
  EXPECT_EQ(e.G, 0.0);
  EXPECT_EQ(e.W, 0.0);
  EXPECT_EQ(e.z1, 1);
  EXPECT_EQ(categorize(record({}, 2.0), 2.0), Category::CBNR);
}

TEST(Eligibility, PayoutRunning) {
  auto r = record({Event::report(1.0, 0.5), Event::move(1.5, 2, 4)}, 2.0);
  auto e = derive_eligibility(r, 2.0);
  EXPECT_NEAR(e.G, 2.0, 1e-15);
  EXPECT_NEAR(e.W, 1.5, 1e-15);
  EXPECT_EQ(e.z1, 4);
  EXPECT_EQ(categorize(r, 2.0), Category::RBNSr);
  EXPECT_EQ(categorize(r, 1.2), Category::RBNSi);
  EXPECT_NEAR(derive_eligibility(r, 1.2).G, 0.5, 1e-15);
}

TEST(Eligibility, PartialWindow) {
  auto r = record({Event::report(1.0, 0.5), Event::move(1.5, 2, 3), Event::backpay(1.5, 0.5, 0.8)}, 2.0);
  auto e = derive_eligibility(r, 2.0);
  EXPECT_NEAR(e.G, 0.8, 1e-15);
  EXPECT_NEAR(e.W, 0.3, 1e-15);
  EXPECT_EQ(categorize(r, 2.0), Category::RBNSr);
}

TEST(Eligibility, Categories) {
  auto pending = record({Event::report(1.0, 0.5)}, 2.0);
  EXPECT_EQ(categorize(pending, 2.0), Category::RBNSi);
  auto rejected = record({Event::report(1.0, 0.5), Event::move(1.4, 2, 3)}, 2.0);
  EXPECT_EQ(categorize(rejected, 2.0), Category::RBNSi);
  EXPECT_TRUE(derive_eligibility(rejected, 2.0).prior_rejection);
  auto dead = record({Event::report(1.0, 0.5), Event::death(1.6)}, 2.0);
  EXPECT_EQ(categorize(dead, 2.0), Category::Settled);
}

TEST(Eligibility, MalformedNamesEvent) {
  auto bad_edge = record({Event::move(1.0, 1, 3)}, 2.0);
  EXPECT_THROW(validate_record(bad_edge), MalformedRecord);
  try {
    validate_record(record({Event::report(1.0, 0.5), Event::stop(1.2, 3)}, 2.0));
    FAIL();
  } catch (const MalformedRecord& e) {
    EXPECT_NE(std::string(e.what()).find("StopPayout"), std::string::npos);
  }
  EXPECT_THROW(validate_record(record({Event::report(1.0, 1.5)}, 2.0)), MalformedRecord);
  EXPECT_THROW(validate_record(record({Event::report(1.0, 0.5), Event::report(1.2, 0.6)}, 2.0)),
               MalformedRecord);
  // window must start at G and stop short of the move
  EXPECT_THROW(validate_record(record({Event::report(1.0, 0.5), Event::move(1.5, 2, 3),
                                       Event::backpay(1.5, 0.6, 0.8)}, 2.0)),
               MalformedRecord);
  EXPECT_THROW(validate_record(record({Event::report(1.0, 0.5), Event::move(1.5, 2, 3),
                                       Event::backpay(1.5, 0.5, 1.5)}, 2.0)),
               MalformedRecord);
  EXPECT_THROW(validate_record(record({Event::report(1.0, 0.5), Event::death(0.9)}, 2.0)), MalformedRecord);
  EXPECT_THROW(validate_record(record({Event::death(1.0), Event::death(1.5)}, 2.0)), MalformedRecord);
  EXPECT_THROW(validate_record(record({Event::death(3.0)}, 2.0)), MalformedRecord);
}

TEST(Eligibility, MonotoneAlongPrefixes) {
  auto r = record({Event::report(1.0, 0.5), Event::move(1.5, 2, 3), Event::move(2.0, 3, 2),
                   Event::start(2.5), Event::backpay(2.5, 0.5, 2.5), Event::stop(4.0, 3), Event::move(4.5, 3, 2),
                   Event::move(5.0, 2, 3), Event::backpay(5.0, 4.0, 4.6), Event::death(7.0)},
                  8.0);
  double G = 0.0, W = 0.0;
  for (double t = 0.0; t <= 8.0; t += 1.0 / 64) {
    auto e = derive_eligibility(r, t);
    EXPECT_GE(e.G, G - 1e-12);
    EXPECT_GE(e.W, W - 1e-12);
    EXPECT_LE(e.W, e.G + 1e-12);
    EXPECT_LE(e.G, t + 1e-12);
    G = e.G;
    W = e.W;
  }
  EXPECT_NEAR(G, 4.6, 1e-12);
  EXPECT_NEAR(W, 4.1, 1e-12);
}

TEST(Eligibility, TruncateKeepsPrefix) {
  auto r = record({Event::report(1.0, 0.5), Event::move(1.5, 2, 4), Event::death(3.0)}, 4.0);
  auto t = truncate(r, 2.0);
  EXPECT_EQ(t.events.size(), 2u);
  EXPECT_EQ(t.as_of, 2.0);
  EXPECT_EQ(categorize(t, 2.0), categorize(r, 2.0));
}

TEST(Cashflow, EmptyLog) {
  auto cf = observed_cashflow(record({}, 2.0), unit_annuity(), InterestCurve::constant(0.02));
  EXPECT_TRUE(cf.lumps.empty());
  EXPECT_TRUE(cf.running.empty());
}

TEST(Cashflow, BackpayNominal) {
  auto r = record({Event::report(1.0, 0.5), Event::start(1.5), Event::backpay(1.5, 0.5, 1.5)}, 1.5);
  auto cf = observed_cashflow(r, unit_annuity(), InterestCurve::constant(0.0));
  ASSERT_EQ(cf.lumps.size(), 1u);
  EXPECT_DOUBLE_EQ(cf.lumps[0].first, 1.5);
  EXPECT_NEAR(cf.lumps[0].second, 1.0, 1e-14);
}

TEST(Cashflow, BackpayWithInterest) {
  auto r = record({Event::report(1.0, 0.5), Event::start(1.5)}, 1.5);
  auto cf = observed_cashflow(r, unit_annuity(), InterestCurve::constant(0.02));
  ASSERT_EQ(cf.lumps.size(), 1u);
  EXPECT_NEAR(cf.lumps[0].second, (std::exp(0.02) - 1) / 0.02, 1e-13);
  EXPECT_NEAR(cf.lumps[0].second, 1.01007, 5e-6);
}

TEST(Cashflow, RunningAnnuityInPayout) {
  auto r = record({Event::report(1.0, 0.5), Event::start(1.5)}, 3.0);
  auto cf = observed_cashflow(r, unit_annuity(), InterestCurve::constant(0.0));
  ASSERT_EQ(cf.running.size(), 1u);
  EXPECT_EQ(cf.running[0].state, State::i);
  EXPECT_DOUBLE_EQ(cf.running[0].from, 1.5);
  EXPECT_DOUBLE_EQ(cf.running[0].to, 3.0);
  EXPECT_NEAR(cf.value(unit_annuity(), InterestCurve::constant(0.0), 27.0, 3.0, 0.0, 3.0), 2.5, 1e-13);
}

TEST(Cashflow, NoClawbackAfterStop) {
  auto spec = unit_annuity();
  auto r = record({Event::report(1.0, 0.5), Event::start(1.5), Event::stop(2.0, 3)}, 3.0);
  auto cf = observed_cashflow(r, spec, InterestCurve::constant(0.03));
  for (auto& [t, a] : cf.lumps) EXPECT_GE(a, -1e-14);
}

TEST(Cashflow, AnnuityEndsAtStop) {
  const auto spec = unit_annuity();
  for (int k = 1; k <= 400; ++k) {
    const double start = 0.5 + 0.00731 * k, stop = 3.0 + 0.01193 * k;
    auto r = record({Event::report(start, 0.1), Event::start(start), Event::stop(stop, 3)}, stop + 2.0);
    EXPECT_EQ(derive_eligibility(r, stop).G, stop);
    auto cf = observed_cashflow(r, spec, InterestCurve::constant(0.0));
    EXPECT_NEAR(cf.value(spec, InterestCurve::constant(0.0), 27.0, stop, stop, 27.0), 0.0, 1e-14) << k;
  }
}

// Settled records: discounted observed payments equal the valid-time payments along the true path.
TEST(Cashflow, SettledIdentity) {
  PaymentSpec spec;
  spec.annuity_rate = 1.2;
  spec.premium_rate = 0.15;
  spec.reactivated_rate = 0.05;
  spec.qualifying_period = 0.25;
  spec.coverage_period = 20.0;
  spec.lump_sums = {{State::i, State::r, 0.4}, {State::a, State::d, 2.0}, {State::r, State::d, 1.5}};
  const auto curve = InterestCurve::piecewise({0.0, 2.0, 5.0}, {0.01, 0.03, 0.02});
  struct Case {
    std::vector<Event> ev;
    std::vector<Jump> truth;
  };
  std::vector<Case> cases = {
      {{Event::report(1.2, 0.5), Event::move(1.5, 2, 3), Event::move(2.0, 3, 2), Event::start(2.5),
        Event::backpay(2.5, 0.5, 2.5), Event::stop(4.0, 3), Event::death(7.0)},
       {{0.5, State::i}, {4.0, State::r}, {7.0, State::d}}},
      {{Event::report(1.0, 0.5), Event::move(1.5, 2, 3), Event::backpay(1.5, 0.5, 0.8), Event::death(3.0)},
       {{0.5, State::i}, {0.8, State::r}, {3.0, State::d}}},
      {{Event::report(1.0, 0.5), Event::death(2.0), Event::backpay(2.0, 0.5, 1.7)},
       {{0.5, State::i}, {1.7, State::r}, {2.0, State::d}}},
      {{Event::report(1.0, 0.5), Event::death(2.0)}, {{2.0, State::d}}},
      {{Event::death(4.0)}, {{4.0, State::d}}},
      {{Event::report(3.0, 1.0), Event::start(3.5), Event::death(6.25)}, {{1.0, State::i}, {6.25, State::d}}},
  };
  for (const auto& c : cases) {
    auto r = record(c.ev, 10.0);
    validate_record(r);
    const double H = spec.horizon(r.policy.cov);
    JumpPath truth{r.policy.cov, c.truth, H};
    const double valid = present_value(truth, 0.0, spec, curve);
    const double observed = pv0(observed_cashflow(r, spec, curve), spec, curve, H);
    EXPECT_NEAR(observed, valid, 1e-10 * std::abs(valid));
  }
}

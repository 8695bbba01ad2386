#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "reng/adjudication.hpp"
#include "reng/errors.hpp"

using namespace reng;

namespace {

struct Rates {
  double w12 = 0, w21 = 0, w13 = 0, w14 = 0, w24 = 0, w15 = 0;
};

AdjudicationHazards constants(const Rates& r) {
  AdjudicationHazards g;
  g.shared = true;
  auto set = [&](std::optional<LogLinearHazard>& slot, int f, int t, double v) {
    if (v > 0) slot = constant_hazard(std::to_string(f), std::to_string(t), v);
  };
  set(g.rbnsi.w12, 1, 2, r.w12);
  set(g.rbnsi.w21, 2, 1, r.w21);
  set(g.rbnsi.w13, 1, 3, r.w13);
  set(g.rbnsi.w14, 1, 4, r.w14);
  set(g.rbnsi.w24, 2, 4, r.w24);
  set(g.rbnsi.w15, 1, 5, r.w15);
  return g;
}

TransactionRecord pending(std::vector<Event> extra = {}) {
  TransactionRecord r;
  r.policy.id = "x";
  r.policy.cov.age_at_origin = 40.0;
  r.events = {Event::report(1.0, 0.5)};
  for (auto& e : extra) r.events.push_back(e);
  r.as_of = 3.0;
  return r;
}

// Exact chain simulation for constant rates; returns the award frequency and its standard error.
std::pair<double, double> chain_mc(const Rates& r, int start, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double out1 = r.w12 + r.w13 + r.w14 + r.w15, out2 = r.w21 + r.w24;
  long award = 0;
  for (int k = 0; k < n; ++k) {
    int s = start;
    for (;;) {
      if (s == 1) {
        if (out1 == 0) break;
        const double v = U(gen) * out1;
        if (v < r.w12) s = 2;
        else if (v < r.w12 + r.w13) { ++award; break; }
        else if (v < r.w12 + r.w13 + r.w14) break;
        else { ++award; break; }
      } else {
        if (out2 == 0) break;
        if (U(gen) * out2 < r.w21) s = 1;
        else break;
      }
    }
  }
  const double p = static_cast<double>(award) / n;
  return {p, std::sqrt(p * (1 - p) / n)};
}

}  // namespace

TEST(Adjudication, NoAwardEdges) {
  auto g = constants({.w12 = 1.0, .w21 = 1.0, .w14 = 0.3});
  auto p = adjudication_probabilities(pending(), 2.0, g);
  EXPECT_EQ(p.award, 0.0);
  EXPECT_EQ(p.reject, 1.0);
}

TEST(Adjudication, CompetingRisksClosedForm) {
  auto g = constants({.w13 = 0.5, .w14 = 0.1});
  auto p = adjudication_probabilities(pending(), 2.0, g);
  EXPECT_NEAR(p.award, 0.5 / 0.6, 1e-9);
  EXPECT_NEAR(p.award, 0.83333, 5e-6);
  EXPECT_NEAR(p.reject, 0.16667, 5e-6);
  EXPECT_NEAR(p.award + p.reject, 1.0, 1e-15);
}

TEST(Adjudication, PayoutCollapses) {
  auto g = constants({.w13 = 0.5, .w14 = 0.1});
  auto p = adjudication_probabilities(pending({Event::start(1.5)}), 2.0, g);
  EXPECT_EQ(p.award, 1.0);
  EXPECT_EQ(p.reject, 0.0);
}

TEST(Adjudication, InvalidCategory) {
  auto g = constants({.w13 = 0.5});
  TransactionRecord cbnr = pending();
  cbnr.events.clear();
  EXPECT_THROW(adjudication_probabilities(cbnr, 2.0, g), InvalidCategory);
  EXPECT_THROW(adjudication_probabilities(pending({Event::death(1.5)}), 2.0, g), InvalidCategory);
}

TEST(Adjudication, StartFromRecord) {
  auto rejected = pending({Event::move(1.5, 2, 3)});
  auto ctx = adjudication_context(rejected, 2.0);
  EXPECT_EQ(ctx.start, 2);
  EXPECT_EQ(ctx.category, Category::RBNSi);
  EXPECT_DOUBLE_EQ(ctx.anchor, 1.0);
  EXPECT_DOUBLE_EQ(ctx.cov.extra_value("report_lag"), 0.5);
  auto stopped = pending({Event::start(1.5), Event::stop(2.5, 3)});
  auto c2 = adjudication_context(stopped, 3.0);
  EXPECT_EQ(c2.category, Category::RBNSr);
  EXPECT_EQ(c2.start, 2);
  EXPECT_DOUBLE_EQ(c2.anchor, 2.5);
  EXPECT_DOUBLE_EQ(c2.cov.extra_value("eligible_years"), 2.0);
}

TEST(Adjudication, SwitchingAgainstChainSimulation) {
  Rates r{.w12 = 1.0, .w21 = 2.0, .w13 = 0.5, .w14 = 0.1, .w24 = 0.2};
  auto p = adjudication_probabilities(pending(), 2.0, constants(r));
  auto [mc, se] = chain_mc(r, 1, 1000000, 11);
  EXPECT_NEAR(p.award, mc, 3 * se);
}

TEST(Adjudication, RandomFixturesAgainstChainSimulation) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> U(0.05, 2.0);
  for (int f = 0; f < 5; ++f) {
    Rates r{U(gen), U(gen), U(gen), U(gen), U(gen), U(gen) * 0.3};
    for (int start : {1, 2}) {
      auto ctx = adjudication_context(pending(start == 2 ? std::vector<Event>{Event::move(1.5, 2, 3)}
                                                         : std::vector<Event>{}),
                                      2.0);
      const double p = award_probability(ctx, constants(r), 70.0);
      auto [mc, se] = chain_mc(r, start, 1000000, 100 + f * 2 + start);
      EXPECT_NEAR(p, mc, 3 * se) << "fixture " << f << " start " << start;
    }
  }
}

TEST(Adjudication, OccupancyConserved) {
  AdjudicationHazards g = constants({.w12 = 1.0, .w21 = 2.0, .w13 = 0.5, .w14 = 0.1, .w24 = 0.2});
  g.rbnsi.w13 = LogLinearHazard("1", "3", {{Regressor::InterceptM, std::log(0.5)},
                                           {Regressor::DurationCapped, -0.4, 1.5, ""},
                                           {Regressor::Extra, 0.7, INFINITY, "prior_rejection"}});
  std::vector<Occupancy> trace;
  auto ctx = adjudication_context(pending(), 2.0);
  award_probability(ctx, g, 60.0, {}, &trace);
  ASSERT_GT(trace.size(), 10u);
  for (const auto& o : trace)
    EXPECT_NEAR(o.p1 + o.p1_prior + o.p2 + o.award + o.reject, 1.0, 1e-8) << "t=" << o.t;
}

TEST(Adjudication, TimeRescaling) {
  Rates r{.w12 = 1.0, .w21 = 2.0, .w13 = 0.5, .w14 = 0.1, .w24 = 0.2};
  Rates s{.w12 = 2.0, .w21 = 4.0, .w13 = 1.0, .w14 = 0.2, .w24 = 0.4};
  auto ctx = adjudication_context(pending(), 2.0);
  EXPECT_NEAR(award_probability(ctx, constants(r), 60.0), award_probability(ctx, constants(s), 60.0), 1e-9);
}

TEST(Adjudication, JsonRoundTrip) {
  auto g = constants({.w12 = 1.0, .w13 = 0.5, .w14 = 0.1});
  auto back = adjudication_from_json(adjudication_to_json(g));
  auto ctx = adjudication_context(pending(), 2.0);
  EXPECT_DOUBLE_EQ(award_probability(ctx, g, 60.0), award_probability(ctx, back, 60.0));
  EXPECT_THROW(adjudication_from_json(json{{"rbnsi", json::array()}}), ConfigError);
  EXPECT_THROW(adjudication_from_json(json{{"rbnsi", json::array()}, {"shared", true}, {"bogus", 1}}), ConfigError);
}

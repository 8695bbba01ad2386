#include <benchmark/benchmark.h>

#include "reng/estimation.hpp"
#include "reng/simulation.hpp"

using namespace reng;

namespace {

ScenarioConfig fixture(long n) {
  ScenarioConfig c;
  c.size = n;
  c.seed = 3;
  c.eta = 5.0;
  auto& h = c.params.hazards;
  h.ai = constant_hazard("a", "i", 0.1);
  h.ad = constant_hazard("a", "d", 0.01);
  h.ir = constant_hazard("i", "r", 0.4);
  h.id = constant_hazard("i", "d", 0.05);
  h.rd = constant_hazard("r", "d", 0.01);
  c.params.adjudication.shared = false;
  auto& b = c.params.adjudication.rbnsi;
  b.w12 = constant_hazard("1", "2", 0.5);
  b.w21 = constant_hazard("2", "1", 1.0);
  b.w13 = constant_hazard("1", "3", 2.0);
  c.params.delay.disability = {2.0, 1.0};
  c.product.annuity_rate = 1.0;
  c.product.coverage_period = 3.0;
  c.product.premium_rate = 0.1;
  c.curve = InterestCurve::constant(0.02);
  return c;
}

const Portfolio& portfolio() {
  static const Portfolio p = simulate_portfolio(fixture(20000));
  return p;
}

void BM_SimulatePortfolio(benchmark::State& st) {
  const auto c = fixture(20000);
  for (auto _ : st) benchmark::DoNotOptimize(simulate_portfolio(c, static_cast<int>(st.range(0))));
  st.SetItemsProcessed(st.iterations() * c.size);
}
BENCHMARK(BM_SimulatePortfolio)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SimulatePortfolioSerial(benchmark::State& st) {
  const auto c = fixture(20000);
  for (auto _ : st) benchmark::DoNotOptimize(simulate_portfolio_serial(c));
  st.SetItemsProcessed(st.iterations() * c.size);
}
BENCHMARK(BM_SimulatePortfolioSerial)->Unit(benchmark::kMillisecond);

void BM_ValidTimeGrid(benchmark::State& st) {
  const auto c = fixture(0);
  CovariateVector cov;
  cov.age_at_origin = 40;
  for (auto _ : st) {
    ReserveEngine eng(c.params, c.product, c.curve, c.num);
    benchmark::DoNotOptimize(&eng.grid(cov));
  }
}
BENCHMARK(BM_ValidTimeGrid)->Unit(benchmark::kMillisecond);

void BM_PortfolioReserve(benchmark::State& st) {
  const auto c = fixture(0);
  const auto& p = portfolio();
  ReserveEngine eng(c.params, c.product, c.curve, c.num);
  eng.portfolio_reserve(p.records, c.eta, 1);  // warm the caches
  for (auto _ : st) benchmark::DoNotOptimize(eng.portfolio_reserve(p.records, c.eta, static_cast<int>(st.range(0))));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(p.records.size()));
}
BENCHMARK(BM_PortfolioReserve)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_PortfolioReserveSerial(benchmark::State& st) {
  const auto c = fixture(0);
  const auto& p = portfolio();
  ReserveEngine eng(c.params, c.product, c.curve, c.num);
  eng.portfolio_reserve_serial(p.records, c.eta);
  for (auto _ : st) benchmark::DoNotOptimize(eng.portfolio_reserve_serial(p.records, c.eta));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(p.records.size()));
}
BENCHMARK(BM_PortfolioReserveSerial)->Unit(benchmark::kMillisecond);

void BM_Exposure(benchmark::State& st) {
  const auto& p = portfolio();
  for (auto _ : st) benchmark::DoNotOptimize(build_exposure(p.records, 5.0, 1.0 / 12.0, static_cast<int>(st.range(0))));
}
BENCHMARK(BM_Exposure)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Estimate(benchmark::State& st) {
  const auto c = fixture(0);
  const auto& p = portfolio();
  EstimationConfig cfg;
  cfg.threads = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(estimate(p.records, c.eta, c.params, cfg));
}
BENCHMARK(BM_Estimate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Oracle(benchmark::State& st) {
  const auto c = fixture(0);
  OracleQuery q;
  q.t = 1.5;
  q.target_accepted = 20000;
  for (auto _ : st) benchmark::DoNotOptimize(mc_reserve_oracle(c, q, nullptr, static_cast<int>(st.range(0))));
}
BENCHMARK(BM_Oracle)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

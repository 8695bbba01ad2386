#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "reng/cli.hpp"
#include "reng/estimation.hpp"
#include "reng/simulation.hpp"
#include "reng/transaction.hpp"

using namespace reng;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = "acceptance_out";

struct Outcome {
  bool pass = true;
  std::string detail;
};

double rel(double a, double b) { return std::abs(a / b - 1.0); }

LogLinearHazard lh(const char* o, const char* t, double m, double f, double age = 0.0) {
  std::vector<HazardTerm> v{{Regressor::InterceptM, m}, {Regressor::InterceptF, f}};
  if (age != 0.0) v.push_back({Regressor::CurrentAge, age});
  return LogLinearHazard(o, t, v);
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

AdjudicationBlock block(double w12, double w21, double w13) {
  AdjudicationBlock b;
  if (w12 > 0) b.w12 = constant_hazard("1", "2", w12);
  if (w21 > 0) b.w21 = constant_hazard("2", "1", w21);
  if (w13 > 0) b.w13 = constant_hazard("1", "3", w13);
  return b;
}

// Constant-hazard portfolio; with dispute, stopped payouts are contested through the RBNSr block.
ScenarioConfig standard(long n, bool dispute = false) {
  ScenarioConfig c;
  c.size = n;
  c.seed = 17;
  c.eta = 5.0;
  c.params.hazards = constants(0.1, 0.01, 0.4, 0.05, dispute ? 0.05 : 0.01);
  c.params.adjudication.shared = false;
  c.params.adjudication.rbnsi = block(0.5, 1.0, 2.0);
  if (dispute) {
    auto r = block(0.6, 1.0, 1.5);
    r.w21->terms.push_back({Regressor::DurationCapped, -2.0, std::numeric_limits<double>::infinity(), ""});
    c.params.adjudication.rbnsr = r;
    c.dispute = true;
  }
  c.params.delay.disability = {2.0, 1.0};
  c.product.annuity_rate = 1.0;
  c.product.coverage_period = 3.0;
  c.product.retirement_age = 67.0;
  c.product.premium_rate = 0.1;
  c.curve = InterestCurve::constant(0.02);
  return c;
}

ScenarioConfig recovery(long n, std::uint64_t seed) {
  ScenarioConfig c;
  c.size = n;
  c.seed = seed;
  c.eta = 15.0;
  c.covariates.age_min = 40;
  c.covariates.age_max = 60;
  auto& h = c.params.hazards;
  h.ai = lh("a", "i", -7.3, -7.1, 0.11);
  h.ad = lh("a", "d", -3.9, -4.1);
  h.ir = lh("i", "r", 8.5, 8.3, -0.15);
  h.id = lh("i", "d", -2.6, -2.8);
  h.rd = lh("r", "d", -3.4, -3.6);
  auto& g = c.params.adjudication;
  g.shared = false;
  g.rbnsi.w12 = lh("1", "2", -2.0, -1.8);
  g.rbnsi.w21 = lh("2", "1", 2.5, 2.3);
  g.rbnsi.w13 = lh("1", "3", 0.9, 0.7);
  c.params.delay.disability = {2.0, 0.8, 0.08, 1.0, 45.0};
  c.product.annuity_rate = 1.0;
  c.curve = InterestCurve::constant(0.02);
  return c;
}

// Slow reporting, persistent disability, favourable adjudication.
ScenarioConfig long_delay() {
  ScenarioConfig c;
  c.size = 5000;
  c.seed = 42;
  c.eta = 5.0;
  c.params.hazards = constants(0.1, 0.01, 0.15, 0.03, 0.01);
  c.params.adjudication.shared = false;
  c.params.adjudication.rbnsi = block(0.3, 1.0, 1.5);
  c.params.delay.disability = {0.4, 1.0};
  c.product.annuity_rate = 1.0;
  c.product.coverage_period = 10.0;
  c.product.premium_rate = 0.1;
  c.curve = InterestCurve::constant(0.02);
  return c;
}

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << j.dump(2) << "\n";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(Command cmd, const fs::path& config, int threads) {
  RunOptions o;
  o.command = cmd;
  o.config = config;
  o.threads = threads;
  std::ostringstream sink;
  return run_command(o, sink);
}

// Goes through argument parsing and exit-code mapping, with stdout captured.
int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "reserve-engine");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int rc = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  return rc;
}

Outcome closed_forms() {
  Outcome o;
  double worst = 0.0;
  auto check = [&](double got, double want) { worst = std::max(worst, rel(got, want)); };

  const LogLinearHazard mu_ad("a", "d",
                              {{Regressor::CurrentAge, 0.09}, {Regressor::InterceptM, -9.50},
                               {Regressor::InterceptF, -9.80}});
  const LogLinearHazard mu_id("i", "d",
                              {{Regressor::CurrentAge, 0.09}, {Regressor::InterceptM, -6.40},
                               {Regressor::InterceptF, -6.80}, {Regressor::DurationCapped, -0.25, 5.0, ""}});
  check(evaluate_hazard(mu_ad, 0.0, 0.0, {40, Gender::M, {}}), std::exp(0.09 * 40 - 9.50));
  check(evaluate_hazard(mu_id, 7.0, 7.0, {45, Gender::F, {}}), std::exp(0.09 * 52 - 6.80 - 0.25 * 5));
  check(integrated_hazard(mu_ad, 0.0, 1.0, 0.0, {40, Gender::M, {}}),
        std::expm1(0.09) / 0.09 * std::exp(0.09 * 40 - 9.50));

  const CovariateVector f45{45, Gender::F, {}};
  check(transition_probability({0, State::a, 0}, State::a, 1.0, constants(0.1, 0.02, 0, 0, 0), f45), std::exp(-0.12));

  PaymentSpec r_annuity;
  r_annuity.annuity_rate = 0.0;
  r_annuity.reactivated_rate = 1.0;
  r_annuity.retirement_age = 67.0;
  check(statewise_reserve(State::r, 0.0, 0.0, r_annuity, InterestCurve::constant(0.02), constants(0, 0, 0, 0, 0.01),
                          {57, Gender::F, {}}),
        (1 - std::exp(-0.3)) / 0.03);

  AdjudicationHazards g;
  g.shared = true;
  g.rbnsi.w13 = constant_hazard("1", "3", 0.5);
  g.rbnsi.w14 = constant_hazard("1", "4", 0.1);
  TransactionRecord pending;
  pending.policy.id = "x";
  pending.policy.cov.age_at_origin = 40.0;
  pending.events = {Event::report(1.0, 0.5)};
  pending.as_of = 3.0;
  check(adjudication_probabilities(pending, 2.0, g).award, 0.5 / 0.6);

  PaymentSpec unit;
  unit.annuity_rate = 1.0;
  unit.retirement_age = 67.0;
  TransactionRecord started = pending;
  started.events.push_back(Event::start(1.5));
  started.as_of = 1.5;
  const auto cf = observed_cashflow(started, unit, InterestCurve::constant(0.02));
  if (cf.lumps.size() != 1) return {false, "backpay lump missing"};
  check(cf.lumps[0].second, std::expm1(0.02) / 0.02);

  check(ibnr_factor(DelayDistribution{2.0, 1.0}, 1.5, 2.0, f45), std::exp(-1.0));

  o.pass = worst <= 1e-6;
  o.detail = fmt::format("9 closed forms, worst relative error {:.2e}", worst);
  return o;
}

Outcome oracle_agreement() {
  std::vector<std::string> parts;
  bool ok = true;

  const auto c = standard(0);
  const ReserveEngine eng(c.params, c.product, c.curve, c.num);
  OracleQuery q;
  q.t = 1.5;
  q.age = 40;
  q.gender = 0;
  q.target_accepted = 100000;
  const auto cb = mc_reserve_oracle(c, q);
  TransactionRecord fresh;
  fresh.policy.cov.age_at_origin = 40;
  fresh.policy.cov.gender = Gender::M;
  fresh.as_of = q.t;
  const double v = eng.reserve(fresh, q.t).total;
  const double z_cbnr = (cb.estimate - v) / cb.std_error;
  ok = ok && std::abs(z_cbnr) <= 3.0 && cb.accepted >= 100000;
  parts.push_back(fmt::format("cbnr z={:+.2f} n={}", z_cbnr, cb.accepted));

  OracleQuery qi;
  qi.category = Category::RBNSi;
  qi.mode = OracleMode::Paired;
  qi.t = 2.0;
  qi.target_accepted = 100000;
  const auto ri = mc_reserve_oracle(c, qi, &eng);
  const double z_i = ri.estimate / ri.std_error;
  ok = ok && std::abs(z_i) <= 3.0 && ri.accepted >= 100000;
  parts.push_back(fmt::format("rbnsi z={:+.2f} n={}", z_i, ri.accepted));

  const auto cd = standard(0, true);
  const ReserveEngine engd(cd.params, cd.product, cd.curve, cd.num);
  OracleQuery qr;
  qr.category = Category::RBNSr;
  qr.mode = OracleMode::Paired;
  qr.t = 2.5;
  qr.target_accepted = 100000;
  const auto rr = mc_reserve_oracle(cd, qr, &engd);
  const double z_r = rr.estimate / rr.std_error;
  ok = ok && std::abs(z_r) <= 3.0 && rr.accepted >= 100000;
  parts.push_back(fmt::format("rbnsr z={:+.2f} n={}", z_r, rr.accepted));

  TransactionRecord payout;
  payout.policy.id = "p";
  payout.policy.cov.age_at_origin = 45.0;
  payout.policy.cov.gender = Gender::F;
  payout.events = {Event::report(1.2, 0.8), Event::start(1.6)};
  payout.as_of = 3.0;
  const double collapsed = engd.rbnsr_reserve(payout, 3.0).total;
  const double vi = statewise_reserve(State::i, 3.0, 3.0 - 0.8, cd.product, cd.curve, cd.params.hazards,
                                      payout.policy.cov, cd.num);
  const double gap = std::abs(collapsed - vi) / vi;
  ok = ok && gap <= 1e-7;
  parts.push_back(fmt::format("payout collapse {:.1e}", gap));

  std::string d;
  for (const auto& p : parts) d += (d.empty() ? "" : ", ") + p;
  return {ok, d};
}

double rate_at(const LogLinearHazard& h, double t, double u, Gender g) { return evaluate_hazard(h, t, u, {50, g, {}}); }

Outcome recovery_and_bias() {
  const auto c = recovery(20000, 2026);
  const auto p = simulate_portfolio(c);
  const auto r = estimate(p.records, c.eta, c.params);
  double worst = 0.0;
  std::string worst_name;
  auto take = [&](double est, double truth, const std::string& name) {
    if (rel(est, truth) > worst) worst = rel(est, truth), worst_name = name;
  };
  auto compare = [&](const std::optional<LogLinearHazard>& truth, const std::optional<LogLinearHazard>& est) {
    if (!est) {
      worst = INFINITY;
      worst_name = truth->origin + truth->target + " missing";
      return;
    }
    for (size_t k = 0; k < truth->terms.size(); ++k)
      take(est->terms[k].coefficient, truth->terms[k].coefficient,
           fmt::format("{}{}[{}]", truth->origin, truth->target, k));
  };
  const auto &h = c.params.hazards, &e = r.params.hazards;
  compare(h.ai, e.ai);
  compare(h.ad, e.ad);
  compare(h.ir, e.ir);
  compare(h.id, e.id);
  compare(h.rd, e.rd);
  const auto &g = c.params.adjudication.rbnsi, &ge = r.params.adjudication.rbnsi;
  compare(g.w12, ge.w12);
  compare(g.w21, ge.w21);
  compare(g.w13, ge.w13);
  const auto &d = c.params.delay.disability, &de = r.params.delay.disability;
  take(de.lambda, d.lambda, "lambda");
  take(de.k, d.k, "k");
  take(de.beta_age, d.beta_age, "beta_age");
  take(de.beta_male, d.beta_male, "beta_male");

  // rates at age 55 (origin 50, t = 5), disabled for one year
  constexpr int kReps = 10;
  double bias_ai[2] = {0, 0}, bias_ir[2] = {0, 0};
  for (int k = 0; k < kReps; ++k) {
    const auto ck = recovery(20000, 1000 + k);
    const auto fit = estimate(simulate_portfolio(ck).records, ck.eta, ck.params);
    for (int s = 0; s < 2; ++s) {
      const Gender gd = s ? Gender::F : Gender::M;
      bias_ai[s] += (rate_at(*fit.params.hazards.ai, 5, 5, gd) / rate_at(*h.ai, 5, 5, gd) - 1) / kReps;
      bias_ir[s] += (rate_at(*fit.params.hazards.ir, 5, 1, gd) / rate_at(*h.ir, 5, 1, gd) - 1) / kReps;
    }
  }
  const double worst_bias = std::max({std::abs(bias_ai[0]), std::abs(bias_ai[1]), std::abs(bias_ir[0]),
                                      std::abs(bias_ir[1])});
  return {worst < 0.05 && worst_bias < 0.01,
          fmt::format("worst coefficient error {:.2f}% ({}), rate bias ai {:+.2f}%/{:+.2f}% ir {:+.2f}%/{:+.2f}% "
                      "(M/F, {} replications)",
                      100 * worst, worst_name, 100 * bias_ai[0], 100 * bias_ai[1], 100 * bias_ir[0],
                      100 * bias_ir[1], kReps)};
}

Outcome runoff() {
  const fs::path dir = kWork / "runoff";
  const auto scenario = read_json_file(fs::path(RENG_SOURCE_DIR) / "configs" / "scenario_standard.json");
  const json rc = {{"start", 2.0}, {"period", 1.0 / 12.0}, {"periods", 24}, {"band", 3.0}};
  if (scenario_from_json(scenario).size < 10000) return {false, "scenario smaller than 1e4 policies"};
  write_json(dir / "flat.json", {{"output_dir", "flat"}, {"scenario", scenario}, {"runoff", rc}});
  auto doubled = scenario_from_json(scenario).params;
  for (auto& t : doubled.hazards.ai->terms) t.coefficient += std::log(2.0);
  write_json(dir / "drift.json", {{"output_dir", "drift"},
                                  {"scenario", scenario},
                                  {"parameters", model_parameters_to_json(doubled)},
                                  {"runoff", rc}});
  const int flat = run_cli({"validate-runoff", "--config", (dir / "flat.json").string(), "--threads", "1"});
  const int drift = run_cli({"validate-runoff", "--config", (dir / "drift.json").string(), "--threads", "1"});
  auto statistic = [&](const char* sub) {
    std::istringstream in(slurp(dir / sub / "verdict.txt"));
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    return line;
  };
  return {flat == kExitOk && drift == kExitVerdict,
          fmt::format("correct model exit {} [{}], doubled mu_ai exit {} [{}]", flat, statistic("flat"), drift,
                      statistic("drift"))};
}

Outcome convergence() {
  const LogLinearHazard steep("a", "i", {{Regressor::CurrentAge, 1.3}, {Regressor::InterceptM, -60.0}});
  const CovariateVector m45{45, Gender::M, {}};
  const double exact = cumulative_hazard_exact(steep, 0.0, 2.0, 0.0, m45);
  const double e1 = std::abs(integrated_hazard(steep, 0.0, 2.0, 0.0, m45, 0.25) - exact);
  const double e2 = std::abs(integrated_hazard(steep, 0.0, 2.0, 0.0, m45, 0.125) - exact);
  const double simpson_order = std::log2(e1 / e2);

  HazardSet shaped;
  shaped.ai = LogLinearHazard("a", "i", {{Regressor::CurrentAge, 0.04}, {Regressor::InterceptM, -4.5},
                                         {Regressor::InterceptF, -4.3}});
  shaped.ad = LogLinearHazard("a", "d", {{Regressor::CurrentAge, 0.09}, {Regressor::InterceptM, -9.50},
                                         {Regressor::InterceptF, -9.80}});
  shaped.ir = LogLinearHazard("i", "r", {{Regressor::InterceptM, -0.7}, {Regressor::InterceptF, -0.8},
                                         {Regressor::DurationCapped, -0.5, 2.0, ""}});
  shaped.id = LogLinearHazard("i", "d", {{Regressor::CurrentAge, 0.09}, {Regressor::InterceptM, -6.40},
                                         {Regressor::InterceptF, -6.80},
                                         {Regressor::DurationCapped, -0.25, 5.0, ""}});
  shaped.rd = shaped.ad;
  shaped.rd->origin = "r";
  PaymentSpec unit;
  unit.annuity_rate = 1.0;
  unit.retirement_age = 67.0;
  const CovariateVector f40{40, Gender::F, {}};
  auto value = [&](double h) {
    Numerics n;
    n.rk4_step = h;
    n.onset_step = 1.0;
    ReserveGrid g({shaped, f40, unit, InterestCurve::constant(0.02), n});
    return g.V(State::a, 0.0, 0.0);
  };
  const double v1 = value(0.25), v2 = value(0.125), v3 = value(0.0625);
  const double rk4_order = std::log2(std::abs(v1 - v2) / std::abs(v2 - v3));

  double worst = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = 1.0 + 0.03 * k;
    for (StateDuration from : {StateDuration{1.0, State::a, 1.0}, StateDuration{1.0, State::i, 0.7},
                               StateDuration{1.0, State::r, 0.2}}) {
      const auto row = transition_row(from, t, shaped, f40);
      worst = std::max(worst, std::abs(row.p[0] + row.p[1] + row.p[2] + row.p[3] - 1.0));
    }
  }
  return {std::abs(simpson_order - 4.0) < 0.3 && std::abs(rk4_order - 4.0) < 0.3 && worst < 1e-8,
          fmt::format("Simpson order {:.3f}, RK4 order {:.3f}, worst row-sum error {:.1e}", simpson_order,
                      rk4_order, worst)};
}

Outcome long_delay_naive() {
  const fs::path dir = kWork / "long_delay";
  const auto sc = long_delay();
  write_json(dir / "simulate.json",
             {{"output_dir", "simulate"}, {"scenario", scenario_to_json(sc)}, {"emit_paths", false}});
  write_json(dir / "reserve.json",
             {{"output_dir", "reserve"},
              {"data", {{"policies", "simulate/policies.csv"}, {"transactions", "simulate/transactions.csv"}}},
              {"valuation_date", sc.eta},
              {"parameters", model_parameters_to_json(sc.params)},
              {"product", payment_spec_to_json(sc.product)},
              {"interest", interest_to_json(sc.curve)},
              {"sample_per_category", 0}});
  if (run(Command::Simulate, dir / "simulate.json", 1) != kExitOk) return {false, "simulate failed"};
  if (run(Command::Reserve, dir / "reserve.json", 1) != kExitOk) return {false, "reserve failed"};
  std::ifstream in(dir / "reserve" / "categories.csv");
  const auto bars = read_category_csv(in);
  auto bar = [&](const char* method, Category c) {
    for (const auto& b : bars)
      if (b.method == method && b.category == c) return b.portfolio;
    return std::nan("");
  };
  const double pc = bar("proposed", Category::CBNR), nc = bar("naive", Category::CBNR);
  const double pi = bar("proposed", Category::RBNSi), ni = bar("naive", Category::RBNSi);
  return {nc < pc && ni < pi,
          fmt::format("CBNR naive {:.1f} vs {:.1f}, RBNSi naive {:.1f} vs {:.1f}; bars in {}", nc, pc, ni, pi,
                      (dir / "reserve" / "categories.csv").string())};
}

Outcome reproducibility() {
  const fs::path dir = kWork / "repro";
  auto sc = recovery(1500, 9);
  sc.eta = 6.0;
  sc.product.coverage_period = 4.0;
  sc.product.premium_rate = 0.05;
  const json data = {{"policies", "simulate/policies.csv"}, {"transactions", "simulate/transactions.csv"}};
  const json full = {{"policies", "simulate/full_policies.csv"}, {"transactions", "simulate/full_transactions.csv"}};
  std::vector<std::pair<Command, std::string>> steps = {{Command::Simulate, "simulate"},
                                                         {Command::Estimate, "estimate"},
                                                         {Command::Reserve, "reserve"},
                                                         {Command::ValidateRunoff, "runoff"}};
  std::vector<std::string> labels = {"a1", "b1", "c2"};
  for (const auto& label : labels) {
    const fs::path d = dir / label;
    fs::remove_all(d);
    write_json(d / "simulate.json", {{"output_dir", "simulate"}, {"scenario", scenario_to_json(sc)}});
    write_json(d / "estimate.json", {{"output_dir", "estimate"},
                                     {"data", data},
                                     {"eta", sc.eta},
                                     {"template", model_parameters_to_json(sc.params)},
                                     {"bootstrap", {{"replicates", 2}, {"seed", 5}}}});
    write_json(d / "reserve.json", {{"output_dir", "reserve"},
                                    {"data", data},
                                    {"valuation_date", sc.eta},
                                    {"parameters", "estimate/params.json"},
                                    {"product", payment_spec_to_json(sc.product)},
                                    {"interest", interest_to_json(sc.curve)},
                                    {"sample_per_category", 50}});
    write_json(d / "runoff.json", {{"output_dir", "runoff"},
                                   {"data", full},
                                   {"parameters", "estimate/params.json"},
                                   {"product", payment_spec_to_json(sc.product)},
                                   {"interest", interest_to_json(sc.curve)},
                                   {"runoff", {{"start", 3.0}, {"period", 0.25}, {"periods", 8}}}});
    const int threads = label.back() - '0';
    for (const auto& [cmd, name] : steps) {
      const int rc = run(cmd, d / (name + ".json"), threads);
      if (rc != kExitOk && rc != kExitVerdict) return {false, name + " failed in run " + label};
    }
  }
  long files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / labels[0])) {
    if (!e.is_regular_file()) continue;
    const auto relp = fs::relative(e.path(), dir / labels[0]);
    const std::string ref = slurp(e.path());
    for (size_t k = 1; k < labels.size(); ++k)
      if (slurp(dir / labels[k] / relp) != ref) return {false, relp.string() + " differs in run " + labels[k]};
    ++files;
  }
  return {files > 0, fmt::format("{} files identical over 2 runs at 1 thread and 1 run at 2 threads", files)};
}

}  // namespace

int main() {
  auto log = spdlog::stderr_logger_st("reserve-engine");
  log->set_level(spdlog::level::warn);
  spdlog::set_default_logger(log);
  fs::create_directories(kWork);

  struct Criterion {
    int id;
    const char* name;
    double limit;  // seconds
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "closed-form values", 1.0, closed_forms},
      {2, "reserves against the Monte Carlo oracle", 600.0, oracle_agreement},
      {3, "parameter recovery and Poisson bias", 900.0, recovery_and_bias},
      {4, "run-off validation", 300.0, runoff},
      {5, "quadrature and ODE convergence", 60.0, convergence},
      {6, "naive under-reservation on slow reporting", 60.0, long_delay_naive},
      {7, "byte-identical reruns", 300.0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.limit;
    failed += !pass;
    std::cout << fmt::format("{} criterion {} {}: {} [{:.2f} s, limit {:.0f} s]", pass ? "PASS" : "FAIL", c.id,
                             c.name, o.detail, secs, c.limit)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

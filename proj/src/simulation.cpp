#include "reng/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <tuple>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace reng {

namespace {

enum Purpose : std::uint64_t { kCov = 1, kPath = 2, kDelay = 3, kChain = 4, kFalseStop = 5 };

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxResample = 100000;

int thread_count(int threads) {
#ifdef _OPENMP
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

bool only_intercept_and_duration(const std::optional<LogLinearHazard>& h) {
  if (!h) return true;
  for (const auto& t : h->terms)
    if (t.kind != Regressor::InterceptM && t.kind != Regressor::InterceptF && t.kind != Regressor::DurationCapped)
      return false;
  return true;
}

bool same_terms(const std::optional<LogLinearHazard>& a, const std::optional<LogLinearHazard>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  auto key = [](const LogLinearHazard& h) {
    std::vector<std::tuple<int, std::string, double, double>> v;
    for (const auto& t : h.terms) v.emplace_back(static_cast<int>(t.kind), t.name, t.coefficient, t.cap);
    std::sort(v.begin(), v.end());
    return v;
  };
  return key(*a) == key(*b) && a->calendar_epoch == b->calendar_epoch;
}

struct ChainMove {
  double time;
  int from, to;
};

struct ChainRun {
  std::vector<ChainMove> moves;
  double award = kInf;
};

// Adjudication chain on {1, 2} with award edge 1->3; death edges are left to the valid-time path.
ChainRun run_chain(const AdjudicationBlock& b, const AdjudicationContext& ctx, double t0, double t_max,
                   CounterRng& rng, double tol) {
  ChainRun run;
  int state = ctx.start;
  bool prior = ctx.prior_rejection;
  double t = t0;
  for (int step = 0; step < 10000; ++step) {
    const CovariateVector cov = ctx.with_flag(prior || state == 2);
    CompetingRisks cr;
    if (state == 1) {
      if (b.w12) cr.add(*b.w12, cov, 2);
      if (b.w13) cr.add(*b.w13, cov, 3);
    } else {
      if (b.w21) cr.add(*b.w21, cov, 1);
    }
    auto draw = sample_sojourn(cr, t, t - ctx.anchor, t_max, rng, tol);
    if (!draw) return run;
    t = draw->time;
    if (draw->label == 3) {
      run.award = t;
      return run;
    }
    run.moves.push_back({t, state, draw->label});
    if (draw->label == 2) prior = true;
    state = draw->label;
  }
  return run;
}

class PolicySimulator {
 public:
  PolicySimulator(const ScenarioConfig& cfg, long k, const CovariateVector& cov, const JumpPath& path)
      : cfg_(cfg), k_(k), cov_(cov), chain_rng_(cfg.seed, k, kChain), stop_rng_(cfg.seed, k, kFalseStop) {
    tau_i_ = path.first_entry(State::i).value_or(kInf);
    tau_r_ = path.first_entry(State::r).value_or(kInf);
    tau_d_ = path.death_time();
    chain_end_ = path.horizon;
  }

  std::vector<Event> run() {
    if (!std::isfinite(tau_i_)) {
      if (std::isfinite(tau_d_)) ev_.push_back(Event::death(tau_d_));
      return ev_;
    }
    CounterRng drng(cfg_.seed, k_, kDelay);
    const double report = tau_i_ + cfg_.params.delay.disability.quantile(drng.uniform(), cov_, tau_i_);
    if (tau_d_ <= report) {
      ev_.push_back(Event::report(tau_d_, tau_i_));
      reveal(tau_d_, tau_i_, 2, true);
      return ev_;
    }
    ev_.push_back(Event::report(report, tau_i_));
    rbnsi(report);
    return ev_;
  }

  double inconsistent_from() const { return inconsistent_from_; }

 private:
  AdjudicationContext context(Category c, int start, double anchor, double report, double W, bool prior) const {
    AdjudicationContext ctx;
    ctx.category = c;
    ctx.start = start;
    ctx.anchor = anchor;
    ctx.prior_rejection = prior;
    ctx.cov = cov_;
    ctx.cov.set_extra("report_lag", report - tau_i_);
    ctx.cov.set_extra("eligible_years", W);
    ctx.cov.set_extra("prior_rejection", prior ? 1.0 : 0.0);
    return ctx;
  }

  // Records chain moves before `until`; returns the transaction state afterwards.
  int record_moves(const ChainRun& run, double until, int z1) {
    for (const auto& m : run.moves) {
      if (m.time >= until) break;
      ev_.push_back(m.to == 2 ? Event::move(m.time, 2, 3) : Event::move(m.time, 3, 2));
      z1 = m.to == 2 ? 3 : 2;
    }
    return z1;
  }

  // Death reveals the claim: a disabled insured is awarded everything up to death or reactivation.
  void reveal(double t, double G, int z1, bool disabled) {
    if (disabled) {
      if (z1 == 3) ev_.push_back(Event::move(t, 3, 2));
      if (tau_r_ < t) {
        ev_.push_back(Event::death(t));
        ev_.push_back(Event::backpay(t, G, tau_r_));
      } else {
        ev_.push_back(Event::start(t));
        ev_.push_back(Event::backpay(t, G, t));
        ev_.push_back(Event::death(t));
      }
    } else {
      ev_.push_back(Event::death(t));
    }
  }

  void rbnsi(double report) {
    const auto ctx = context(Category::RBNSi, 1, report, report, 0.0, false);
    const auto run = run_chain(cfg_.params.adjudication.block(Category::RBNSi), ctx, report, chain_end_,
                               chain_rng_, cfg_.num.root_tolerance);
    const double stop = std::min(run.award, tau_d_);
    const int z1 = record_moves(run, stop, 2);
    if (run.award < tau_d_) {
      award(run.award, tau_i_);
    } else if (std::isfinite(tau_d_)) {
      reveal(tau_d_, tau_i_, z1, true);
    }
  }

  // Award out of transaction state 2 at time T for eligibility from G.
  void award(double T, double G) {
    if (tau_r_ > T) {
      ev_.push_back(Event::start(T));
      ev_.push_back(Event::backpay(T, G, T));
      payout(T);
    } else {
      ev_.push_back(Event::move(T, 2, 3));
      ev_.push_back(Event::backpay(T, G, tau_r_));
      if (cfg_.dispute) inconsistent_from_ = std::min(inconsistent_from_, T);
      reactivated(T);
    }
  }

  void payout(double start) {
    double sigma = kInf;
    if (cfg_.dispute && cfg_.params.hazards.ir) {
      const double pi = false_stop_odds();
      if (pi > 0.0) {
        LogLinearHazard nu = *cfg_.params.hazards.ir;
        nu.terms.push_back({Regressor::InterceptM, std::log(pi), kInf, ""});
        nu.terms.push_back({Regressor::InterceptF, std::log(pi), kInf, ""});
        CompetingRisks cr;
        cr.add(nu, cov_, 0);
        const double until = std::min({tau_r_, tau_d_, chain_end_});
        if (auto d = sample_sojourn(cr, start, start - tau_i_, until, stop_rng_, cfg_.num.root_tolerance))
          sigma = d->time;
      }
    }
    if (sigma < kInf) {
      ev_.push_back(Event::stop(sigma, 3));
      false_stop(sigma);
    } else if (tau_r_ < tau_d_) {
      ev_.push_back(Event::stop(tau_r_, 3));
      reactivated(tau_r_);
    } else if (std::isfinite(tau_d_)) {
      ev_.push_back(Event::death(tau_d_));
    }
  }

  // pi / (1 - pi) for the award probability of a reactivation adjudication.
  double false_stop_odds() const {
    thread_local std::map<std::tuple<std::string, int, double>, double> memo;
    const auto key = std::make_tuple(
        adjudication_to_json(cfg_.params.adjudication).dump() + numerics_to_json(cfg_.num).dump(),
        static_cast<int>(cov_.gender), chain_end_);
    auto it = memo.find(key);
    if (it == memo.end()) {
      const auto ctx = context(Category::RBNSr, 2, 0.0, 0.0, 0.0, true);
      it = memo.emplace(key, award_probability(ctx, cfg_.params.adjudication, chain_end_, cfg_.num)).first;
    }
    const double pi = it->second;
    if (!(pi < 1.0)) throw DegenerateModel("dispute mode needs a reactivation award probability below 1");
    return pi / (1.0 - pi);
  }

  // Runs the reactivation chain from state 2 until its outcome agrees with `award_wanted`.
  ChainRun conditioned_chain(double from, double anchor, double W, bool award_wanted) {
    const auto ctx = context(Category::RBNSr, 2, anchor, anchor, W, true);
    const auto& block = cfg_.params.adjudication.block(Category::RBNSr);
    for (int a = 0; a < kMaxResample; ++a) {
      auto run = run_chain(block, ctx, from, chain_end_, chain_rng_, cfg_.num.root_tolerance);
      if ((run.award < kInf) == award_wanted) return run;
    }
    throw InfeasibleConditioning("reactivation chain: outcome too rare to condition on by resampling");
  }

  void false_stop(double sigma) {
    const auto run = conditioned_chain(sigma, sigma, sigma - tau_i_, true);
    const int z1 = record_moves(run, std::min(run.award, tau_d_), 3);
    if (run.award < tau_d_) award(run.award, sigma);
    else if (std::isfinite(tau_d_)) reveal(tau_d_, sigma, z1, true);
  }

  // Genuinely reactivated; from `since` the record is in state 3 with G = tau_r.
  void reactivated(double since) {
    int z1 = 3;
    if (cfg_.dispute) {
      const auto run = conditioned_chain(since, tau_r_, tau_r_ - tau_i_, false);
      z1 = record_moves(run, tau_d_, 3);
    }
    if (std::isfinite(tau_d_)) reveal(tau_d_, tau_r_, z1, false);
  }

  const ScenarioConfig& cfg_;
  long k_;
  CovariateVector cov_;
  CounterRng chain_rng_, stop_rng_;
  double tau_i_, tau_r_, tau_d_, chain_end_;
  double inconsistent_from_ = kInf;
  std::vector<Event> ev_;
};

}  // namespace

void CovariateSampler::validate() const {
  if (age_min < 0 || age_max < age_min) throw ConfigError("covariates: need 0 <= age_min <= age_max");
  if (!(p_male >= 0.0 && p_male <= 1.0)) throw ConfigError("covariates: p_male must lie in [0, 1]");
}

void ScenarioConfig::validate() const {
  if (size < 0) throw ConfigError("scenario: size must be non-negative");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("scenario: eta must be positive");
  covariates.validate();
  if (!(truncation_max >= 0.0) || truncation_max >= eta) throw ConfigError("scenario: truncation_max in [0, eta)");
  if (censoring_min > eta) throw ConfigError("scenario: censoring_min above eta");
  if (censoring_min >= 0.0 && censoring_min < truncation_max)
    throw ConfigError("scenario: censoring_min below truncation_max");
  if (covariates.age_max >= num.omega) throw ConfigError("scenario: ages must be below omega");
  params.hazards.validate();
  params.adjudication.validate();
  params.delay.disability.validate();
  product.validate();
  num.validate();
  if (dispute) {
    const auto& b = params.adjudication.block(Category::RBNSr);
    for (auto* h : {&b.w12, &b.w21, &b.w13, &b.w14, &b.w24, &b.w15})
      if (!only_intercept_and_duration(*h))
        throw ConfigError("dispute mode: reactivation adjudication hazards may only use intercepts and duration");
    if (!same_terms(params.hazards.id, params.hazards.rd))
      throw ConfigError("dispute mode: death hazards from i and r must coincide");
    for (const auto* h : {&params.hazards.id, &params.hazards.rd})
      if (*h && (*h)->uses(Regressor::DurationCapped))
        throw ConfigError("dispute mode: death hazards may not depend on duration");
  }
}

json scenario_to_json(const ScenarioConfig& c) {
  json out{{"size", c.size},
           {"seed", c.seed},
           {"eta", c.eta},
           {"covariates", {{"age_min", c.covariates.age_min},
                           {"age_max", c.covariates.age_max},
                           {"p_male", c.covariates.p_male}}},
           {"truncation_max", c.truncation_max},
           {"parameters", model_parameters_to_json(c.params)},
           {"product", payment_spec_to_json(c.product)},
           {"interest", interest_to_json(c.curve)},
           {"numerics", numerics_to_json(c.num)},
           {"dispute", c.dispute}};
  if (c.censoring_min >= 0.0) out["censoring_min"] = c.censoring_min;
  return out;
}

ScenarioConfig scenario_from_json(const json& j) {
  check_keys(j,
             {"size", "seed", "eta", "covariates", "truncation_max", "censoring_min", "parameters", "product",
              "interest", "numerics", "dispute"},
             "scenario");
  ScenarioConfig c;
  c.size = get_or<long>(j, "size", c.size);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.eta = get_req<double>(j, "eta", "scenario");
  if (j.contains("covariates")) {
    const auto& cv = j["covariates"];
    check_keys(cv, {"age_min", "age_max", "p_male"}, "scenario.covariates");
    c.covariates.age_min = get_or(cv, "age_min", c.covariates.age_min);
    c.covariates.age_max = get_or(cv, "age_max", c.covariates.age_max);
    c.covariates.p_male = get_or(cv, "p_male", c.covariates.p_male);
  }
  c.truncation_max = get_or(j, "truncation_max", 0.0);
  c.censoring_min = get_or(j, "censoring_min", -1.0);
  if (!j.contains("parameters")) throw ConfigError("scenario: parameters missing");
  c.params = model_parameters_from_json(j["parameters"]);
  if (j.contains("product")) c.product = payment_spec_from_json(j["product"]);
  if (j.contains("interest")) c.curve = interest_from_json(j["interest"]);
  if (j.contains("numerics")) c.num = numerics_from_json(j["numerics"]);
  c.dispute = get_or(j, "dispute", false);
  c.validate();
  return c;
}

SimulatedPolicy simulate_policy(const ScenarioConfig& cfg, long k) {
  CounterRng crng(cfg.seed, static_cast<std::uint64_t>(k), kCov);
  const int span = cfg.covariates.age_max - cfg.covariates.age_min + 1;
  SimulatedPolicy out;
  Policy& pol = out.full.policy;
  char id[32];
  std::snprintf(id, sizeof id, "P%07ld", k + 1);
  pol.id = id;
  pol.cov.age_at_origin = cfg.covariates.age_min + std::min(span - 1, static_cast<int>(crng.uniform() * span));
  pol.cov.gender = crng.uniform() < cfg.covariates.p_male ? Gender::M : Gender::F;
  pol.V = cfg.truncation_max > 0.0 ? crng.uniform() * cfg.truncation_max : 0.0;
  pol.C = cfg.censoring_min >= 0.0 ? cfg.censoring_min + crng.uniform() * (cfg.eta - cfg.censoring_min) : cfg.eta;

  const double horizon = cfg.num.omega - pol.cov.age_at_origin;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw InfeasibleConditioning("policy " + pol.id + ": never active at its truncation time");
    CounterRng prng(cfg.seed, static_cast<std::uint64_t>(k), kPath + 16 * static_cast<std::uint64_t>(attempt));
    out.path = simulate_path(pol.cov, cfg.params.hazards, horizon, prng, cfg.num);
    if (out.path.jumps.empty() || out.path.jumps.front().time > pol.V) break;
  }
  PolicySimulator sim(cfg, k, pol.cov, out.path);
  out.full.events = sim.run();
  out.full.as_of = horizon;
  out.inconsistent_from = sim.inconsistent_from();
  return out;
}

namespace {

void store(Portfolio& p, long k, SimulatedPolicy&& s, double eta) {
  const double cut = std::min(s.full.policy.C, eta);
  p.records[k] = truncate(s.full, cut);
  p.paths[k] = std::move(s.path);
  p.full[k] = std::move(s.full);
  p.inconsistent_from[k] = s.inconsistent_from;
}

Portfolio empty_portfolio(long n) {
  Portfolio p;
  p.paths.resize(n);
  p.records.resize(n);
  p.full.resize(n);
  p.inconsistent_from.resize(n);
  return p;
}

}  // namespace

Portfolio simulate_portfolio_serial(const ScenarioConfig& cfg) {
  cfg.validate();
  Portfolio p = empty_portfolio(cfg.size);
  for (long k = 0; k < cfg.size; ++k) store(p, k, simulate_policy(cfg, k), cfg.eta);
  return p;
}

Portfolio simulate_portfolio(const ScenarioConfig& cfg, int threads) {
  cfg.validate();
  Portfolio p = empty_portfolio(cfg.size);
  std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 64) num_threads(thread_count(threads))
#endif
  for (long k = 0; k < cfg.size; ++k) {
    try {
      store(p, k, simulate_policy(cfg, k), cfg.eta);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  (void)threads;
  return p;
}

double future_observed_value(const TransactionRecord& full, const PaymentSpec& spec, const InterestCurve& curve,
                             double t, const Numerics& num) {
  const auto cf = observed_cashflow(full, spec, curve, num, full.as_of);
  const double H = spec.horizon(full.policy.cov, num);
  return cf.value(spec, curve, H, t, t, kInf);
}

OracleResult mc_reserve_oracle(const ScenarioConfig& cfg, const OracleQuery& q, const ReserveEngine* engine,
                               int threads) {
  cfg.validate();
  if (q.mode == OracleMode::Paired && !engine) throw InvalidArgument("paired oracle needs a reserve engine");
  if (q.block <= 0 || q.target_accepted <= 0) throw InvalidArgument("oracle: block and target must be positive");
  struct Draw {
    bool accepted = false;
    double value = 0.0, reserve = 0.0;
  };
  OracleResult res;
  long double sum = 0.0L, sum2 = 0.0L, sum_v = 0.0L;
  std::exception_ptr err;
  for (long first = 0; res.accepted < q.target_accepted && first < q.max_simulated; first += q.block) {
    const long n = std::min(q.block, q.max_simulated - first);
    std::vector<Draw> draws(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 32) num_threads(thread_count(threads))
#endif
    for (long j = 0; j < n; ++j) {
      try {
        const auto sim = simulate_policy(cfg, first + j);
        const auto& rec = sim.full;
        const auto& cov = rec.policy.cov;
        if (q.age >= 0 && static_cast<int>(cov.age_at_origin) != q.age) continue;
        if (q.gender >= 0 && static_cast<int>(cov.gender) != q.gender) continue;
        const auto e = derive_eligibility(rec, q.t);
        if (categorize(e) != q.category) continue;
        if (q.mode == OracleMode::Match && q.match_summary) {
          if (std::abs(e.G - q.G) > q.tolerance || std::abs(e.W - q.W) > q.tolerance || e.z1 != q.z1) continue;
          if (q.category == Category::RBNSi && e.prior_rejection != q.prior_rejection) continue;
        }
        if (q.mode == OracleMode::Paired && q.t >= sim.inconsistent_from) continue;
        Draw& d = draws[j];
        d.value = future_observed_value(rec, cfg.product, cfg.curve, q.t, cfg.num);
        if (q.mode == OracleMode::Paired) d.reserve = engine->reserve(rec, q.t).total;
        d.accepted = true;
      } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    for (const auto& d : draws) {
      ++res.simulated;
      if (!d.accepted) continue;
      ++res.accepted;
      const long double x = q.mode == OracleMode::Paired ? d.value - d.reserve : d.value;
      sum += x;
      sum2 += x * x;
      sum_v += d.reserve;
      if (res.accepted >= q.target_accepted) break;
    }
  }
  if (res.simulated > 0 && static_cast<double>(res.accepted) / res.simulated < 1e-5)
    throw InfeasibleConditioning("oracle acceptance rate below 1e-5; widen the matching tolerance");
  if (res.accepted < 2) throw InfeasibleConditioning("oracle accepted fewer than two paths");
  const long double n = res.accepted;
  res.estimate = static_cast<double>(sum / n);
  const long double var = std::max<long double>(0.0L, (sum2 - sum * sum / n) / (n - 1));
  res.std_error = static_cast<double>(std::sqrt(var / n));
  res.mean_reserve = static_cast<double>(sum_v / n);
  (void)threads;
  return res;
}

RunoffReport runoff_validate(const std::vector<TransactionRecord>& full, const ReserveEngine& engine,
                             const RunoffConfig& cfg, int threads) {
  if (!(cfg.period > 0.0) || cfg.periods < 1) throw InvalidArgument("runoff: need a positive period and count");
  const int M = cfg.periods;
  std::vector<double> dates(M + 1);
  for (int m = 0; m <= M; ++m) dates[m] = cfg.start + m * cfg.period;
  for (const auto& r : full)
    if (r.as_of + 1e-9 < dates.back())
      throw InvalidArgument("runoff: record " + r.policy.id + " observed only to " + std::to_string(r.as_of));
  const auto& spec = engine.spec();
  const auto& curve = engine.curve();
  const long n = static_cast<long>(full.size());
  // per policy: reserves by date, payments by period, categories by date
  std::vector<std::vector<double>> V(n, std::vector<double>(M + 1)), P(n, std::vector<double>(M + 1, 0.0));
  std::vector<std::vector<Category>> cat(n, std::vector<Category>(M + 1));
  std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count(threads))
#endif
  for (long k = 0; k < n; ++k) {
    try {
      const auto& rec = full[k];
      const auto cf = observed_cashflow(rec, spec, curve, engine.numerics(), rec.as_of);
      const double H = spec.horizon(rec.policy.cov, engine.numerics());
      for (int m = 0; m <= M; ++m) {
        const auto b = engine.reserve(rec, dates[m]);
        V[k][m] = b.total;
        cat[k][m] = b.category;
        if (m > 0) P[k][m] = cf.value(spec, curve, H, dates[m - 1], dates[m - 1], dates[m]);
      }
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  (void)threads;

  RunoffReport rep;
  double zsum = 0.0, paid_cum = 0.0;
  for (int m = 0; m <= M; ++m) {
    RunoffPeriod row;
    row.period = m;
    row.t = dates[m];
    long double D = 0.0L, S2 = 0.0L, pay = 0.0L;
    const double vf = m > 0 ? curve.value_factor(dates[m - 1], dates[m]) : 1.0;
    for (long k = 0; k < n; ++k) {
      switch (cat[k][m]) {
        case Category::CBNR: row.reserve_cbnr += V[k][m]; break;
        case Category::RBNSi: row.reserve_rbnsi += V[k][m]; break;
        case Category::RBNSr: row.reserve_rbnsr += V[k][m]; break;
        case Category::Settled: break;
      }
      if (m == 0) continue;
      const double inc = vf * V[k][m] - V[k][m - 1] + P[k][m];
      D += inc;
      S2 += static_cast<long double>(inc) * inc;
      pay += P[k][m];
    }
    if (m > 0) {
      row.payments = static_cast<double>(pay);
      paid_cum += row.payments * curve.value_factor(cfg.start, dates[m - 1]);
      row.increment = static_cast<double>(D);
      row.se = static_cast<double>(std::sqrt(S2));
      if (row.se > 0.0) zsum += row.increment / row.se;
    }
    row.payments_cum = paid_cum;
    row.discount = curve.value_factor(cfg.start, dates[m]);
    rep.rows.push_back(row);
  }
  rep.mean_z = zsum / M;
  rep.statistic = std::abs(rep.mean_z) * std::sqrt(static_cast<double>(M));
  rep.flat = rep.statistic <= cfg.band;
  return rep;
}

}  // namespace reng

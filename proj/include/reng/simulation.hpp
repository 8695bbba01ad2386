#pragma once
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "reng/reserving.hpp"

namespace reng {

struct CovariateSampler {
  int age_min = 30, age_max = 55;  // integer ages at the portfolio origin
  double p_male = 0.5;
  void validate() const;
};

struct ScenarioConfig {
  long size = 1000;
  std::uint64_t seed = 1;
  double eta = 5.0;  // observation horizon
  CovariateSampler covariates;
  double truncation_max = 0.0;  // V uniform on [0, truncation_max], policy active at V
  double censoring_min = -1.0;  // C uniform on [censoring_min, eta]; negative means C = eta
  ModelParameters params;
  PaymentSpec product;
  InterestCurve curve;
  Numerics num;
  bool dispute = false;  // false payout stops resolved through the reactivation chain

  void validate() const;
};

json scenario_to_json(const ScenarioConfig& c);
// `params` may be inlined under "parameters"; product/interest sections are optional.
ScenarioConfig scenario_from_json(const json& j);

struct SimulatedPolicy {
  JumpPath path;
  TransactionRecord full;  // every event up to settlement or the end of the chain
  // From this time on the record's adjudication state can contradict the simulated truth
  // (dispute mode, after an award that reveals a reactivation).
  double inconsistent_from = std::numeric_limits<double>::infinity();
};

// Deterministic per policy index; policy k only depends on (seed, k).
SimulatedPolicy simulate_policy(const ScenarioConfig& cfg, long k);

struct Portfolio {
  std::vector<JumpPath> paths;
  std::vector<TransactionRecord> records;  // truncated at min(C, eta)
  std::vector<TransactionRecord> full;
  std::vector<double> inconsistent_from;
};

Portfolio simulate_portfolio(const ScenarioConfig& cfg, int threads = 1);
Portfolio simulate_portfolio_serial(const ScenarioConfig& cfg);

// Value at t of observed payments after t.
double future_observed_value(const TransactionRecord& full, const PaymentSpec& spec, const InterestCurve& curve,
                             double t, const Numerics& num = {});

enum class OracleMode { Match, Paired };

struct OracleQuery {
  Category category = Category::CBNR;
  double t = 1.0;
  OracleMode mode = OracleMode::Match;
  // match mode, RBNS only: summary of the reference record
  bool match_summary = false;
  double G = 0.0, W = 0.0;
  int z1 = 0;
  bool prior_rejection = false;
  int age = -1;     // filter on integer age at origin
  int gender = -1;  // 0 = M, 1 = F
  double tolerance = 1.0 / 365.0;
  long target_accepted = 100000;
  long max_simulated = 50000000;
  long block = 4096;
};

struct OracleResult {
  double estimate = 0.0;  // mean P(t) (match) or mean P(t) - V(t) (paired)
  double std_error = 0.0;
  double mean_reserve = 0.0;  // paired mode: mean V(t) over accepted paths
  long accepted = 0;
  long simulated = 0;
};

// Brute-force conditional expectation of the future observed cash flow; deterministic for any thread count.
OracleResult mc_reserve_oracle(const ScenarioConfig& cfg, const OracleQuery& q, const ReserveEngine* engine = nullptr,
                               int threads = 1);

struct RunoffConfig {
  double start = 0.0;      // first snapshot date
  double period = 1.0 / 12.0;
  int periods = 24;
  double band = 3.0;       // flat iff |mean z| sqrt(M) <= band
};

struct RunoffPeriod {
  int period = 0;
  double t = 0.0;
  double payments = 0.0;      // paid in (t_{m-1}, t_m], valued at t_{m-1}
  double payments_cum = 0.0;  // paid in (start, t_m], valued at start
  double reserve_cbnr = 0.0, reserve_rbnsi = 0.0, reserve_rbnsr = 0.0;
  double increment = 0.0;
  double se = 0.0;
  double discount = 1.0;  // value at start of one unit paid at t
};

struct RunoffReport {
  std::vector<RunoffPeriod> rows;
  double mean_z = 0.0;
  double statistic = 0.0;  // |mean z| sqrt(M)
  bool flat = true;
};

// Back-test of the reserves along full simulated records.
RunoffReport runoff_validate(const std::vector<TransactionRecord>& full, const ReserveEngine& engine,
                             const RunoffConfig& cfg, int threads = 1);

}  // namespace reng

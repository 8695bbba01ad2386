#pragma once
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "reng/hazard.hpp"
#include "reng/rng.hpp"

namespace reng {

enum class State { a = 0, i = 1, r = 2, d = 3 };

State parse_state(const std::string& s);
const char* state_name(State s);

struct StateDuration {
  double time = 0.0;
  State state = State::a;
  double duration = 0.0;
};

struct HazardSet {
  std::optional<LogLinearHazard> ai, ad, ir, id, rd;

  const std::optional<LogLinearHazard>& get(State from, State to) const;
  std::optional<LogLinearHazard>& get(State from, State to);
  double rate(State from, State to, double t, double u, const CovariateVector& cov) const;
  void validate() const;
};

json hazard_set_to_json(const HazardSet& h);
HazardSet hazard_set_from_json(const json& j);

struct TransitionRow {
  std::array<double, 4> p{0.0, 0.0, 0.0, 0.0};
  double operator[](State k) const { return p[static_cast<int>(k)]; }
  double alive() const { return p[0] + p[1] + p[2]; }
};

TransitionRow transition_row(const StateDuration& from, double t, const HazardSet& hz,
                             const CovariateVector& cov, const Numerics& num = {});
double transition_probability(const StateDuration& from, State k, double t, const HazardSet& hz,
                              const CovariateVector& cov, const Numerics& num = {});
double conditional_hazard(const StateDuration& from, State k, double t, const HazardSet& hz,
                          const CovariateVector& cov, const Numerics& num = {});

struct Jump {
  double time = 0.0;
  State to = State::d;
};

struct JumpPath {
  CovariateVector cov;
  std::vector<Jump> jumps;
  double horizon = 0.0;

  StateDuration at(double t) const;  // right-continuous
  std::optional<double> first_entry(State s) const;
  double death_time() const;  // +inf when alive through horizon
  void validate() const;
};

// Competing log-linear hazards sharing one clock; used for sojourn sampling.
struct CompetingRisks {
  std::vector<LogLinearHazard::Decomposed> hazards;
  std::vector<int> labels;

  void add(const LogLinearHazard& h, const CovariateVector& cov, int label);
  bool empty() const { return hazards.empty(); }
  double total(double t, double u) const;
  double cumulative(double t0, double t1, double u0) const;
};

struct SojournDraw {
  double time;
  int label;
};

// Inverts the sojourn survival function; nullopt when no jump before t_max.
std::optional<SojournDraw> sample_sojourn(const CompetingRisks& cr, double t0, double u0,
                                          double t_max, CounterRng& rng, double tol = 1e-8);

JumpPath simulate_path(const CovariateVector& cov, const HazardSet& hz, double horizon,
                       CounterRng& rng, const Numerics& num = {});
JumpPath simulate_path(const CovariateVector& cov, const HazardSet& hz, double horizon,
                       std::uint64_t seed, const Numerics& num = {});
// Path that is in `from` at from.time (earlier jumps synthesized from the duration),
// continued to the horizon.
JumpPath simulate_from(const StateDuration& from, const CovariateVector& cov, const HazardSet& hz,
                       double horizon, CounterRng& rng, const Numerics& num = {});
// Continues `path` from time t in its current state until death or horizon.
void continue_path(JumpPath& path, double t, const HazardSet& hz, CounterRng& rng, const Numerics& num = {});

// Integral over uniformly spaced samples, fourth order for any panel count >= 2.
double integrate_samples(const double* y, size_t count, double dx);

}  // namespace reng

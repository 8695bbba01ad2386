#include "reng/valid_time.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

namespace reng {

State parse_state(const std::string& s) {
  if (s == "a") return State::a;
  if (s == "i") return State::i;
  if (s == "r") return State::r;
  if (s == "d") return State::d;
  throw InvalidArgument("unknown valid-time state '" + s + "'");
}

const char* state_name(State s) {
  static const char* names[] = {"a", "i", "r", "d"};
  return names[static_cast<int>(s)];
}

namespace {

std::optional<LogLinearHazard> HazardSet::*slot(State from, State to) {
  if (from == State::a && to == State::i) return &HazardSet::ai;
  if (from == State::a && to == State::d) return &HazardSet::ad;
  if (from == State::i && to == State::r) return &HazardSet::ir;
  if (from == State::i && to == State::d) return &HazardSet::id;
  if (from == State::r && to == State::d) return &HazardSet::rd;
  throw InvalidArgument(std::string("illegal valid-time transition ") + state_name(from) + "->" +
                        state_name(to));
}

const std::optional<LogLinearHazard> kNone;

}  // namespace

const std::optional<LogLinearHazard>& HazardSet::get(State from, State to) const {
  return this->*slot(from, to);
}

std::optional<LogLinearHazard>& HazardSet::get(State from, State to) { return this->*slot(from, to); }

double HazardSet::rate(State from, State to, double t, double u, const CovariateVector& cov) const {
  const auto& h = get(from, to);
  return h ? (*h)(t, u, cov) : 0.0;
}

void HazardSet::validate() const {
  const std::pair<State, State> edges[] = {
      {State::a, State::i}, {State::a, State::d}, {State::i, State::r}, {State::i, State::d}, {State::r, State::d}};
  for (auto [f, t] : edges) {
    const auto& h = get(f, t);
    if (h && (h->origin != state_name(f) || h->target != state_name(t)))
      throw ConfigError("hazard slot " + std::string(state_name(f)) + "->" + state_name(t) +
                        " holds a " + h->origin + "->" + h->target + " hazard");
  }
}

json hazard_set_to_json(const HazardSet& h) {
  json out = json::array();
  for (const auto* p : {&h.ai, &h.ad, &h.ir, &h.id, &h.rd})
    if (*p) out.push_back(hazard_to_json(**p));
  return out;
}

HazardSet hazard_set_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("valid-time hazards: expected an array");
  HazardSet hs;
  for (const auto& jh : j) {
    auto h = hazard_from_json(jh);
    State f, t;
    try {
      f = parse_state(h.origin);
      t = parse_state(h.target);
      auto& s = hs.get(f, t);
      if (s) throw ConfigError("duplicate valid-time hazard " + h.origin + "->" + h.target);
      s = std::move(h);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  return hs;
}

double integrate_samples(const double* y, size_t count, double dx) {
  if (count < 2) return 0.0;
  const size_t n = count - 1;
  if (n == 1) return 0.5 * dx * (y[0] + y[1]);
  auto simpson_part = [&](size_t m) {
    double s = y[0] + y[m];
    for (size_t k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * y[k];
    return s * dx / 3.0;
  };
  if (n % 2 == 0) return simpson_part(n);
  double s = n > 3 ? simpson_part(n - 3) : 0.0;
  s += 3.0 * dx * (y[n - 3] + 3.0 * y[n - 2] + 3.0 * y[n - 1] + y[n]) / 8.0;
  return s;
}

namespace {

struct Decomp {
  std::optional<LogLinearHazard::Decomposed> ai, ad, ir, id, rd;
  Decomp(const HazardSet& hz, const CovariateVector& cov) {
    if (hz.ai) ai = hz.ai->decompose(cov);
    if (hz.ad) ad = hz.ad->decompose(cov);
    if (hz.ir) ir = hz.ir->decompose(cov);
    if (hz.id) id = hz.id->decompose(cov);
    if (hz.rd) rd = hz.rd->decompose(cov);
  }
  static double val(const std::optional<LogLinearHazard::Decomposed>& d, double t, double u) {
    return d ? hazard_value(*d, t, u) : 0.0;
  }
  static double cum(const std::optional<LogLinearHazard::Decomposed>& d, double t0, double t1, double u0) {
    return d ? cumulative_hazard_exact(*d, t0, t1, u0) : 0.0;
  }
  double surv_a(double s, double v) const { return std::exp(-cum(ai, s, v, s) - cum(ad, s, v, s)); }
  double surv_i(double s, double v, double u0) const {
    return std::exp(-cum(ir, s, v, u0) - cum(id, s, v, u0));
  }
  double surv_r(double s, double v, double u0) const { return std::exp(-cum(rd, s, v, u0)); }
};

// Piecewise-uniform grid with kinks as nodes; each piece has an even panel count.
struct Grid {
  std::vector<double> v;
  std::vector<size_t> seg_start;  // node index where each piece begins
  std::vector<double> seg_dx;

  Grid(double s, double t, double h, std::vector<double> kinks) {
    kinks.push_back(t);
    std::sort(kinks.begin(), kinks.end());
    v.push_back(s);
    double a = s;
    for (double b : kinks) {
      if (!(b > a + 1e-9) || b > t) continue;
      long n = std::max<long>(2, static_cast<long>(std::ceil((b - a) / h - 1e-9)));
      if (n % 2) ++n;
      seg_start.push_back(v.size() - 1);
      seg_dx.push_back((b - a) / n);
      for (long m = 1; m <= n; ++m) v.push_back(m == n ? b : a + (b - a) * m / n);
      a = b;
    }
  }
  size_t n() const { return v.size() - 1; }

  // Integral from node 0 to node m.
  double integrate(const double* y, size_t m) const {
    double total = 0.0;
    for (size_t k = 0; k < seg_start.size(); ++k) {
      const size_t a = seg_start[k];
      if (a >= m) break;
      const size_t b = k + 1 < seg_start.size() ? std::min(seg_start[k + 1], m) : m;
      total += integrate_samples(y + a, b - a + 1, seg_dx[k]);
    }
    return total;
  }
};

std::vector<double> duration_kinks(const HazardSet& hz, std::initializer_list<std::pair<State, State>> edges,
                                   double s, double t, double u0) {
  std::vector<double> out;
  for (auto [f, to] : edges) {
    const auto& h = hz.get(f, to);
    if (!h) continue;
    for (const auto& term : h->terms)
      if (term.kind == Regressor::DurationCapped && std::isfinite(term.cap)) {
        const double k = s + term.cap - u0;
        if (k > s && k < t) out.push_back(k);
      }
  }
  return out;
}

// Death flux from r for entries distributed with density e_r on the grid.
double r_death_mass(const Decomp& D, const Grid& g, const std::vector<double>& e_r) {
  const auto& v = g.v;
  const size_t n = g.n();
  std::vector<double> outer(n + 1, 0.0), inner(n + 1);
  for (size_t m = 1; m <= n; ++m) {
    for (size_t x = 0; x <= m; ++x)
      inner[x] = e_r[x] * D.surv_r(v[x], v[m], 0.0) * Decomp::val(D.rd, v[m], v[m] - v[x]);
    outer[m] = g.integrate(inner.data(), m);
  }
  return g.integrate(outer.data(), n);
}

}  // namespace

TransitionRow transition_row(const StateDuration& from, double t, const HazardSet& hz,
                             const CovariateVector& cov, const Numerics& num) {
  const double s = from.time, u0 = from.duration;
  if (!std::isfinite(s) || !std::isfinite(t) || !std::isfinite(u0))
    throw InvalidArgument("transition_probability: non-finite input");
  if (t < s) throw InvalidArgument("transition_probability: need from.time <= t");
  if (u0 < 0.0 || u0 > s + 1e-12) throw InvalidArgument("transition_probability: need 0 <= u <= s");
  if (from.state == State::a && std::abs(u0 - s) > 1e-9)
    throw InvalidArgument("transition_probability: duration in state a must equal time");
  TransitionRow row;
  if (from.state == State::d) {
    row.p[3] = 1.0;
    return row;
  }
  const Decomp D(hz, cov);
  if (t == s) {
    row.p[static_cast<int>(from.state)] = 1.0;
    return row;
  }
  std::vector<double> kinks;
  if (from.state == State::r) kinks = duration_kinks(hz, {{State::r, State::d}}, s, t, u0);
  if (from.state == State::i) kinks = duration_kinks(hz, {{State::i, State::r}, {State::i, State::d}}, s, t, u0);
  if (from.state == State::a) kinks = duration_kinks(hz, {{State::a, State::i}, {State::a, State::d}}, s, t, u0);
  const Grid g(s, t, num.simpson_step, kinks);
  const auto& v = g.v;
  const size_t n = g.n();
  std::vector<double> y(n + 1), inner(n + 1);

  if (from.state == State::r) {
    row.p[2] = D.surv_r(s, t, u0);
    for (size_t m = 0; m <= n; ++m)
      y[m] = D.surv_r(s, v[m], u0) * Decomp::val(D.rd, v[m], u0 + v[m] - s);
    row.p[3] = g.integrate(y.data(), n);
    return row;
  }

  if (from.state == State::i) {
    row.p[1] = D.surv_i(s, t, u0);
    std::vector<double> e_r(n + 1);
    for (size_t m = 0; m <= n; ++m) {
      const double surv = D.surv_i(s, v[m], u0), dur = u0 + v[m] - s;
      e_r[m] = surv * Decomp::val(D.ir, v[m], dur);
      y[m] = surv * Decomp::val(D.id, v[m], dur);
    }
    const double dead_i = g.integrate(y.data(), n);
    for (size_t m = 0; m <= n; ++m) y[m] = e_r[m] * D.surv_r(v[m], t, 0.0);
    row.p[2] = g.integrate(y.data(), n);
    row.p[3] = dead_i + r_death_mass(D, g, e_r);
    return row;
  }

  // from a
  row.p[0] = D.surv_a(s, t);
  std::vector<double> e_i(n + 1), e_r(n + 1, 0.0);
  for (size_t m = 0; m <= n; ++m) {
    const double surv = D.surv_a(s, v[m]);
    e_i[m] = surv * Decomp::val(D.ai, v[m], v[m]);
    y[m] = surv * Decomp::val(D.ad, v[m], v[m]);
  }
  const double dead_a = g.integrate(y.data(), n);
  for (size_t m = 0; m <= n; ++m) y[m] = e_i[m] * D.surv_i(v[m], t, 0.0);
  row.p[1] = g.integrate(y.data(), n);

  std::vector<double> outer_d(n + 1, 0.0);
  for (size_t m = 1; m <= n; ++m) {
    for (size_t w = 0; w <= m; ++w) {
      const double surv = e_i[w] * D.surv_i(v[w], v[m], 0.0);
      inner[w] = surv * Decomp::val(D.ir, v[m], v[m] - v[w]);
      y[w] = surv * Decomp::val(D.id, v[m], v[m] - v[w]);
    }
    e_r[m] = g.integrate(inner.data(), m);
    outer_d[m] = g.integrate(y.data(), m);
  }
  const double dead_i = g.integrate(outer_d.data(), n);
  for (size_t m = 0; m <= n; ++m) y[m] = e_r[m] * D.surv_r(v[m], t, 0.0);
  row.p[2] = g.integrate(y.data(), n);
  row.p[3] = dead_a + dead_i + r_death_mass(D, g, e_r);
  return row;
}

double transition_probability(const StateDuration& from, State k, double t, const HazardSet& hz,
                              const CovariateVector& cov, const Numerics& num) {
  return transition_row(from, t, hz, cov, num)[k];
}

double conditional_hazard(const StateDuration& from, State k, double t, const HazardSet& hz,
                          const CovariateVector& cov, const Numerics& num) {
  const State j = from.state;
  if (j == State::d) throw InvalidArgument("conditional_hazard: no transitions out of d");
  const double s = from.time, u = from.duration;
  const double mu = hz.rate(j, k, s, u, cov);
  if (s >= t) return mu;
  if (k == State::d) return 0.0;
  const double den = transition_row(from, t, hz, cov, num).alive();
  if (!(den > 0.0))
    throw DegenerateConditioning("conditional_hazard: survival probability to the conditioning time is 0");
  const double num_s = transition_row({s, k, 0.0}, t, hz, cov, num).alive();
  return mu * num_s / den;
}

StateDuration JumpPath::at(double t) const {
  StateDuration x{t, State::a, t};
  for (const auto& j : jumps) {
    if (j.time > t) break;
    x.state = j.to;
    x.duration = t - j.time;
  }
  return x;
}

std::optional<double> JumpPath::first_entry(State s) const {
  for (const auto& j : jumps)
    if (j.to == s) return j.time;
  return std::nullopt;
}

double JumpPath::death_time() const {
  auto d = first_entry(State::d);
  return d ? *d : std::numeric_limits<double>::infinity();
}

void JumpPath::validate() const {
  State cur = State::a;
  double last = 0.0;
  for (const auto& j : jumps) {
    if (!(j.time > last) && !(last == 0.0 && j.time > 0.0))
      throw InvalidArgument("jump path times must be strictly increasing");
    const bool ok = (cur == State::a && (j.to == State::i || j.to == State::d)) ||
                    (cur == State::i && (j.to == State::r || j.to == State::d)) ||
                    (cur == State::r && j.to == State::d);
    if (!ok)
      throw InvalidArgument(std::string("jump path transition ") + state_name(cur) + "->" +
                            state_name(j.to) + " violates the hierarchy");
    cur = j.to;
    last = j.time;
  }
}

void CompetingRisks::add(const LogLinearHazard& h, const CovariateVector& cov, int label) {
  hazards.push_back(h.decompose(cov));
  labels.push_back(label);
}

double CompetingRisks::total(double t, double u) const {
  double s = 0.0;
  for (const auto& d : hazards) s += hazard_value(d, t, u);
  return s;
}

double CompetingRisks::cumulative(double t0, double t1, double u0) const {
  double s = 0.0;
  for (const auto& d : hazards) s += cumulative_hazard_exact(d, t0, t1, u0);
  return s;
}

std::optional<SojournDraw> sample_sojourn(const CompetingRisks& cr, double t0, double u0,
                                          double t_max, CounterRng& rng, double tol) {
  if (cr.empty() || !(t_max > t0)) return std::nullopt;
  const double e = rng.exponential();
  const double pick = rng.uniform();
  if (cr.cumulative(t0, t_max, u0) <= e) return std::nullopt;
  auto f = [&](double x) { return cr.cumulative(t0, x, u0) - e; };
  std::uintmax_t iters = 200;
  auto stop = [tol](double a, double b) { return std::abs(b - a) <= tol; };
  auto [lo, hi] = boost::math::tools::toms748_solve(f, t0, t_max, -e, cr.cumulative(t0, t_max, u0) - e,
                                                    stop, iters);
  const double t = 0.5 * (lo + hi);
  const double u = u0 + (t - t0);
  double target = pick * cr.total(t, u), acc = 0.0;
  int label = cr.labels.back();
  for (size_t k = 0; k < cr.hazards.size(); ++k) {
    acc += hazard_value(cr.hazards[k], t, u);
    if (target < acc) {
      label = cr.labels[k];
      break;
    }
  }
  return SojournDraw{t, label};
}

void continue_path(JumpPath& path, double t, const HazardSet& hz, CounterRng& rng, const Numerics& num) {
  StateDuration x = path.at(t);
  State cur = x.state;
  double entry = t - x.duration;
  while (cur != State::d) {
    CompetingRisks cr;
    auto add = [&](State to) {
      const auto& h = hz.get(cur, to);
      if (h) cr.add(*h, path.cov, static_cast<int>(to));
    };
    if (cur == State::a) {
      add(State::i);
      add(State::d);
    } else if (cur == State::i) {
      add(State::r);
      add(State::d);
    } else {
      add(State::d);
    }
    auto draw = sample_sojourn(cr, t, t - entry, path.horizon, rng, num.root_tolerance);
    if (!draw) break;
    t = draw->time;
    cur = static_cast<State>(draw->label);
    entry = t;
    path.jumps.push_back({t, cur});
  }
}

JumpPath simulate_path(const CovariateVector& cov, const HazardSet& hz, double horizon,
                       CounterRng& rng, const Numerics& num) {
  if (!(horizon > 0.0)) throw InvalidArgument("simulate_path: horizon must be positive");
  JumpPath path;
  path.cov = cov;
  path.horizon = horizon;
  continue_path(path, 0.0, hz, rng, num);
  return path;
}

JumpPath simulate_from(const StateDuration& from, const CovariateVector& cov, const HazardSet& hz,
                       double horizon, CounterRng& rng, const Numerics& num) {
  JumpPath path;
  path.cov = cov;
  path.horizon = horizon;
  const double entry = from.time - from.duration;
  switch (from.state) {
    case State::a: break;
    case State::i: path.jumps.push_back({entry, State::i}); break;
    case State::r:
      path.jumps.push_back({0.5 * entry, State::i});
      path.jumps.push_back({entry, State::r});
      break;
    case State::d: path.jumps.push_back({entry, State::d}); return path;
  }
  continue_path(path, from.time, hz, rng, num);
  return path;
}

JumpPath simulate_path(const CovariateVector& cov, const HazardSet& hz, double horizon,
                       std::uint64_t seed, const Numerics& num) {
  CounterRng rng(seed, 0, 0);
  return simulate_path(cov, hz, horizon, rng, num);
}

}  // namespace reng

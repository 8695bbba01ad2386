#include "reng/payments.hpp"

#include <algorithm>
#include <cmath>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

namespace reng {

void PaymentSpec::validate() const {
  if (!(coverage_period >= 0.0)) throw ConfigError("product.coverage_period must be >= 0");
  if (!(retirement_age > 0.0) || !std::isfinite(retirement_age))
    throw ConfigError("product.retirement_age must be positive");
  if (!(annuity_rate >= 0.0) || !std::isfinite(annuity_rate))
    throw ConfigError("product.annuity_rate must be >= 0");
  if (!(qualifying_period >= 0.0)) throw ConfigError("product.qualifying_period must be >= 0");
  if (!std::isfinite(premium_rate) || !std::isfinite(reactivated_rate))
    throw ConfigError("product rates must be finite");
  for (const auto& l : lump_sums) {
    const bool legal = (l.from == State::a && (l.to == State::i || l.to == State::d)) ||
                       (l.from == State::i && (l.to == State::r || l.to == State::d)) ||
                       (l.from == State::r && l.to == State::d);
    if (!legal) throw ConfigError("product.lump_sums: illegal transition");
    if (!std::isfinite(l.amount)) throw ConfigError("product.lump_sums: non-finite amount");
  }
}

double PaymentSpec::horizon(const CovariateVector& cov, const Numerics& num) const {
  return std::max(0.0, std::min(retirement_age, num.omega) - cov.age_at_origin);
}

double PaymentSpec::rate(State j, double t, double u, double horizon) const {
  if (t >= horizon) return 0.0;
  switch (j) {
    case State::a: return t < coverage_period ? -premium_rate : 0.0;
    case State::i: return disability_rate(t, u, covered_onset(t - u), horizon);
    case State::r: return reactivated_rate;
    case State::d: return 0.0;
  }
  return 0.0;
}

double PaymentSpec::disability_rate(double t, double u, bool covered, double horizon) const {
  return t < horizon && covered && u >= qualifying_period ? annuity_rate : 0.0;
}

double PaymentSpec::lump(State j, State k, double t, double /*u*/, double horizon) const {
  if (t >= horizon) return 0.0;
  double total = 0.0;
  for (const auto& l : lump_sums)
    if (l.from == j && l.to == k) total += l.amount;
  if (j == State::a && k == State::i && !covered_onset(t)) return 0.0;
  return total;
}

bool PaymentSpec::pays_in(State j) const {
  switch (j) {
    case State::a: return premium_rate != 0.0 && coverage_period > 0.0;
    case State::i: return annuity_rate != 0.0;
    case State::r: return reactivated_rate != 0.0;
    case State::d: return false;
  }
  return false;
}

bool PaymentSpec::pays_from(State j) const {
  auto lumps_from = [&](State s) {
    return std::any_of(lump_sums.begin(), lump_sums.end(),
                       [&](const LumpSum& l) { return l.from == s && l.amount != 0.0; });
  };
  switch (j) {
    case State::r: return pays_in(State::r) || lumps_from(State::r);
    case State::i: return pays_in(State::i) || lumps_from(State::i) || pays_from(State::r);
    case State::a: return pays_in(State::a) || lumps_from(State::a) || pays_from(State::i);
    case State::d: return false;
  }
  return false;
}

json payment_spec_to_json(const PaymentSpec& p) {
  json lumps = json::array();
  for (const auto& l : p.lump_sums)
    lumps.push_back({{"from", state_name(l.from)}, {"to", state_name(l.to)}, {"amount", l.amount}});
  json out{{"annuity_rate", p.annuity_rate},
           {"qualifying_period", p.qualifying_period},
           {"retirement_age", p.retirement_age},
           {"premium_rate", p.premium_rate},
           {"reactivated_rate", p.reactivated_rate},
           {"lump_sums", lumps}};
  if (std::isfinite(p.coverage_period)) out["coverage_period"] = p.coverage_period;
  return out;
}

PaymentSpec payment_spec_from_json(const json& j) {
  check_keys(j, {"annuity_rate", "coverage_period", "qualifying_period", "retirement_age", "premium_rate",
                 "reactivated_rate", "lump_sums"},
             "product");
  PaymentSpec p;
  p.annuity_rate = get_or(j, "annuity_rate", p.annuity_rate);
  p.coverage_period = get_or(j, "coverage_period", p.coverage_period);
  p.qualifying_period = get_or(j, "qualifying_period", p.qualifying_period);
  p.retirement_age = get_or(j, "retirement_age", p.retirement_age);
  p.premium_rate = get_or(j, "premium_rate", p.premium_rate);
  p.reactivated_rate = get_or(j, "reactivated_rate", p.reactivated_rate);
  if (j.contains("lump_sums")) {
    for (const auto& l : j.at("lump_sums")) {
      check_keys(l, {"from", "to", "amount"}, "product.lump_sums");
      try {
        p.lump_sums.push_back({parse_state(get_req<std::string>(l, "from", "lump_sums")),
                               parse_state(get_req<std::string>(l, "to", "lump_sums")),
                               get_req<double>(l, "amount", "lump_sums")});
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  p.validate();
  return p;
}

double stream_value(const PaymentSpec& spec, const InterestCurve& curve, State j, double entry,
                    double from, double to, double ref, double horizon) {
  to = std::min(to, horizon);
  if (!(to > from) || !spec.pays_in(j)) return 0.0;
  std::vector<double> cuts{from, to};
  if (j == State::a) cuts.push_back(spec.coverage_period);
  if (j == State::i) cuts.push_back(entry + spec.qualifying_period);
  std::erase_if(cuts, [&](double c) { return !(c >= from && c <= to); });
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    if (!(b > a)) continue;
    const double mid = 0.5 * (a + b);
    const double r = spec.rate(j, mid, mid - entry, horizon);
    if (r != 0.0) total += r * curve.annuity(a, b, ref);
  }
  return total;
}

namespace {

// Walks the path's sojourns; f(state, entry, exit) and lump(j, k, time, duration).
template <class Seg, class Lump>
void walk(const JumpPath& path, double end, Seg&& seg, Lump&& lump) {
  State cur = State::a;
  double entry = 0.0;
  for (const auto& jmp : path.jumps) {
    seg(cur, entry, std::min(jmp.time, end));
    if (jmp.time > end) return;
    lump(cur, jmp.to, jmp.time, jmp.time - entry);
    cur = jmp.to;
    entry = jmp.time;
  }
  seg(cur, entry, end);
}

}  // namespace

double present_value(const JumpPath& path, double t, const PaymentSpec& spec, const InterestCurve& curve,
                     const Numerics& num) {
  const double H = spec.horizon(path.cov, num);
  double pv = 0.0;
  walk(
      path, H,
      [&](State j, double entry, double exit) {
        if (exit > t) pv += stream_value(spec, curve, j, entry, std::max(entry, t), exit, t, H);
      },
      [&](State j, State k, double time, double dur) {
        if (time > t) pv += spec.lump(j, k, time, dur, H) * curve.value_factor(t, time);
      });
  return pv;
}

double accumulated_value(const JumpPath& path, double t, const PaymentSpec& spec,
                         const InterestCurve& curve, const Numerics& num) {
  const double H = spec.horizon(path.cov, num);
  double acc = 0.0;
  walk(
      path, std::min(t, H),
      [&](State j, double entry, double exit) { acc += stream_value(spec, curve, j, entry, entry, exit, t, H); },
      [&](State j, State k, double time, double dur) {
        acc += spec.lump(j, k, time, dur, H) * curve.value_factor(t, time);
      });
  return acc;
}

}  // namespace reng

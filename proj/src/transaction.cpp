#include "reng/transaction.hpp"

#include <algorithm>
#include <sstream>

#include "reng/errors.hpp"

namespace reng {

namespace {

constexpr double kTimeTol = 1e-9;

struct EventName {
  EventType type;
  const char* name;
};
constexpr EventName kEventNames[] = {
    {EventType::ReportClaim, "ReportClaim"},   {EventType::AdjudicationMove, "AdjudicationMove"},
    {EventType::StartPayout, "StartPayout"},   {EventType::StopPayout, "StopPayout"},
    {EventType::AwardBackpay, "AwardBackpay"}, {EventType::Death, "Death"},
};

bool is_edge(int from, int to) {
  switch (from) {
    case 1: return to == 2 || to == 5;
    case 2: return to == 3 || to == 4 || to == 5;
    case 3: return to == 2 || to == 5;
    case 4: return to == 2 || to == 3 || to == 5;
    default: return false;
  }
}

[[noreturn]] void malformed(const TransactionRecord& rec, size_t k, const std::string& why) {
  const Event& e = rec.events[k];
  std::ostringstream os;
  os << "policy " << rec.policy.id << ": event " << k << " (" << event_type_name(e.type) << " at " << e.time
     << "): " << why;
  throw MalformedRecord(os.str());
}

class Replayer {
 public:
  explicit Replayer(const TransactionRecord& rec) : rec_(rec) {}

  const EligibilityState& state() const { return s_; }

  // Applies event k; returns false when it lies after t.
  bool apply(size_t k, double t) {
    const Event& e = rec_.events[k];
    if (e.time > t) return false;
    if (!std::isfinite(e.time) || e.time < 0.0) malformed(rec_, k, "invalid time");
    if (e.time < s_.last_event - kTimeTol) malformed(rec_, k, "event times must be non-decreasing");
    advance(e.time);
    const bool same_time = std::abs(e.time - move_time_) <= kTimeTol;
    switch (e.type) {
      case EventType::ReportClaim:
        if (s_.z1 != 1) malformed(rec_, k, s_.has_claim() ? "only one claim per policy is supported" : "no report from this state");
        if (!std::isfinite(e.claimed_onset) || e.claimed_onset < 0.0)
          malformed(rec_, k, "claimed onset missing or negative");
        if (e.claimed_onset > e.time + kTimeTol) malformed(rec_, k, "claimed onset after report");
        if (e.claimed_onset < rec_.policy.V - kTimeTol) malformed(rec_, k, "claimed onset before truncation time");
        s_.z2 = e.claimed_onset;
        s_.G = e.claimed_onset;
        s_.report_time = e.time;
        move(2, e.time, k);
        break;
      case EventType::AdjudicationMove:
        if (e.adj_from != s_.z1) malformed(rec_, k, "move does not start in the current state");
        if (e.adj_to == 5) malformed(rec_, k, "use Death for moves into state 5");
        if (e.adj_from == 1) malformed(rec_, k, "use ReportClaim for moves out of state 1");
        if (!is_edge(e.adj_from, e.adj_to)) malformed(rec_, k, "transition not allowed");
        if (e.adj_to == 4) {
          start_payout(e.time, k);
        } else {
          if (e.adj_to == 3 && s_.W == 0.0 && s_.z1 == 2) s_.prior_rejection = true;
          move(e.adj_to, e.time, k);
        }
        break;
      case EventType::StartPayout:
        if (s_.z1 != 2) malformed(rec_, k, "payout can only start from state 2");
        start_payout(e.time, k);
        break;
      case EventType::StopPayout:
        if (s_.z1 != 4) malformed(rec_, k, "no payout running");
        if (e.adj_to != 2 && e.adj_to != 3) malformed(rec_, k, "payout stops into state 2 or 3");
        move(e.adj_to, e.time, k);
        break;
      case EventType::AwardBackpay: {
        if (!same_time || !(last_from_ == 2 && (s_.z1 == 3 || s_.z1 == 4 || s_.z1 == 5)))
          malformed(rec_, k, "backpay must accompany a move out of state 2 at the same time");
        if (backpay_done_) malformed(rec_, k, "duplicate backpay for one move");
        if (!(std::abs(e.eligible_from - g_before_) <= kTimeTol)) malformed(rec_, k, "window must start at G");
        if (!(e.eligible_to >= e.eligible_from)) malformed(rec_, k, "window end before start");
        if (s_.z1 == 4) {
          if (std::abs(e.eligible_to - e.time) > kTimeTol) malformed(rec_, k, "payout award must close the full gap");
        } else {
          if (!(e.eligible_to < e.time - kTimeTol)) malformed(rec_, k, "window must end before the move");
          s_.G = e.eligible_to;
        }
        backpay_done_ = true;
        break;
      }
      case EventType::Death:
        if (s_.z1 == 5) malformed(rec_, k, "already dead");
        move(5, e.time, k);
        s_.death_time = e.time;
        break;
    }
    s_.W = s_.has_claim() ? std::max(0.0, s_.G - s_.z2) : 0.0;
    return true;
  }

  // Lets G run in payout up to t.
  void advance(double t) {
    if (s_.z1 == 4 && t > s_.last_event) s_.G = t;
    if (s_.has_claim()) s_.W = std::max(0.0, s_.G - s_.z2);
    s_.last_event = std::max(s_.last_event, t);
  }

 private:
  void move(int to, double time, size_t) {
    last_from_ = s_.z1;
    g_before_ = s_.G;
    move_time_ = time;
    backpay_done_ = false;
    s_.z1 = to;
  }
  void start_payout(double time, size_t k) {
    if (!(time > s_.z2)) malformed(rec_, k, "payout must start after the claimed onset");
    move(4, time, k);
    s_.G = time;
  }

  const TransactionRecord& rec_;
  EligibilityState s_;
  int last_from_ = 0;
  double g_before_ = 0.0;
  double move_time_ = -1.0;
  bool backpay_done_ = false;
};

}  // namespace

EventType parse_event_type(const std::string& s) {
  for (const auto& e : kEventNames)
    if (s == e.name) return e.type;
  throw MalformedRecord("unknown event type: " + s);
}

const char* event_type_name(EventType e) {
  for (const auto& n : kEventNames)
    if (n.type == e) return n.name;
  return "?";
}

const char* category_name(Category c) {
  switch (c) {
    case Category::CBNR: return "CBNR";
    case Category::RBNSi: return "RBNSi";
    case Category::RBNSr: return "RBNSr";
    case Category::Settled: return "Settled";
  }
  return "?";
}

EligibilityState derive_eligibility(const TransactionRecord& rec, double t) {
  if (t > rec.as_of + kTimeTol) throw InvalidArgument("derive_eligibility: t after as_of");
  Replayer rp(rec);
  for (size_t k = 0; k < rec.events.size(); ++k)
    if (!rp.apply(k, t)) break;
  rp.advance(t);
  return rp.state();
}

void validate_record(const TransactionRecord& rec) {
  rec.policy.cov.validate();
  for (size_t k = 0; k < rec.events.size(); ++k)
    if (rec.events[k].time > rec.as_of + kTimeTol) malformed(rec, k, "event after as_of");
  derive_eligibility(rec, rec.as_of);
}

Category categorize(const EligibilityState& e) {
  if (e.z1 == 5) return Category::Settled;
  if (e.z1 == 1) return Category::CBNR;
  return e.W > 0.0 ? Category::RBNSr : Category::RBNSi;
}

Category categorize(const TransactionRecord& rec, double t) { return categorize(derive_eligibility(rec, t)); }

TransactionRecord truncate(const TransactionRecord& rec, double t) {
  TransactionRecord out{rec.policy, {}, std::min(t, rec.as_of)};
  for (const auto& e : rec.events)
    if (e.time <= t) out.events.push_back(e);
  return out;
}

JumpPath belief_path(const EligibilityState& e, const CovariateVector& cov, double t, double horizon) {
  JumpPath p{cov, {}, horizon};
  if (e.W > 0.0) {
    p.jumps.push_back({e.z2, State::i});
    if (e.z1 != 4 && e.G <= t && e.G < e.death_time) p.jumps.push_back({e.G, State::r});
  }
  if (e.death_time <= t) p.jumps.push_back({e.death_time, State::d});
  return p;
}

double Cashflow::value(const PaymentSpec& spec, const InterestCurve& curve, double horizon, double ref,
                       double from, double to) const {
  double v = 0.0;
  for (const auto& [time, amount] : lumps)
    if (time > from && time <= to) v += amount * curve.value_factor(ref, time);
  for (const auto& s : running) {
    const double a = std::max(s.from, from), b = std::min(s.to, to);
    if (b > a) v += stream_value(spec, curve, s.state, s.entry, a, b, ref, horizon);
  }
  return v;
}

Cashflow observed_cashflow(const TransactionRecord& rec, const PaymentSpec& spec, const InterestCurve& curve,
                           const Numerics& num, double until) {
  if (std::isnan(until)) until = rec.as_of;
  const auto& cov = rec.policy.cov;
  const double H = spec.horizon(cov, num);
  Cashflow cf;
  Replayer rp(rec);
  JumpPath believed = belief_path(rp.state(), cov, 0.0, H);
  double seg_start = 0.0;
  auto close_segment = [&](double end) {
    end = std::min(end, H);
    if (end <= seg_start) return;
    const StateDuration sd = believed.at(seg_start);
    if (sd.state != State::d && spec.pays_in(sd.state))
      cf.running.push_back({seg_start, end, sd.state, seg_start - sd.duration});
    seg_start = std::max(seg_start, end);
  };
  size_t k = 0;
  while (k < rec.events.size() && rec.events[k].time <= until) {
    const double tau = rec.events[k].time;
    close_segment(tau);
    while (k < rec.events.size() && rec.events[k].time <= tau + kTimeTol) {
      if (!rp.apply(k, until)) break;
      ++k;
    }
    const double before = accumulated_value(believed, tau, spec, curve, num);
    believed = belief_path(rp.state(), cov, tau, H);
    const double after = accumulated_value(believed, tau, spec, curve, num);
    const double lump = after - before;
    if (lump != 0.0 && tau <= H) cf.lumps.emplace_back(tau, lump);
  }
  close_segment(until);
  return cf;
}

}  // namespace reng

#pragma once
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "reng/payments.hpp"

namespace reng {

enum class EventType { ReportClaim, AdjudicationMove, StartPayout, StopPayout, AwardBackpay, Death };

EventType parse_event_type(const std::string& s);
const char* event_type_name(EventType e);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Event {
  double time = 0.0;
  EventType type = EventType::Death;
  double claimed_onset = kNaN;
  int adj_from = 0, adj_to = 0;
  double eligible_from = kNaN, eligible_to = kNaN;

  static Event report(double t, double onset) { return {t, EventType::ReportClaim, onset}; }
  static Event move(double t, int from, int to) { return {t, EventType::AdjudicationMove, kNaN, from, to}; }
  static Event start(double t) { return {t, EventType::StartPayout}; }
  static Event stop(double t, int to) { return {t, EventType::StopPayout, kNaN, 4, to}; }
  static Event backpay(double t, double from, double to) {
    return {t, EventType::AwardBackpay, kNaN, 0, 0, from, to};
  }
  static Event death(double t) { return {t, EventType::Death}; }
};

struct Policy {
  std::string id;
  CovariateVector cov;
  double V = 0.0;  // left truncation time
  double C = std::numeric_limits<double>::infinity();  // right censoring time
};

struct TransactionRecord {
  Policy policy;
  std::vector<Event> events;
  double as_of = 0.0;
};

enum class Category { CBNR, RBNSi, RBNSr, Settled };
const char* category_name(Category c);

struct EligibilityState {
  double G = 0.0;
  double W = 0.0;
  double z2 = kNaN;  // claimed onset, NaN without a claim
  int z1 = 1;
  double report_time = kNaN;
  bool prior_rejection = false;  // state 3 visited before any award
  double death_time = std::numeric_limits<double>::infinity();
  double last_event = 0.0;

  bool has_claim() const { return !std::isnan(z2); }
};

// Replays events up to and including time t; throws MalformedRecord naming the event.
EligibilityState derive_eligibility(const TransactionRecord& rec, double t);
void validate_record(const TransactionRecord& rec);
Category categorize(const TransactionRecord& rec, double t);
Category categorize(const EligibilityState& e);

TransactionRecord truncate(const TransactionRecord& rec, double t);

// Valid-time path believed at time t (H^t), extended unchanged beyond t.
JumpPath belief_path(const EligibilityState& e, const CovariateVector& cov, double t, double horizon);

struct RunningSegment {
  double from, to;
  State state;
  double entry;
};

struct Cashflow {
  std::vector<std::pair<double, double>> lumps;  // (time, amount)
  std::vector<RunningSegment> running;
  // value at ref of payments in (from, to]
  double value(const PaymentSpec& spec, const InterestCurve& curve, double horizon, double ref, double from,
               double to) const;
};

// Observed payments through `until` (default: the record's as_of).
Cashflow observed_cashflow(const TransactionRecord& rec, const PaymentSpec& spec, const InterestCurve& curve,
                           const Numerics& num = {}, double until = kNaN);

}  // namespace reng

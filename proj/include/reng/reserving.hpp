#pragma once
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "reng/adjudication.hpp"
#include "reng/delay.hpp"
#include "reng/thiele.hpp"

namespace reng {

struct ModelParameters {
  HazardSet hazards;
  AdjudicationHazards adjudication;
  ReportingDelay delay;
};

json numerics_to_json(const Numerics& n);
Numerics numerics_from_json(const json& j);

json model_parameters_to_json(const ModelParameters& p);
ModelParameters model_parameters_from_json(const json& j);

struct ReserveComponents {
  std::optional<double> cbni_term, ibnr_term, award_term, reject_term, premium_adjustment;
  double sum() const;
};

struct ReserveBreakdown {
  std::string policy_id;
  double t = 0.0;
  Category category = Category::CBNR;
  double total = 0.0;
  ReserveComponents components;
  std::string inputs_digest;
};

struct CategorySummary {
  long count = 0;
  double proposed = 0.0;
  double naive = 0.0;
  double difference() const { return proposed - naive; }
  double relative_difference() const { return naive != 0.0 ? 100.0 * difference() / naive : 0.0; }
};

struct PortfolioReport {
  double t = 0.0;
  std::map<Category, CategorySummary> by_category;  // all four categories present
  std::vector<ReserveBreakdown> policies;
  std::vector<double> naive;
  CategorySummary total() const;
};

std::string fnv1a_hex(const std::string& text);

// Transaction-time reserves with per-class caches of valid-time reserve grids.
class ReserveEngine {
 public:
  ReserveEngine(ModelParameters params, PaymentSpec spec, InterestCurve curve, Numerics num = {});

  ReserveBreakdown reserve(const TransactionRecord& rec, double t) const;
  ReserveBreakdown cbnr_reserve(const TransactionRecord& rec, double t) const;
  ReserveBreakdown rbnsi_reserve(const TransactionRecord& rec, double t) const;
  ReserveBreakdown rbnsr_reserve(const TransactionRecord& rec, double t) const;
  double naive_reserve(const TransactionRecord& rec, double t) const;

  // Evaluates every record at t; threads <= 0 keeps the OpenMP default.
  PortfolioReport portfolio_reserve(const std::vector<TransactionRecord>& records, double t, int threads = 1) const;
  PortfolioReport portfolio_reserve_serial(const std::vector<TransactionRecord>& records, double t) const;

  const ReserveGrid& grid(const CovariateVector& cov) const;
  const ConditionalCache& cache(const CovariateVector& cov, double t) const;
  double prob_cbnr(const CovariateVector& cov, double t) const;
  std::pair<double, double> onset_split(const CovariateVector& cov, double t) const;  // (cbni, ibnr) probabilities

  const ModelParameters& params() const { return params_; }
  const PaymentSpec& spec() const { return spec_; }
  const InterestCurve& curve() const { return curve_; }
  const Numerics& numerics() const { return num_; }
  const std::string& digest() const { return digest_; }

 private:
  struct CbnrEntry {
    double prob = 1.0, cbni = 1.0, ibnr_value = 0.0;  // ibnr_value is normalized by prob
  };
  template <class T>
  struct Slot {
    std::once_flag once;
    std::unique_ptr<T> value;
  };
  template <class T, class Build>
  const T& lookup(std::map<std::string, std::unique_ptr<Slot<T>>>& m, const std::string& key, Build&& build) const;

  const CbnrEntry& cbnr_entry(const CovariateVector& cov, double t) const;
  ReserveBreakdown base(const TransactionRecord& rec, double t, Category c) const;
  EligibilityState checked(const TransactionRecord& rec, double t, Category want) const;

  ModelParameters params_;
  PaymentSpec spec_;
  InterestCurve curve_;
  Numerics num_;
  std::string digest_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::unique_ptr<Slot<ReserveGrid>>> grids_;
  mutable std::map<std::string, std::unique_ptr<Slot<ConditionalCache>>> caches_;
  mutable std::map<std::string, std::unique_ptr<Slot<CbnrEntry>>> cbnr_;
};

std::string class_key(const CovariateVector& cov);

}  // namespace reng

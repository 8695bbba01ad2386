#pragma once
#include <array>
#include <optional>

#include "reng/transaction.hpp"

namespace reng {

// Edges of the adjudication chain; states 1 and 2 are transient, 3 and 5 award, 4 rejects.
struct AdjudicationBlock {
  std::optional<LogLinearHazard> w12, w21, w13, w14, w24, w15;

  const std::optional<LogLinearHazard>& get(int from, int to) const;
  std::optional<LogLinearHazard>& get(int from, int to);
  bool award_possible() const { return w13.has_value() || w15.has_value(); }
  void validate() const;
};

struct AdjudicationHazards {
  AdjudicationBlock rbnsi, rbnsr;
  bool shared = false;  // rbnsr reuses the rbnsi block

  const AdjudicationBlock& block(Category c) const;
  void validate() const;
};

json adjudication_to_json(const AdjudicationHazards& g);
AdjudicationHazards adjudication_from_json(const json& j);

// Regressors of one adjudication, read off a record at time t.
// Extras: report_lag (report time minus onset), prior_rejection (0/1), eligible_years (W).
// Duration runs from the report (RBNSi) or from G (RBNSr).
struct AdjudicationContext {
  Category category = Category::RBNSi;
  int start = 1;
  double t = 0.0;
  double anchor = 0.0;  // duration origin
  bool prior_rejection = false;
  CovariateVector cov;

  CovariateVector with_flag(bool prior) const;
};

AdjudicationContext adjudication_context(const EligibilityState& e, const CovariateVector& cov, double t);
AdjudicationContext adjudication_context(const TransactionRecord& rec, double t);

struct Occupancy {
  double t;
  double p1, p1_prior, p2;  // transient occupancy by prior-rejection flag
  double award, reject;
};

// Absorption probability in {3,5} from time ctx.t; transient mass left at the horizon counts as rejection.
double award_probability(const AdjudicationContext& ctx, const AdjudicationHazards& g, double horizon,
                         const Numerics& num = {}, std::vector<Occupancy>* trace = nullptr);

struct AdjudicationProbabilities {
  double award, reject;
};

AdjudicationProbabilities adjudication_probabilities(const TransactionRecord& rec, double t,
                                                     const AdjudicationHazards& g, const Numerics& num = {});
AdjudicationProbabilities adjudication_probabilities(const EligibilityState& e, const CovariateVector& cov,
                                                     double t, const AdjudicationHazards& g,
                                                     const Numerics& num = {});

}  // namespace reng

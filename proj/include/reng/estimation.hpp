#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "reng/reserving.hpp"

namespace reng {

struct ExposureCell {
  long policy = 0;
  int cov = 0;  // index into ExposureGrid::covariates
  int from = 0;
  int to = -1;  // target of the jump closing the cell, -1 when none
  double t0 = 0.0, t1 = 0.0;
  double u0 = 0.0;  // duration at t0
  double weight = 1.0;
  double factor = 1.0;  // exposure thinning for the jump into thinned_to
  int thinned_to = -1;
  double exposure() const { return t1 - t0; }
  double offset() const;  // log(exposure * factor)
};

struct ExposureGrid {
  std::vector<CovariateVector> covariates;
  std::vector<ExposureCell> cells;

  double total_exposure() const;
  void append(ExposureGrid&& other, long policy_shift = 0);
};

// Valid-time exposure of the paths believed at eta on (V, min(C, eta)], cut at multiples of `step`.
// States are numbered as State; no weighting or thinning.
ExposureGrid build_exposure(const std::vector<TransactionRecord>& records, double eta, double step,
                            int threads = 1);

struct EstimationConfig {
  double step = 1.0 / 12.0;
  int max_iterations = 100;
  double tolerance = 1e-10;  // relative log-likelihood change
  bool censor_adjudication_deaths = true;
  bool freeze_death = false;  // keep the death hazards of the template
  bool fit_delay_shape = true;
  bool fit_delay_age = true;
  bool fit_delay_gender = true;
  int threads = 1;
  Numerics num;
};

json estimation_config_to_json(const EstimationConfig& c);
EstimationConfig estimation_config_from_json(const json& j);

struct FitDiagnostics {
  std::string name;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool boundary = false;  // no occurrences: edge disabled
  double events = 0.0;
  double exposure = 0.0;
};

// Weighted Poisson fit of one transition by Newton steps: exposure regressors at cell midpoints, occurrence
// regressors at the jump time. The template fixes the regressors and the starting point.
// Returns nullopt with diag.boundary set when the transition has no occurrences.
std::optional<LogLinearHazard> fit_poisson(const ExposureGrid& grid, int from, int to, const LogLinearHazard& tmpl,
                                           double eta, const EstimationConfig& cfg, FitDiagnostics& diag);

struct AdjudicationFit {
  AdjudicationHazards g;
  std::vector<FitDiagnostics> diagnostics;
};

struct DelayFit {
  ReportingDelay f;
  std::vector<FitDiagnostics> diagnostics;
};

struct ValidTimeFit {
  HazardSet theta;
  std::vector<FitDiagnostics> diagnostics;
};

// Chain cells of one block; states 1..5 as in the adjudication model. Death moves are censored unless configured.
ExposureGrid build_adjudication_exposure(const std::vector<TransactionRecord>& records, double eta, Category block,
                                         const EstimationConfig& cfg);

AdjudicationFit estimate_adjudication(const std::vector<TransactionRecord>& records, double eta,
                                      const AdjudicationHazards& tmpl, const EstimationConfig& cfg = {});

// Weighted right-truncated Weibull likelihood, maximized by BFGS with central-difference gradients.
DelayFit estimate_reporting_delay(const std::vector<TransactionRecord>& records, double eta, const AdjudicationFit& g,
                                  const ReportingDelay& tmpl, const EstimationConfig& cfg = {});

// Scenario-weighted, delay-thinned exposure for the valid-time step.
ExposureGrid build_valid_time_exposure(const std::vector<TransactionRecord>& records, double eta,
                                       const AdjudicationFit& g, const DelayFit& f, const EstimationConfig& cfg);

ValidTimeFit estimate_valid_time(const std::vector<TransactionRecord>& records, double eta, const AdjudicationFit& g,
                                 const DelayFit& f, const HazardSet& tmpl, const EstimationConfig& cfg = {});

struct EstimationResult {
  ModelParameters params;
  std::vector<FitDiagnostics> diagnostics;
};

EstimationResult estimate(const std::vector<TransactionRecord>& records, double eta, const ModelParameters& tmpl,
                          const EstimationConfig& cfg = {});

// Refits on policy resamples drawn with replacement.
std::vector<ModelParameters> bootstrap(const std::vector<TransactionRecord>& records, double eta,
                                       const ModelParameters& tmpl, const EstimationConfig& cfg, int replicates,
                                       std::uint64_t seed);

std::string fit_report(const EstimationResult& r);

}  // namespace reng

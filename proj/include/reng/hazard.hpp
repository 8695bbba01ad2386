#pragma once
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "reng/numerics.hpp"

namespace reng {

using json = nlohmann::json;

enum class Gender { M, F };

Gender parse_gender(const std::string& s);
const char* gender_name(Gender g);

struct CovariateVector {
  double age_at_origin = 0.0;
  Gender gender = Gender::M;
  std::vector<std::pair<std::string, double>> extra;

  double extra_value(const std::string& name) const;
  void set_extra(const std::string& name, double value);
  void validate() const;
};

enum class Regressor { InterceptM, InterceptF, CurrentAge, DurationCapped, CalendarTime, Extra };

struct HazardTerm {
  Regressor kind = Regressor::InterceptM;
  double coefficient = 0.0;
  double cap = std::numeric_limits<double>::infinity();
  std::string name;  // extra regressor name

  std::string label() const;
};

class LogLinearHazard {
 public:
  std::string origin;
  std::string target;
  std::vector<HazardTerm> terms;
  double calendar_epoch = 0.0;

  LogLinearHazard() = default;
  LogLinearHazard(std::string from, std::string to, std::vector<HazardTerm> t)
      : origin(std::move(from)), target(std::move(to)), terms(std::move(t)) {}

  double linear_predictor(double t, double u, const CovariateVector& cov) const;
  double operator()(double t, double u, const CovariateVector& cov) const;

  // Time-invariant part, slope in t and duration pieces, for closed-form integration.
  struct Decomposed {
    double level = 0.0;
    double slope = 0.0;
    std::vector<std::pair<double, double>> duration;  // (coefficient, cap)
  };
  Decomposed decompose(const CovariateVector& cov) const;

  bool uses(Regressor r) const;
  bool uses_extra(const std::string& name) const;
};

LogLinearHazard constant_hazard(const std::string& origin, const std::string& target, double rate);

double evaluate_hazard(const LogLinearHazard& h, double t, double u, const CovariateVector& cov);

// Composite Simpson, panels split at duration-cap kinks.
double integrated_hazard(const LogLinearHazard& h, double t0, double t1, double u0,
                         const CovariateVector& cov, double step = Numerics{}.simpson_step);

// Closed-form cumulative hazard, piecewise exponential-linear between cap kinks.
double cumulative_hazard_exact(const LogLinearHazard& h, double t0, double t1, double u0,
                               const CovariateVector& cov);
double cumulative_hazard_exact(const LogLinearHazard::Decomposed& d, double t0, double t1,
                               double u0);
double hazard_value(const LogLinearHazard::Decomposed& d, double t, double u);

json hazard_to_json(const LogLinearHazard& h);
LogLinearHazard hazard_from_json(const json& j);

}  // namespace reng

#include "reng/hazard.hpp"

#include <algorithm>
#include <cmath>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

namespace reng {

void Numerics::validate() const {
  auto bad = [](double h) { return !(std::isfinite(h) && h > 0.0 && h <= 1.0); };
  if (bad(simpson_step)) throw ConfigError("numerics.simpson_step must lie in (0, 1]");
  if (bad(rk4_step)) throw ConfigError("numerics.rk4_step must lie in (0, 1]");
  if (bad(onset_step)) throw ConfigError("numerics.onset_step must lie in (0, 1]");
  if (!(std::isfinite(omega) && omega > 0.0)) throw ConfigError("numerics.omega must be positive");
  if (!(root_tolerance > 0.0 && root_tolerance < 1e-3))
    throw ConfigError("numerics.root_tolerance must lie in (0, 1e-3)");
}

std::vector<double> make_grid(double x0, double x1, double h, std::vector<double> breaks) {
  std::vector<double> out;
  if (!(x1 > x0)) return {x0};
  breaks.push_back(x0);
  breaks.push_back(x1);
  std::erase_if(breaks, [&](double b) { return !(b >= x0 && b <= x1); });
  std::sort(breaks.begin(), breaks.end());
  out.push_back(x0);
  for (size_t k = 1; k < breaks.size(); ++k) {
    double a = out.back(), b = breaks[k];
    if (b - a <= 1e-12) continue;
    long n = std::max<long>(1, static_cast<long>(std::ceil((b - a) / h - 1e-9)));
    for (long m = 1; m < n; ++m) out.push_back(a + (b - a) * m / n);
    out.push_back(b);
  }
  return out;
}

std::vector<double> cumulative_simpson(const std::vector<double>& y, double dx) {
  const size_t n = y.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  if (n == 2) {
    out[1] = 0.5 * dx * (y[0] + y[1]);
    return out;
  }
  out[1] = dx * (5.0 * y[0] + 8.0 * y[1] - y[2]) / 12.0;
  for (size_t k = 2; k < n; ++k) {
    if (k % 2 == 0) {
      out[k] = out[k - 2] + dx * (y[k - 2] + 4.0 * y[k - 1] + y[k]) / 3.0;
    } else {
      out[k] = out[k - 3] + 3.0 * dx * (y[k - 3] + 3.0 * y[k - 2] + 3.0 * y[k - 1] + y[k]) / 8.0;
    }
  }
  return out;
}

Gender parse_gender(const std::string& s) {
  if (s == "M" || s == "m") return Gender::M;
  if (s == "F" || s == "f") return Gender::F;
  throw InvalidArgument("gender must be M or F, got '" + s + "'");
}

const char* gender_name(Gender g) { return g == Gender::M ? "M" : "F"; }

double CovariateVector::extra_value(const std::string& name) const {
  for (const auto& [k, v] : extra)
    if (k == name) return v;
  throw ConfigError("hazard uses regressor '" + name + "' which the covariates do not define");
}

void CovariateVector::set_extra(const std::string& name, double value) {
  for (auto& [k, v] : extra)
    if (k == name) {
      v = value;
      return;
    }
  extra.emplace_back(name, value);
}

void CovariateVector::validate() const {
  if (!std::isfinite(age_at_origin) || age_at_origin < 0.0)
    throw InvalidArgument("age_at_origin must be finite and non-negative");
  for (size_t a = 0; a < extra.size(); ++a)
    for (size_t b = a + 1; b < extra.size(); ++b)
      if (extra[a].first == extra[b].first)
        throw InvalidArgument("duplicate extra covariate '" + extra[a].first + "'");
}

std::string HazardTerm::label() const {
  switch (kind) {
    case Regressor::InterceptM: return "intercept_M";
    case Regressor::InterceptF: return "intercept_F";
    case Regressor::CurrentAge: return "current_age";
    case Regressor::DurationCapped: return "duration_capped";
    case Regressor::CalendarTime: return "calendar_time";
    case Regressor::Extra: return name;
  }
  return name;
}

LogLinearHazard::Decomposed LogLinearHazard::decompose(const CovariateVector& cov) const {
  Decomposed d;
  for (const auto& term : terms) {
    const double c = term.coefficient;
    switch (term.kind) {
      case Regressor::InterceptM:
        if (cov.gender == Gender::M) d.level += c;
        break;
      case Regressor::InterceptF:
        if (cov.gender == Gender::F) d.level += c;
        break;
      case Regressor::CurrentAge:
        d.level += c * cov.age_at_origin;
        d.slope += c;
        break;
      case Regressor::DurationCapped:
        d.duration.emplace_back(c, term.cap);
        break;
      case Regressor::CalendarTime:
        d.level += c * calendar_epoch;
        break;
      case Regressor::Extra:
        d.level += c * cov.extra_value(term.name);
        break;
    }
  }
  return d;
}

double hazard_value(const LogLinearHazard::Decomposed& d, double t, double u) {
  double eta = d.level + d.slope * t;
  for (const auto& [c, cap] : d.duration) eta += c * std::min(u, cap);
  return std::exp(eta);
}

double LogLinearHazard::linear_predictor(double t, double u, const CovariateVector& cov) const {
  double eta = 0.0;
  for (const auto& term : terms) {
    const double c = term.coefficient;
    switch (term.kind) {
      case Regressor::InterceptM: eta += cov.gender == Gender::M ? c : 0.0; break;
      case Regressor::InterceptF: eta += cov.gender == Gender::F ? c : 0.0; break;
      case Regressor::CurrentAge: eta += c * (cov.age_at_origin + t); break;
      case Regressor::DurationCapped: eta += c * std::min(u, term.cap); break;
      case Regressor::CalendarTime: eta += c * calendar_epoch; break;
      case Regressor::Extra: eta += c * cov.extra_value(term.name); break;
    }
  }
  return eta;
}

double LogLinearHazard::operator()(double t, double u, const CovariateVector& cov) const {
  return std::exp(linear_predictor(t, u, cov));
}

bool LogLinearHazard::uses(Regressor r) const {
  return std::any_of(terms.begin(), terms.end(), [&](const HazardTerm& t) { return t.kind == r; });
}

bool LogLinearHazard::uses_extra(const std::string& name) const {
  return std::any_of(terms.begin(), terms.end(), [&](const HazardTerm& t) {
    return t.kind == Regressor::Extra && t.name == name;
  });
}

LogLinearHazard constant_hazard(const std::string& origin, const std::string& target, double rate) {
  if (!(rate > 0.0)) throw InvalidArgument("constant hazard needs a positive rate");
  const double c = std::log(rate);
  return LogLinearHazard(origin, target,
                         {{Regressor::InterceptM, c, std::numeric_limits<double>::infinity(), ""},
                          {Regressor::InterceptF, c, std::numeric_limits<double>::infinity(), ""}});
}

double evaluate_hazard(const LogLinearHazard& h, double t, double u, const CovariateVector& cov) {
  if (!std::isfinite(t) || !std::isfinite(u) || !std::isfinite(cov.age_at_origin))
    throw InvalidArgument("evaluate_hazard: non-finite input");
  if (t < 0.0 || u < 0.0 || u > t + 1e-12)
    throw InvalidArgument("evaluate_hazard: need 0 <= u <= t");
  return h(t, u, cov);
}

namespace {

std::vector<double> cap_breaks(const std::vector<double>& caps, double t0, double t1, double u0) {
  std::vector<double> out;
  for (double cap : caps) {
    const double v = t0 + cap - u0;
    if (v > t0 && v < t1) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double integrated_hazard(const LogLinearHazard& h, double t0, double t1, double u0,
                         const CovariateVector& cov, double step) {
  if (!std::isfinite(t0) || !std::isfinite(t1) || !std::isfinite(u0))
    throw InvalidArgument("integrated_hazard: non-finite input");
  if (t1 < t0) throw InvalidArgument("integrated_hazard: t1 < t0");
  if (t1 == t0) return 0.0;
  std::vector<double> caps;
  for (const auto& term : h.terms)
    if (term.kind == Regressor::DurationCapped && std::isfinite(term.cap)) caps.push_back(term.cap);
  auto pts = cap_breaks(caps, t0, t1, u0);
  pts.insert(pts.begin(), t0);
  pts.push_back(t1);
  auto f = [&](double v) { return h(v, u0 + (v - t0), cov); };
  double total = 0.0;
  for (size_t k = 0; k + 1 < pts.size(); ++k) total += simpson(f, pts[k], pts[k + 1], step);
  return total;
}

double cumulative_hazard_exact(const LogLinearHazard::Decomposed& d, double t0, double t1,
                               double u0) {
  if (t1 <= t0) return 0.0;
  std::vector<double> caps;
  for (const auto& [c, cap] : d.duration)
    if (std::isfinite(cap)) caps.push_back(cap);
  auto pts = cap_breaks(caps, t0, t1, u0);
  pts.insert(pts.begin(), t0);
  pts.push_back(t1);
  double total = 0.0;
  for (size_t k = 0; k + 1 < pts.size(); ++k) {
    const double a = pts[k], b = pts[k + 1];
    const double umid = u0 + 0.5 * (a + b) - t0;
    double beta = d.slope;
    double eta_a = d.level + d.slope * a;
    for (const auto& [c, cap] : d.duration) {
      if (umid < cap) {
        beta += c;
        eta_a += c * (u0 + a - t0);
      } else {
        eta_a += c * cap;
      }
    }
    const double len = b - a;
    const double x = beta * len;
    const double factor = std::abs(x) < 1e-300 ? len : std::expm1(x) / beta;
    total += std::exp(eta_a) * factor;
  }
  return total;
}

double cumulative_hazard_exact(const LogLinearHazard& h, double t0, double t1, double u0,
                               const CovariateVector& cov) {
  if (t1 < t0) throw InvalidArgument("cumulative hazard: t1 < t0");
  return cumulative_hazard_exact(h.decompose(cov), t0, t1, u0);
}

json hazard_to_json(const LogLinearHazard& h) {
  json terms = json::array();
  for (const auto& t : h.terms) {
    json jt{{"regressor", t.kind == Regressor::Extra ? t.name : t.label()},
            {"coefficient", t.coefficient}};
    if (t.kind == Regressor::DurationCapped && std::isfinite(t.cap)) jt["cap"] = t.cap;
    terms.push_back(jt);
  }
  json out{{"transition", {{"origin", h.origin}, {"target", h.target}}}, {"terms", terms}};
  if (h.calendar_epoch != 0.0) out["calendar_epoch"] = h.calendar_epoch;
  return out;
}

LogLinearHazard hazard_from_json(const json& j) {
  check_keys(j, {"transition", "terms", "calendar_epoch"}, "hazard");
  LogLinearHazard h;
  try {
    const auto& tr = j.at("transition");
    check_keys(tr, {"origin", "target"}, "hazard.transition");
    h.origin = tr.at("origin").get<std::string>();
    h.target = tr.at("target").get<std::string>();
    h.calendar_epoch = j.value("calendar_epoch", 0.0);
    for (const auto& jt : j.at("terms")) {
      check_keys(jt, {"regressor", "coefficient", "cap"}, "hazard term");
      HazardTerm t;
      const auto name = jt.at("regressor").get<std::string>();
      t.coefficient = jt.at("coefficient").get<double>();
      if (!std::isfinite(t.coefficient)) throw ConfigError("hazard coefficient must be finite");
      if (name == "intercept_M") t.kind = Regressor::InterceptM;
      else if (name == "intercept_F") t.kind = Regressor::InterceptF;
      else if (name == "current_age") t.kind = Regressor::CurrentAge;
      else if (name == "duration_capped" || name == "duration") t.kind = Regressor::DurationCapped;
      else if (name == "calendar_time") t.kind = Regressor::CalendarTime;
      else {
        t.kind = Regressor::Extra;
        t.name = name;
      }
      if (jt.contains("cap")) {
        if (t.kind != Regressor::DurationCapped) throw ConfigError("cap given for non-duration term");
        t.cap = jt.at("cap").get<double>();
        if (!(t.cap > 0.0)) throw ConfigError("duration cap must be positive");
      }
      h.terms.push_back(t);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("hazard JSON: ") + e.what());
  }
  return h;
}

}  // namespace reng

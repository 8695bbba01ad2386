#include "reng/reserving.hpp"

#include <cstdio>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace reng {

json numerics_to_json(const Numerics& n) {
  return {{"simpson_step", n.simpson_step},
          {"rk4_step", n.rk4_step},
          {"onset_step", n.onset_step},
          {"omega", n.omega},
          {"root_tolerance", n.root_tolerance}};
}

Numerics numerics_from_json(const json& j) {
  check_keys(j, {"simpson_step", "rk4_step", "onset_step", "omega", "root_tolerance"}, "numerics");
  Numerics n;
  n.simpson_step = get_or(j, "simpson_step", n.simpson_step);
  n.rk4_step = get_or(j, "rk4_step", n.rk4_step);
  n.onset_step = get_or(j, "onset_step", n.onset_step);
  n.omega = get_or(j, "omega", n.omega);
  n.root_tolerance = get_or(j, "root_tolerance", n.root_tolerance);
  try {
    n.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("numerics: ") + e.what());
  }
  return n;
}

json model_parameters_to_json(const ModelParameters& p) {
  return {{"valid_time", hazard_set_to_json(p.hazards)},
          {"adjudication", adjudication_to_json(p.adjudication)},
          {"reporting_delay", reporting_delay_to_json(p.delay)}};
}

ModelParameters model_parameters_from_json(const json& j) {
  check_keys(j, {"valid_time", "adjudication", "reporting_delay"}, "parameters");
  ModelParameters p;
  if (!j.contains("valid_time")) throw ConfigError("parameters: valid_time missing");
  if (!j.contains("adjudication")) throw ConfigError("parameters: adjudication missing");
  if (!j.contains("reporting_delay")) throw ConfigError("parameters: reporting_delay missing");
  p.hazards = hazard_set_from_json(j["valid_time"]);
  p.hazards.validate();
  p.adjudication = adjudication_from_json(j["adjudication"]);
  p.delay = reporting_delay_from_json(j["reporting_delay"]);
  return p;
}

double ReserveComponents::sum() const {
  double s = 0.0;
  for (const auto* c : {&cbni_term, &ibnr_term, &award_term, &reject_term, &premium_adjustment})
    if (*c) s += **c;
  return s;
}

CategorySummary PortfolioReport::total() const {
  CategorySummary out;
  for (const auto& [c, s] : by_category) {
    out.count += s.count;
    out.proposed += s.proposed;
    out.naive += s.naive;
  }
  return out;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string class_key(const CovariateVector& cov) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g|%s", cov.age_at_origin, gender_name(cov.gender));
  std::string key = buf;
  for (const auto& [name, v] : cov.extra) {
    std::snprintf(buf, sizeof buf, "|%.17g", v);
    key += "|" + name + buf;
  }
  return key;
}

ReserveEngine::ReserveEngine(ModelParameters params, PaymentSpec spec, InterestCurve curve, Numerics num)
    : params_(std::move(params)), spec_(std::move(spec)), curve_(std::move(curve)), num_(num) {
  params_.hazards.validate();
  params_.adjudication.validate();
  params_.delay.disability.validate();
  spec_.validate();
  num_.validate();
  json all{{"parameters", model_parameters_to_json(params_)},
           {"product", payment_spec_to_json(spec_)},
           {"interest", interest_to_json(curve_)}};
  digest_ = fnv1a_hex(all.dump());
}

template <class T, class Build>
const T& ReserveEngine::lookup(std::map<std::string, std::unique_ptr<Slot<T>>>& m, const std::string& key,
                               Build&& build) const {
  Slot<T>* slot;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto& p = m[key];
    if (!p) p = std::make_unique<Slot<T>>();
    slot = p.get();
  }
  std::call_once(slot->once, [&] { slot->value = build(); });
  return *slot->value;
}

const ReserveGrid& ReserveEngine::grid(const CovariateVector& cov) const {
  return lookup(grids_, class_key(cov), [&] {
    return std::make_unique<ReserveGrid>(ValuationBasis{params_.hazards, cov, spec_, curve_, num_});
  });
}

const ConditionalCache& ReserveEngine::cache(const CovariateVector& cov, double t) const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "@%.17g", t);
  const ReserveGrid& g = grid(cov);
  return lookup(caches_, class_key(cov) + buf, [&] { return std::make_unique<ConditionalCache>(g, t, 0.0); });
}

const ReserveEngine::CbnrEntry& ReserveEngine::cbnr_entry(const CovariateVector& cov, double t) const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "@%.17g", t);
  return lookup(cbnr_, class_key(cov) + buf, [&] {
    auto e = std::make_unique<CbnrEntry>();
    const ReserveGrid& g = grid(cov);
    const double H = g.horizon();
    if (t <= 0.0 || !params_.hazards.ai) return e;
    const ConditionalCache& c = cache(cov, t);
    auto covered = [&](double s) { return spec_.covered_onset(s); };
    const auto w = onset_weights(t, params_.delay.disability, cov, params_.hazards, num_,
                                 [&](double s) { return c.S_i(s, covered(s)); });
    e->prob = w.total();
    if (!(e->prob > 0.0)) throw DegenerateModel("P(CBNR) vanishes for class " + class_key(cov));
    e->cbni = w.active_mass / e->prob;
    double v = 0.0;
    for (size_t m = 0; m < w.s.size(); ++m) {
      const double s = w.s[m];
      if (w.w[m] == 0.0) continue;
      const bool cv = covered(s);
      const double S = c.S_i(s, cv);
      if (!(S > 0.0)) continue;
      const double vi = c.W_i(s, cv) / S;
      const double refund = -stream_value(spec_, curve_, State::a, 0.0, s, t, t, H);
      v += w.q[m] * w.w[m] *
           (curve_.value_factor(t, s) * (vi + spec_.lump(State::a, State::i, s, s, H)) + refund);
    }
    e->ibnr_value = v / e->prob;
    return e;
  });
}

double ReserveEngine::prob_cbnr(const CovariateVector& cov, double t) const { return cbnr_entry(cov, t).prob; }

std::pair<double, double> ReserveEngine::onset_split(const CovariateVector& cov, double t) const {
  const auto& e = cbnr_entry(cov, t);
  return {e.cbni, 1.0 - e.cbni};
}

EligibilityState ReserveEngine::checked(const TransactionRecord& rec, double t, Category want) const {
  auto e = derive_eligibility(rec, t);
  const Category c = categorize(e);
  if (c != want)
    throw InvalidCategory(std::string("policy ") + rec.policy.id + ": expected " + category_name(want) +
                          ", found " + category_name(c));
  return e;
}

ReserveBreakdown ReserveEngine::base(const TransactionRecord& rec, double t, Category c) const {
  ReserveBreakdown b;
  b.policy_id = rec.policy.id;
  b.t = t;
  b.category = c;
  b.inputs_digest = digest_;
  return b;
}

ReserveBreakdown ReserveEngine::cbnr_reserve(const TransactionRecord& rec, double t) const {
  checked(rec, t, Category::CBNR);
  auto b = base(rec, t, Category::CBNR);
  const auto& cov = rec.policy.cov;
  const ReserveGrid& g = grid(cov);
  if (t >= g.horizon()) {
    b.components.cbni_term = 0.0;
    b.components.ibnr_term = 0.0;
  } else {
    const auto& e = cbnr_entry(cov, t);
    b.components.cbni_term = g.V(State::a, t, t) * e.cbni;
    b.components.ibnr_term = e.ibnr_value;
  }
  b.total = b.components.sum();
  return b;
}

ReserveBreakdown ReserveEngine::rbnsi_reserve(const TransactionRecord& rec, double t) const {
  const auto e = checked(rec, t, Category::RBNSi);
  auto b = base(rec, t, Category::RBNSi);
  const auto& cov = rec.policy.cov;
  const ReserveGrid& g = grid(cov);
  const double H = g.horizon(), G = e.G;
  const auto p = adjudication_probabilities(e, cov, t, params_.adjudication, num_);
  const double k = curve_.value_factor(t, G);
  double award = 0.0, reject = 0.0;
  if (G < H) {
    if (p.award > 0.0) {
      const auto vi = conditional_i(g, G, 0.0, t, spec_.covered_onset(G) ? 1 : 0);
      award = k * (vi.value + spec_.lump(State::a, State::i, G, G, H)) * p.award;
    }
    if (p.reject > 0.0) reject = k * conditional_a(g, cache(cov, t), G).value * p.reject;
  }
  b.components.award_term = award;
  b.components.reject_term = reject;
  b.components.premium_adjustment = -stream_value(spec_, curve_, State::a, 0.0, G, t, t, H);
  b.total = b.components.sum();
  return b;
}

ReserveBreakdown ReserveEngine::rbnsr_reserve(const TransactionRecord& rec, double t) const {
  const auto e = checked(rec, t, Category::RBNSr);
  auto b = base(rec, t, Category::RBNSr);
  const auto& cov = rec.policy.cov;
  const ReserveGrid& g = grid(cov);
  const double H = g.horizon();
  const bool covered = spec_.covered_onset(e.z2);
  if (e.z1 == 4) {
    b.components.award_term = t < H ? g.V_i(t, e.W, covered) : 0.0;
    b.components.reject_term = 0.0;
    b.total = b.components.sum();
    return b;
  }
  const auto p = adjudication_probabilities(e, cov, t, params_.adjudication, num_);
  const double G = e.G;
  double award = 0.0, reject = 0.0;
  if (t < H && p.reject > 0.0) reject = p.reject * g.V(State::r, t, t - G);
  if (p.award > 0.0 && G < H) {
    const double k = curve_.value_factor(t, G);
    const auto vi = conditional_i(g, G, e.W, t, covered ? 1 : 0);
    double paid = 0.0;
    if (G < t)
      paid = k * spec_.lump(State::i, State::r, G, e.W, H) + stream_value(spec_, curve_, State::r, G, G, t, t, H);
    award = p.award * (k * vi.value - paid);
  }
  b.components.award_term = award;
  b.components.reject_term = reject;
  b.total = b.components.sum();
  return b;
}

ReserveBreakdown ReserveEngine::reserve(const TransactionRecord& rec, double t) const {
  switch (categorize(rec, t)) {
    case Category::CBNR: return cbnr_reserve(rec, t);
    case Category::RBNSi: return rbnsi_reserve(rec, t);
    case Category::RBNSr: return rbnsr_reserve(rec, t);
    case Category::Settled: {
      auto b = base(rec, t, Category::Settled);
      return b;
    }
  }
  return base(rec, t, Category::Settled);
}

double ReserveEngine::naive_reserve(const TransactionRecord& rec, double t) const {
  const auto e = derive_eligibility(rec, t);
  const ReserveGrid& g = grid(rec.policy.cov);
  if (t >= g.horizon()) return 0.0;
  switch (categorize(e)) {
    case Category::Settled: return 0.0;
    case Category::CBNR:
    case Category::RBNSi: return g.V(State::a, t, t);
    case Category::RBNSr:
      if (e.z1 == 4) return g.V_i(t, e.W, spec_.covered_onset(e.z2));
      return g.V(State::r, t, t - e.G);
  }
  return 0.0;
}

namespace {

PortfolioReport assemble(double t, std::vector<ReserveBreakdown> rows, std::vector<double> naive) {
  PortfolioReport rep;
  rep.t = t;
  for (Category c : {Category::CBNR, Category::RBNSi, Category::RBNSr, Category::Settled}) rep.by_category[c];
  for (size_t k = 0; k < rows.size(); ++k) {
    auto& s = rep.by_category[rows[k].category];
    ++s.count;
    s.proposed += rows[k].total;
    s.naive += naive[k];
  }
  rep.policies = std::move(rows);
  rep.naive = std::move(naive);
  return rep;
}

}  // namespace

PortfolioReport ReserveEngine::portfolio_reserve_serial(const std::vector<TransactionRecord>& records,
                                                        double t) const {
  std::vector<ReserveBreakdown> rows;
  std::vector<double> naive;
  for (const auto& r : records) {
    rows.push_back(reserve(r, t));
    naive.push_back(naive_reserve(r, t));
  }
  return assemble(t, std::move(rows), std::move(naive));
}

PortfolioReport ReserveEngine::portfolio_reserve(const std::vector<TransactionRecord>& records, double t,
                                                 int threads) const {
  const long n = static_cast<long>(records.size());
  std::vector<ReserveBreakdown> rows(n);
  std::vector<double> naive(n);
  std::exception_ptr err;
  std::mutex err_mu;
#ifdef _OPENMP
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 8) num_threads(nt)
#endif
  for (long k = 0; k < n; ++k) {
    try {
      rows[k] = reserve(records[k], t);
      naive[k] = naive_reserve(records[k], t);
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  (void)threads;
  return assemble(t, std::move(rows), std::move(naive));
}

}  // namespace reng

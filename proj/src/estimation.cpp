#include "reng/estimation.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <sstream>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace reng {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTol = 1e-9;

int thread_count(int threads) {
#ifdef _OPENMP
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

// Runs `build(k, grid)` per record in parallel and concatenates in record order.
ExposureGrid per_policy(long n, int threads, const std::function<void(long, ExposureGrid&)>& build) {
  std::vector<ExposureGrid> parts(n);
  std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 64) num_threads(thread_count(threads))
#endif
  for (long k = 0; k < n; ++k) {
    try {
      build(k, parts[k]);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  (void)threads;
  ExposureGrid out;
  for (auto& p : parts) out.append(std::move(p));
  return out;
}

double observed_until(const TransactionRecord& rec, double eta) { return std::min(eta, rec.as_of); }

struct Segment {
  int from;
  double a, b;      // exposure interval
  double entry;     // duration origin
  int to;           // jump at b, -1 when censored
};

// Cuts [a, b) at multiples of step and at extra cut points; the closing jump goes to the last cell.
void add_cells(ExposureGrid& g, long policy, int cov, const Segment& s, double step, double weight,
               const std::vector<double>& cuts, const std::function<void(ExposureCell&)>& decorate = {}) {
  if (!(s.b > s.a)) return;
  std::vector<double> pts{s.a};
  for (double x = (std::floor(s.a / step) + 1.0) * step; x < s.b - kTol; x += step)
    if (x > s.a + kTol) pts.push_back(x);
  for (double c : cuts)
    if (c > s.a + kTol && c < s.b - kTol) pts.push_back(c);
  std::sort(pts.begin(), pts.end());
  pts.push_back(s.b);
  for (size_t k = 0; k + 1 < pts.size(); ++k) {
    ExposureCell c;
    c.policy = policy;
    c.cov = cov;
    c.from = s.from;
    c.t0 = pts[k];
    c.t1 = pts[k + 1];
    c.u0 = c.t0 - s.entry;
    c.weight = weight;
    c.to = k + 2 == pts.size() ? s.to : -1;
    if (decorate) decorate(c);
    g.cells.push_back(c);
  }
}

// State segments of a path inside (lo, hi].
std::vector<Segment> path_segments(const JumpPath& path, double lo, double hi) {
  std::vector<Segment> out;
  if (!(hi > lo)) return out;
  State state = State::a;
  double start = 0.0;
  for (size_t k = 0; k <= path.jumps.size(); ++k) {
    const double end = k < path.jumps.size() ? path.jumps[k].time : kInf;
    const double a = std::max(start, lo), b = std::min(end, hi);
    if (state != State::d && b > a) {
      const int to = end <= hi ? static_cast<int>(path.jumps[k].to) : -1;
      out.push_back({static_cast<int>(state), a, b, state == State::a ? 0.0 : start, to});
    }
    if (k == path.jumps.size() || end > hi) break;
    state = path.jumps[k].to;
    start = end;
  }
  return out;
}

double regressor(const HazardTerm& term, double t, double u, const CovariateVector& cov) {
  switch (term.kind) {
    case Regressor::InterceptM: return cov.gender == Gender::M ? 1.0 : 0.0;
    case Regressor::InterceptF: return cov.gender == Gender::F ? 1.0 : 0.0;
    case Regressor::CurrentAge: return cov.age_at_origin + t;
    case Regressor::DurationCapped: return std::min(u, term.cap);
    case Regressor::CalendarTime: return t;
    case Regressor::Extra: return cov.extra_value(term.name);
  }
  return 0.0;
}

std::string edge_name(const std::string& prefix, int from, int to) {
  return prefix + std::to_string(from) + std::to_string(to);
}

const std::pair<State, State> kTransitions[] = {
    {State::a, State::i}, {State::a, State::d}, {State::i, State::r}, {State::i, State::d}, {State::r, State::d}};

const std::pair<int, int> kEdges[] = {{1, 2}, {2, 1}, {1, 3}, {1, 4}, {2, 4}, {1, 5}};

}  // namespace

double ExposureCell::offset() const { return std::log(exposure() * factor); }

double ExposureGrid::total_exposure() const {
  long double s = 0.0L;
  for (const auto& c : cells) s += c.exposure();
  return static_cast<double>(s);
}

void ExposureGrid::append(ExposureGrid&& other, long policy_shift) {
  const int shift = static_cast<int>(covariates.size());
  for (auto& c : other.covariates) covariates.push_back(std::move(c));
  for (auto c : other.cells) {
    c.cov += shift;
    c.policy += policy_shift;
    cells.push_back(c);
  }
}

ExposureGrid build_exposure(const std::vector<TransactionRecord>& records, double eta, double step, int threads) {
  if (!(step > 0.0)) throw InvalidArgument("exposure step must be positive");
  return per_policy(static_cast<long>(records.size()), threads, [&](long k, ExposureGrid& g) {
    const auto& rec = records[k];
    const double t = observed_until(rec, eta);
    const auto e = derive_eligibility(rec, t);
    const auto path = belief_path(e, rec.policy.cov, t, kInf);
    g.covariates.push_back(rec.policy.cov);
    for (const auto& s : path_segments(path, rec.policy.V, std::min(rec.policy.C, t)))
      add_cells(g, k, 0, s, step, 1.0, {});
  });
}

json estimation_config_to_json(const EstimationConfig& c) {
  return {{"step", c.step},
          {"max_iterations", c.max_iterations},
          {"tolerance", c.tolerance},
          {"censor_adjudication_deaths", c.censor_adjudication_deaths},
          {"freeze_death", c.freeze_death},
          {"fit_delay_shape", c.fit_delay_shape},
          {"fit_delay_age", c.fit_delay_age},
          {"fit_delay_gender", c.fit_delay_gender},
          {"numerics", numerics_to_json(c.num)}};
}

EstimationConfig estimation_config_from_json(const json& j) {
  check_keys(j,
             {"step", "max_iterations", "tolerance", "censor_adjudication_deaths", "freeze_death", "fit_delay_shape",
              "fit_delay_age", "fit_delay_gender", "numerics"},
             "estimation");
  EstimationConfig c;
  c.step = get_or(j, "step", c.step);
  c.max_iterations = get_or(j, "max_iterations", c.max_iterations);
  c.tolerance = get_or(j, "tolerance", c.tolerance);
  c.censor_adjudication_deaths = get_or(j, "censor_adjudication_deaths", c.censor_adjudication_deaths);
  c.freeze_death = get_or(j, "freeze_death", c.freeze_death);
  c.fit_delay_shape = get_or(j, "fit_delay_shape", c.fit_delay_shape);
  c.fit_delay_age = get_or(j, "fit_delay_age", c.fit_delay_age);
  c.fit_delay_gender = get_or(j, "fit_delay_gender", c.fit_delay_gender);
  if (j.contains("numerics")) c.num = numerics_from_json(j["numerics"]);
  if (!(c.step > 0.0)) throw ConfigError("estimation.step must be positive");
  if (c.max_iterations < 1) throw ConfigError("estimation.max_iterations must be positive");
  if (!(c.tolerance > 0.0)) throw ConfigError("estimation.tolerance must be positive");
  return c;
}

std::optional<LogLinearHazard> fit_poisson(const ExposureGrid& grid, int from, int to, const LogLinearHazard& tmpl,
                                           double eta, const EstimationConfig& cfg, FitDiagnostics& diag) {
  const int p = static_cast<int>(tmpl.terms.size());
  std::vector<double> X, Xo, d, w, E;  // Xo: regressors at the jump time
  for (const auto& c : grid.cells) {
    if (c.from != from || !(c.weight > 0.0)) continue;
    const double expo = c.exposure() * (c.thinned_to == to ? c.factor : 1.0);
    const double occ = c.to == to ? 1.0 : 0.0;
    if (!(expo > 0.0) && occ == 0.0) continue;
    const double tm = 0.5 * (c.t0 + c.t1), um = c.u0 + 0.5 * c.exposure();
    const auto& cov = grid.covariates[c.cov];
    for (const auto& term : tmpl.terms) {
      X.push_back(regressor(term, tm, um, cov));
      Xo.push_back(occ > 0.0 ? regressor(term, c.t1, c.u0 + c.exposure(), cov) : 0.0);
    }
    d.push_back(occ);
    w.push_back(c.weight);
    E.push_back(expo);
  }
  const long n = static_cast<long>(d.size());
  long double events = 0.0L, exposure = 0.0L;
  for (long k = 0; k < n; ++k) {
    events += w[k] * d[k];
    exposure += w[k] * E[k];
  }
  diag.events = static_cast<double>(events);
  diag.exposure = static_cast<double>(exposure);
  diag.boundary = !(events > 0.0L);
  if (diag.boundary) return std::nullopt;
  if (!(exposure > 0.0L)) throw NonConvergence(diag.name + ": occurrences without exposure");

  // columns without information keep their template coefficient
  std::vector<int> active;
  for (int j = 0; j < p; ++j) {
    double s = 0.0;
    for (long k = 0; k < n; ++k) s += std::abs(X[k * p + j]) * w[k] * E[k];
    if (s > 0.0) active.push_back(j);
  }
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = tmpl.terms[j].coefficient;
  const double crude = std::log(static_cast<double>(events / exposure));
  bool has_intercept = false;
  for (int j : active)
    if (tmpl.terms[j].kind == Regressor::InterceptM || tmpl.terms[j].kind == Regressor::InterceptF) {
      beta[j] = crude;
      has_intercept = true;
    }
  for (int j : active)
    if (has_intercept && tmpl.terms[j].kind != Regressor::InterceptM && tmpl.terms[j].kind != Regressor::InterceptF)
      beta[j] = 0.0;

  auto loglik = [&](const Eigen::VectorXd& b) {
    long double ll = 0.0L;
    for (long k = 0; k < n; ++k) {
      double eta_k = 0.0, eta_o = 0.0;
      for (int j = 0; j < p; ++j) {
        eta_k += X[k * p + j] * b[j];
        eta_o += Xo[k * p + j] * b[j];
      }
      const double mu = E[k] * std::exp(eta_k);
      ll += w[k] * ((d[k] > 0.0 ? d[k] * (eta_o + std::log(E[k] > 0.0 ? E[k] : 1.0)) : 0.0) - mu);
    }
    return static_cast<double>(ll);
  };

  const int q = static_cast<int>(active.size());
  double ll = loglik(beta);
  diag.converged = false;
  for (diag.iterations = 1; diag.iterations <= cfg.max_iterations; ++diag.iterations) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q, q);
    for (long k = 0; k < n; ++k) {
      double eta_k = 0.0;
      for (int j = 0; j < p; ++j) eta_k += X[k * p + j] * beta[j];
      const double mu = E[k] * std::exp(eta_k);
      for (int a = 0; a < q; ++a) {
        const double xa = X[k * p + active[a]];
        grad[a] += w[k] * (d[k] * Xo[k * p + active[a]] - mu * xa);
        for (int b = 0; b <= a; ++b) info(a, b) += w[k] * mu * xa * X[k * p + active[b]];
      }
    }
    info = info.selfadjointView<Eigen::Lower>();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NonConvergence(diag.name + ": information matrix not positive definite (collinear regressors?)");
    const Eigen::VectorXd delta = ldlt.solve(grad);
    double scale = 1.0, ll_new = ll;
    Eigen::VectorXd next = beta;
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      next = beta;
      for (int a = 0; a < q; ++a) next[active[a]] += scale * delta[a];
      ll_new = loglik(next);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * std::abs(ll)) break;
    }
    const double change = std::abs(ll_new - ll) / std::max(std::abs(ll), 1e-300);
    beta = next;
    ll = ll_new;
    if (change < cfg.tolerance) {
      diag.converged = true;
      break;
    }
  }
  diag.log_likelihood = ll;
  if (!diag.converged) {
    std::ostringstream os;
    os << diag.name << ": no convergence after " << cfg.max_iterations << " iterations, log-likelihood " << ll;
    throw NonConvergence(os.str());
  }
  LogLinearHazard out = tmpl;
  for (int j = 0; j < p; ++j) out.terms[j].coefficient = beta[j];
  if (out.uses(Regressor::CalendarTime)) out.calendar_epoch = eta;
  return out;
}

ExposureGrid build_adjudication_exposure(const std::vector<TransactionRecord>& records, double eta, Category block,
                                         const EstimationConfig& cfg) {
  if (block != Category::RBNSi && block != Category::RBNSr) throw InvalidArgument("adjudication block must be RBNS");
  return per_policy(static_cast<long>(records.size()), cfg.threads, [&](long k, ExposureGrid& g) {
    const auto& rec = records[k];
    const double until = observed_until(rec, eta);
    bool open = false;
    Category cat = Category::RBNSi;
    int c = 1;
    bool prior = false;
    double anchor = 0.0, seg = 0.0;
    CovariateVector base;
    auto close = [&](double t, int to) {
      if (open && cat == block) {
        CovariateVector cov = base;
        cov.set_extra("prior_rejection", prior || c == 2 ? 1.0 : 0.0);
        g.covariates.push_back(std::move(cov));
        add_cells(g, k, static_cast<int>(g.covariates.size()) - 1, {c, seg, t, anchor, to}, cfg.step, 1.0, {});
      }
      seg = t;
    };
    EligibilityState before = derive_eligibility(rec, 0.0);
    size_t j = 0;
    while (j < rec.events.size() && rec.events[j].time <= until) {
      const double t = rec.events[j].time;
      while (j < rec.events.size() && rec.events[j].time <= t + kTol) ++j;
      const EligibilityState after = derive_eligibility(rec, std::min(t + kTol, until));
      const bool awarded = after.W > before.W + kTol;
      const bool died = after.death_time <= t + kTol;
      bool ended = false;
      if (open) {
        if (died) {
          const int to = awarded ? 5 : 4;
          if (cfg.censor_adjudication_deaths || (c == 2 && to == 5)) close(t, -1);
          else close(t, to);
          ended = true;
        } else if (awarded || (after.z1 != 2 && after.z1 != 3)) {
          close(t, 3);
          ended = true;
        } else {
          const int c_new = after.z1 == 2 ? 1 : 2;
          if (c_new != c) {
            close(t, c_new);
            c = c_new;
            prior = prior || c == 2;
          }
        }
        if (ended) open = false;
      }
      if (!open && !died && (after.z1 == 2 || after.z1 == 3)) {
        open = true;
        cat = categorize(after);
        c = after.z1 == 2 ? 1 : 2;
        prior = cat == Category::RBNSr || c == 2;
        anchor = cat == Category::RBNSi ? after.report_time : after.G;
        seg = t;
        base = rec.policy.cov;
        base.set_extra("report_lag", after.report_time - after.z2);
        base.set_extra("eligible_years", after.W);
      }
      before = after;
    }
    if (open) close(until, -1);
  });
}

AdjudicationFit estimate_adjudication(const std::vector<TransactionRecord>& records, double eta,
                                      const AdjudicationHazards& tmpl, const EstimationConfig& cfg) {
  tmpl.validate();
  AdjudicationFit fit;
  fit.g.shared = tmpl.shared;
  auto fit_block = [&](const AdjudicationBlock& in, const ExposureGrid& grid, const std::string& prefix) {
    AdjudicationBlock out;
    for (auto [from, to] : kEdges) {
      const auto& h = in.get(from, to);
      if (!h) continue;
      FitDiagnostics diag;
      diag.name = edge_name(prefix, from, to);
      auto est = fit_poisson(grid, from, to, *h, eta, cfg, diag);
      fit.diagnostics.push_back(diag);
      out.get(from, to) = std::move(est);
    }
    return out;
  };
  auto gi = build_adjudication_exposure(records, eta, Category::RBNSi, cfg);
  if (tmpl.shared) {
    gi.append(build_adjudication_exposure(records, eta, Category::RBNSr, cfg));
    fit.g.rbnsi = fit_block(tmpl.rbnsi, gi, "omega");
  } else {
    fit.g.rbnsi = fit_block(tmpl.rbnsi, gi, "rbnsi.omega");
    const auto gr = build_adjudication_exposure(records, eta, Category::RBNSr, cfg);
    fit.g.rbnsr = fit_block(tmpl.rbnsr, gr, "rbnsr.omega");
  }
  return fit;
}

namespace {

struct DelayObservation {
  double u;      // observed delay, or the censoring point when revealed
  double onset;  // covariate time: onset (disability) or reactivation time
  double bound;  // truncation point, +inf when untruncated
  double weight;
  bool revealed;
  const CovariateVector* cov;
};

struct DelayParametrization {
  DelayDistribution tmpl;
  bool shape, age, gender;

  std::vector<double> pack(const DelayDistribution& d) const {
    std::vector<double> p{std::log(d.lambda)};
    if (shape) p.push_back(std::log(d.k));
    if (age) p.push_back(d.beta_age);
    if (gender) p.push_back(d.beta_male);
    return p;
  }
  DelayDistribution unpack(const double* p) const {
    DelayDistribution d = tmpl;
    size_t k = 0;
    d.lambda = std::exp(p[k++]);
    if (shape) d.k = std::exp(p[k++]);
    if (age) d.beta_age = p[k++];
    if (gender) d.beta_male = p[k++];
    return d;
  }
};

double delay_loglik(const DelayDistribution& d, const std::vector<DelayObservation>& obs) {
  long double ll = 0.0L;
  for (const auto& o : obs) {
    double term;
    if (o.revealed) {
      term = std::log1p(-d.cdf(o.u, *o.cov, o.onset));
    } else {
      term = d.log_density(o.u, *o.cov, o.onset);
      if (std::isfinite(o.bound)) term -= std::log(d.cdf(o.bound, *o.cov, o.onset));
    }
    ll += o.weight * term;
  }
  return static_cast<double>(ll);
}

struct Objective {
  std::function<double(const double*)> f;
  size_t n;
};

double obj_f(const gsl_vector* x, void* params) {
  auto* o = static_cast<Objective*>(params);
  const double v = o->f(x->data);
  return std::isfinite(v) ? v : GSL_POSINF;
}

void obj_df(const gsl_vector* x, void* params, gsl_vector* g) {
  auto* o = static_cast<Objective*>(params);
  std::vector<double> p(x->data, x->data + o->n);
  for (size_t k = 0; k < o->n; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(p[k]));
    const double keep = p[k];
    p[k] = keep + h;
    const double up = o->f(p.data());
    p[k] = keep - h;
    const double down = o->f(p.data());
    p[k] = keep;
    gsl_vector_set(g, k, (up - down) / (2 * h));
  }
}

void obj_fdf(const gsl_vector* x, void* params, double* f, gsl_vector* g) {
  *f = obj_f(x, params);
  obj_df(x, params, g);
}

// BFGS on the averaged negative log-likelihood.
DelayDistribution fit_delay(const DelayParametrization& par, const std::vector<DelayObservation>& obs,
                            FitDiagnostics& diag) {
  long double total = 0.0L, events = 0.0L;
  for (const auto& o : obs) {
    total += o.weight;
    if (!o.revealed) events += o.weight;
  }
  diag.events = static_cast<double>(events);
  if (!(events > 0.0L)) throw NoInformation(diag.name + ": no positively weighted reported delays");
  const double scale = static_cast<double>(total);
  Objective obj{[&](const double* p) {
                  const auto d = par.unpack(p);
                  if (!(d.k > 0.0) || !(d.lambda > 0.0)) return kInf;
                  return -delay_loglik(d, obs) / scale;
                },
                par.pack(par.tmpl).size()};
  const auto start = par.pack(par.tmpl);
  gsl_vector* x = gsl_vector_alloc(obj.n);
  for (size_t k = 0; k < obj.n; ++k) gsl_vector_set(x, k, start[k]);
  gsl_multimin_function_fdf fdf{obj_f, obj_df, obj_fdf, obj.n, &obj};
  gsl_multimin_fdfminimizer* m = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, obj.n);
  gsl_set_error_handler_off();
  gsl_multimin_fdfminimizer_set(m, &fdf, x, 0.05, 0.1);
  int status = GSL_CONTINUE;
  diag.converged = false;
  for (diag.iterations = 1; diag.iterations <= 1000; ++diag.iterations) {
    status = gsl_multimin_fdfminimizer_iterate(m);
    const int test = gsl_multimin_test_gradient(m->gradient, 1e-7);
    if (test == GSL_SUCCESS) {
      diag.converged = true;
      break;
    }
    if (status) {
      // no further progress: accept when the gradient is already small
      diag.converged = gsl_multimin_test_gradient(m->gradient, 1e-5) == GSL_SUCCESS;
      break;
    }
  }
  const auto best = par.unpack(m->x->data);
  diag.log_likelihood = -m->f * scale;
  gsl_multimin_fdfminimizer_free(m);
  gsl_vector_free(x);
  if (!diag.converged) throw NonConvergence(diag.name + ": BFGS did not converge");
  return best;
}

}  // namespace

DelayFit estimate_reporting_delay(const std::vector<TransactionRecord>& records, double eta, const AdjudicationFit& g,
                                  const ReportingDelay& tmpl, const EstimationConfig& cfg) {
  tmpl.disability.validate();
  const long n = static_cast<long>(records.size());
  std::vector<std::vector<DelayObservation>> dis(n), rea(n);
  std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 64) num_threads(thread_count(cfg.threads))
#endif
  for (long k = 0; k < n; ++k) {
    try {
      const auto& rec = records[k];
      const double until = observed_until(rec, eta);
      const auto e = derive_eligibility(rec, until);
      if (!e.has_claim()) continue;
      const bool dead = e.death_time <= until;
      double w;
      const Category cat = categorize(e);
      if (cat == Category::RBNSi) w = adjudication_probabilities(e, rec.policy.cov, until, g.g, cfg.num).award;
      else w = e.W > 0.0 ? 1.0 : 0.0;
      if (w > 0.0) {
        const bool revealed = dead && std::abs(e.report_time - e.death_time) <= kTol;
        dis[k].push_back({e.report_time - e.z2, e.z2, dead ? kInf : until - e.z2, w, revealed, &rec.policy.cov});
      }
      if (tmpl.reactivation) {
        // reactivations revealed by an award whose backpay window ends before the award
        for (const auto& ev : rec.events)
          if (ev.time <= until && ev.type == EventType::AwardBackpay && ev.eligible_to < ev.time - kTol)
            rea[k].push_back({ev.time - ev.eligible_to, ev.eligible_to, until - ev.eligible_to, 1.0, false,
                              &rec.policy.cov});
      }
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  std::vector<DelayObservation> all_dis, all_rea;
  for (long k = 0; k < n; ++k) {
    all_dis.insert(all_dis.end(), dis[k].begin(), dis[k].end());
    all_rea.insert(all_rea.end(), rea[k].begin(), rea[k].end());
  }
  DelayFit fit;
  FitDiagnostics d;
  d.name = "delay.disability";
  fit.f.disability =
      fit_delay({tmpl.disability, cfg.fit_delay_shape, cfg.fit_delay_age, cfg.fit_delay_gender}, all_dis, d);
  fit.diagnostics.push_back(d);
  if (tmpl.reactivation) {
    FitDiagnostics r;
    r.name = "delay.reactivation";
    if (all_rea.empty()) {
      r.boundary = true;
      fit.f.reactivation = tmpl.reactivation;
    } else {
      fit.f.reactivation =
          fit_delay({*tmpl.reactivation, cfg.fit_delay_shape, cfg.fit_delay_age, cfg.fit_delay_gender}, all_rea, r);
    }
    fit.diagnostics.push_back(r);
  }
  return fit;
}

ExposureGrid build_valid_time_exposure(const std::vector<TransactionRecord>& records, double eta,
                                       const AdjudicationFit& g, const DelayFit& f, const EstimationConfig& cfg) {
  const auto& delay = f.f.disability;
  return per_policy(static_cast<long>(records.size()), cfg.threads, [&](long k, ExposureGrid& grid) {
    const auto& rec = records[k];
    const auto& cov = rec.policy.cov;
    const double until = observed_until(rec, eta);
    const auto e = derive_eligibility(rec, until);
    const double lo = rec.policy.V, hi = std::min(rec.policy.C, until);
    grid.covariates.push_back(cov);

    struct Scenario {
      JumpPath path;
      double weight;
      double pending_from;  // reactivations after this time cannot have been reported
    };
    std::vector<Scenario> sc;
    const auto base = belief_path(e, cov, until, kInf);
    const Category cat = categorize(e);
    if (cat == Category::RBNSi) {
      const double p = adjudication_probabilities(e, cov, until, g.g, cfg.num).award;
      sc.push_back({base, 1.0 - p, kInf});
      sc.push_back({JumpPath{cov, {{e.z2, State::i}}, kInf}, p, e.z2});
    } else if (cat == Category::RBNSr && e.z1 != 4) {
      const double p = adjudication_probabilities(e, cov, until, g.g, cfg.num).award;
      sc.push_back({base, 1.0 - p, kInf});
      sc.push_back({JumpPath{cov, {{e.z2, State::i}}, kInf}, p, e.G});
    } else {
      sc.push_back({base, 1.0, kInf});
    }
    for (const auto& s : sc) {
      if (!(s.weight > 0.0)) continue;
      for (const auto& seg : path_segments(s.path, lo, hi)) {
        std::vector<double> cuts;
        if (std::isfinite(s.pending_from)) cuts.push_back(s.pending_from);
        add_cells(grid, k, 0, seg, cfg.step, s.weight, cuts, [&](ExposureCell& c) {
          if (c.from == static_cast<int>(State::a)) {
            c.thinned_to = static_cast<int>(State::i);
            auto F = [&](double t) { return delay.cdf(until - t, cov, t); };
            c.factor = (F(c.t0) + 4.0 * F(0.5 * (c.t0 + c.t1)) + F(c.t1)) / 6.0;
          } else if (c.from == static_cast<int>(State::i)) {
            c.thinned_to = static_cast<int>(State::r);
            c.factor = c.t0 >= s.pending_from - kTol ? 0.0 : 1.0;
          }
        });
      }
    }
  });
}

ValidTimeFit estimate_valid_time(const std::vector<TransactionRecord>& records, double eta, const AdjudicationFit& g,
                                 const DelayFit& f, const HazardSet& tmpl, const EstimationConfig& cfg) {
  const auto grid = build_valid_time_exposure(records, eta, g, f, cfg);
  ValidTimeFit fit;
  for (auto [from, to] : kTransitions) {
    const auto& h = tmpl.get(from, to);
    if (!h) continue;
    auto& slot = fit.theta.get(from, to);
    if (cfg.freeze_death && to == State::d) {
      slot = h;
      continue;
    }
    FitDiagnostics diag;
    diag.name = std::string("mu_") + state_name(from) + state_name(to);
    slot = fit_poisson(grid, static_cast<int>(from), static_cast<int>(to), *h, eta, cfg, diag);
    fit.diagnostics.push_back(diag);
  }
  return fit;
}

EstimationResult estimate(const std::vector<TransactionRecord>& records, double eta, const ModelParameters& tmpl,
                          const EstimationConfig& cfg) {
  if (records.empty()) throw NoInformation("estimation: no records");
  for (const auto& r : records) validate_record(r);
  EstimationResult out;
  auto step = [&](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(name) + " step failed: " + e.what());
    }
  };
  const auto g = step("adjudication", [&] { return estimate_adjudication(records, eta, tmpl.adjudication, cfg); });
  const auto f = step("reporting-delay", [&] { return estimate_reporting_delay(records, eta, g, tmpl.delay, cfg); });
  const auto th = step("valid-time", [&] { return estimate_valid_time(records, eta, g, f, tmpl.hazards, cfg); });
  out.params.adjudication = g.g;
  out.params.delay = f.f;
  out.params.hazards = th.theta;
  for (const auto* d : {&g.diagnostics, &f.diagnostics, &th.diagnostics})
    out.diagnostics.insert(out.diagnostics.end(), d->begin(), d->end());
  return out;
}

std::vector<ModelParameters> bootstrap(const std::vector<TransactionRecord>& records, double eta,
                                       const ModelParameters& tmpl, const EstimationConfig& cfg, int replicates,
                                       std::uint64_t seed) {
  std::vector<ModelParameters> out;
  const size_t n = records.size();
  for (int b = 0; b < replicates; ++b) {
    CounterRng rng(seed, static_cast<std::uint64_t>(b), 0xb007);
    std::vector<TransactionRecord> sample;
    sample.reserve(n);
    for (size_t k = 0; k < n; ++k) sample.push_back(records[std::min(n - 1, static_cast<size_t>(rng.uniform() * n))]);
    out.push_back(estimate(sample, eta, tmpl, cfg).params);
  }
  return out;
}

std::string fit_report(const EstimationResult& r) {
  std::ostringstream os;
  os.precision(10);
  os << "step\tlog_likelihood\titerations\tconverged\tboundary\tevents\texposure\n";
  for (const auto& d : r.diagnostics)
    os << d.name << '\t' << d.log_likelihood << '\t' << d.iterations << '\t' << (d.converged ? "yes" : "no") << '\t'
       << (d.boundary ? "yes" : "no") << '\t' << d.events << '\t' << d.exposure << '\n';
  return os.str();
}

}  // namespace reng

#include "reng/adjudication.hpp"

#include <algorithm>

#include "reng/errors.hpp"
#include "reng/jsonutil.hpp"

namespace reng {

namespace {

constexpr std::array<std::pair<int, int>, 6> kEdges{{{1, 2}, {2, 1}, {1, 3}, {1, 4}, {2, 4}, {1, 5}}};

double rate(const std::optional<LogLinearHazard>& h, double t, double u, const CovariateVector& cov) {
  return h ? (*h)(t, u, cov) : 0.0;
}

void edge_from_json(AdjudicationBlock& b, const json& arr, const char* where) {
  if (!arr.is_array()) throw ConfigError(std::string(where) + ": expected an array of hazards");
  for (const auto& jh : arr) {
    auto h = hazard_from_json(jh);
    int f = 0, t = 0;
    try {
      f = std::stoi(h.origin);
      t = std::stoi(h.target);
    } catch (const std::exception&) {
      throw ConfigError(std::string(where) + ": adjudication states are 1..5");
    }
    auto& slot = b.get(f, t);
    if (slot) throw ConfigError(std::string(where) + ": duplicate edge " + h.origin + "->" + h.target);
    slot = std::move(h);
  }
}

json block_to_json(const AdjudicationBlock& b) {
  json out = json::array();
  for (auto [f, t] : kEdges)
    if (const auto& h = b.get(f, t)) out.push_back(hazard_to_json(*h));
  return out;
}

}  // namespace

const std::optional<LogLinearHazard>& AdjudicationBlock::get(int from, int to) const {
  return const_cast<AdjudicationBlock*>(this)->get(from, to);
}

std::optional<LogLinearHazard>& AdjudicationBlock::get(int from, int to) {
  if (from == 1 && to == 2) return w12;
  if (from == 2 && to == 1) return w21;
  if (from == 1 && to == 3) return w13;
  if (from == 1 && to == 4) return w14;
  if (from == 2 && to == 4) return w24;
  if (from == 1 && to == 5) return w15;
  throw ConfigError("not an adjudication edge: " + std::to_string(from) + "->" + std::to_string(to));
}

void AdjudicationBlock::validate() const {
  for (auto [f, t] : kEdges) {
    const auto& h = get(f, t);
    if (h && (h->origin != std::to_string(f) || h->target != std::to_string(t)))
      throw ConfigError("adjudication hazard stored under the wrong edge");
    if (h && h->terms.empty())
      throw ConfigError("adjudication hazard without terms");
  }
}

const AdjudicationBlock& AdjudicationHazards::block(Category c) const {
  if (c == Category::RBNSr && !shared) return rbnsr;
  return rbnsi;
}

void AdjudicationHazards::validate() const {
  rbnsi.validate();
  if (!shared) rbnsr.validate();
}

json adjudication_to_json(const AdjudicationHazards& g) {
  json out{{"rbnsi", block_to_json(g.rbnsi)}};
  if (g.shared) out["shared"] = true;
  else out["rbnsr"] = block_to_json(g.rbnsr);
  return out;
}

AdjudicationHazards adjudication_from_json(const json& j) {
  check_keys(j, {"rbnsi", "rbnsr", "shared"}, "adjudication");
  AdjudicationHazards g;
  g.shared = j.value("shared", false);
  edge_from_json(g.rbnsi, j.at("rbnsi"), "adjudication.rbnsi");
  if (j.contains("rbnsr")) {
    if (g.shared) throw ConfigError("adjudication: rbnsr given together with shared=true");
    edge_from_json(g.rbnsr, j.at("rbnsr"), "adjudication.rbnsr");
  } else if (!g.shared) {
    throw ConfigError("adjudication: rbnsr block missing (or set shared=true)");
  }
  g.validate();
  return g;
}

CovariateVector AdjudicationContext::with_flag(bool prior) const {
  CovariateVector c = cov;
  c.set_extra("prior_rejection", prior ? 1.0 : 0.0);
  return c;
}

AdjudicationContext adjudication_context(const EligibilityState& e, const CovariateVector& cov, double t) {
  const Category c = categorize(e);
  if (c != Category::RBNSi && c != Category::RBNSr)
    throw InvalidCategory(std::string("adjudication needs an RBNS claim, got ") + category_name(c));
  AdjudicationContext ctx;
  ctx.category = c;
  ctx.t = t;
  ctx.start = e.z1 == 3 ? 2 : 1;
  ctx.anchor = c == Category::RBNSi ? e.report_time : e.G;
  ctx.prior_rejection = c == Category::RBNSi ? (e.prior_rejection || e.z1 == 3) : true;
  ctx.cov = cov;
  ctx.cov.set_extra("report_lag", e.report_time - e.z2);
  ctx.cov.set_extra("eligible_years", e.W);
  ctx.cov.set_extra("prior_rejection", ctx.prior_rejection ? 1.0 : 0.0);
  return ctx;
}

AdjudicationContext adjudication_context(const TransactionRecord& rec, double t) {
  return adjudication_context(derive_eligibility(rec, t), rec.policy.cov, t);
}

double award_probability(const AdjudicationContext& ctx, const AdjudicationHazards& g, double horizon,
                         const Numerics& num, std::vector<Occupancy>* trace) {
  const AdjudicationBlock& b = g.block(ctx.category);
  if (!b.award_possible()) return 0.0;
  const CovariateVector c0 = ctx.with_flag(false), c1 = ctx.with_flag(true);

  std::vector<double> breaks;
  for (auto [f, t] : kEdges)
    if (const auto& h = b.get(f, t))
      for (const auto& term : h->terms)
        if (term.kind == Regressor::DurationCapped && std::isfinite(term.cap))
          breaks.push_back(ctx.anchor + term.cap);
  if (!(horizon > ctx.t)) return 0.0;
  const auto grid = make_grid(ctx.t, horizon, num.rk4_step, breaks);

  // y = (p1, p1_prior, p2, award, reject)
  using Y = std::array<double, 5>;
  auto deriv = [&](double t, const Y& y) {
    const double u = t - ctx.anchor;
    const double a12 = rate(b.w12, t, u, c0), a13 = rate(b.w13, t, u, c0), a14 = rate(b.w14, t, u, c0),
                 a15 = rate(b.w15, t, u, c0);
    const double p12 = rate(b.w12, t, u, c1), p13 = rate(b.w13, t, u, c1), p14 = rate(b.w14, t, u, c1),
                 p15 = rate(b.w15, t, u, c1);
    const double q21 = rate(b.w21, t, u, c1), q24 = rate(b.w24, t, u, c1);
    Y d;
    d[0] = -(a12 + a13 + a14 + a15) * y[0];
    d[1] = -(p12 + p13 + p14 + p15) * y[1] + q21 * y[2];
    d[2] = a12 * y[0] + p12 * y[1] - (q21 + q24) * y[2];
    d[3] = (a13 + a15) * y[0] + (p13 + p15) * y[1];
    d[4] = a14 * y[0] + p14 * y[1] + q24 * y[2];
    return d;
  };
  Y y{0, 0, 0, 0, 0};
  if (ctx.start == 2) y[2] = 1.0;
  else y[ctx.prior_rejection ? 1 : 0] = 1.0;
  auto record = [&](double t) {
    if (trace) trace->push_back({t, y[0], y[1], y[2], y[3], y[4]});
  };
  record(grid.front());
  for (size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k], h = grid[k + 1] - t;
    auto axpy = [](const Y& a, double s, const Y& d) {
      Y r;
      for (int i = 0; i < 5; ++i) r[i] = a[i] + s * d[i];
      return r;
    };
    const Y k1 = deriv(t, y);
    const Y k2 = deriv(t + h / 2, axpy(y, h / 2, k1));
    const Y k3 = deriv(t + h / 2, axpy(y, h / 2, k2));
    const Y k4 = deriv(t + h, axpy(y, h, k3));
    for (int i = 0; i < 5; ++i) y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    record(grid[k + 1]);
    if (y[0] + y[1] + y[2] < 1e-14) break;
  }
  return std::clamp(y[3], 0.0, 1.0);
}

AdjudicationProbabilities adjudication_probabilities(const EligibilityState& e, const CovariateVector& cov,
                                                     double t, const AdjudicationHazards& g,
                                                     const Numerics& num) {
  const auto ctx = adjudication_context(e, cov, t);
  if (e.z1 == 4) return {1.0, 0.0};
  const double horizon = num.omega - cov.age_at_origin;
  const double p = award_probability(ctx, g, horizon, num);
  return {p, 1.0 - p};
}

AdjudicationProbabilities adjudication_probabilities(const TransactionRecord& rec, double t,
                                                     const AdjudicationHazards& g, const Numerics& num) {
  return adjudication_probabilities(derive_eligibility(rec, t), rec.policy.cov, t, g, num);
}

}  // namespace reng

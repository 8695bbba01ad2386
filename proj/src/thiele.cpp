#include "reng/thiele.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "reng/errors.hpp"

namespace reng {

namespace {

using Dec = std::optional<LogLinearHazard::Decomposed>;

Dec dec(const std::optional<LogLinearHazard>& h, const CovariateVector& cov) {
  if (!h) return std::nullopt;
  return h->decompose(cov);
}

double val(const Dec& d, double t, double u) { return d ? hazard_value(*d, t, u) : 0.0; }
double cum(const Dec& d, double t0, double t1, double u0) {
  return d ? cumulative_hazard_exact(*d, t0, t1, u0) : 0.0;
}

void add_caps(std::vector<double>& out, const std::optional<LogLinearHazard>& h, double entry) {
  if (!h) return;
  for (const auto& term : h->terms)
    if (term.kind == Regressor::DurationCapped && std::isfinite(term.cap)) out.push_back(entry + term.cap);
}

// Backward classical RK4 over an ascending grid; f(x, xm, y) with xm the step midpoint
// used to select the side of payment and coverage discontinuities.
template <size_t D, class F, class Store>
std::array<double, D> rk4_backward(const std::vector<double>& grid, std::array<double, D> y, F&& f,
                                   Store&& store) {
  const size_t n = grid.size() - 1;
  store(n, y, std::array<double, D>{}, std::array<double, D>{}, false);
  for (size_t k = n; k-- > 0;) {
    const double x1 = grid[k + 1], x0 = grid[k], h = x0 - x1, xm = 0.5 * (x0 + x1);
    const auto k1 = f(x1, xm, y);
    std::array<double, D> tmp;
    for (size_t d = 0; d < D; ++d) tmp[d] = y[d] + 0.5 * h * k1[d];
    const auto k2 = f(xm, xm, tmp);
    for (size_t d = 0; d < D; ++d) tmp[d] = y[d] + 0.5 * h * k2[d];
    const auto k3 = f(xm, xm, tmp);
    for (size_t d = 0; d < D; ++d) tmp[d] = y[d] + h * k3[d];
    const auto k4 = f(x0, xm, tmp);
    for (size_t d = 0; d < D; ++d) y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
    store(k, y, f(x0, xm, y), k1, true);
  }
  return y;
}

Track solve_track(double origin, const std::vector<double>& grid,
                  const std::function<double(double, double, double)>& rhs) {
  Track tr;
  tr.origin = origin;
  tr.x = grid;
  const size_t n = grid.size() - 1;
  tr.v.assign(n + 1, 0.0);
  tr.dl.assign(n, 0.0);
  tr.dr.assign(n, 0.0);
  rk4_backward<1>(
      grid, {0.0}, [&](double x, double xm, const std::array<double, 1>& y) {
        return std::array<double, 1>{rhs(x, xm, y[0])};
      },
      [&](size_t k, const std::array<double, 1>& y, const std::array<double, 1>& dleft,
          const std::array<double, 1>& dright, bool step) {
        tr.v[k] = y[0];
        if (step) {
          tr.dl[k] = dleft[0];
          tr.dr[k] = dright[0];
        }
      });
  return tr;
}

std::vector<double> onset_nodes(double lo, double hi, double h) {
  std::vector<double> out;
  if (hi < lo) return out;
  for (long m = static_cast<long>(std::ceil(lo / h - 1e-9));; ++m) {
    const double w = m * h;
    if (w > hi - 1e-12) break;
    if (w >= lo - 1e-12) out.push_back(std::max(w, lo));
  }
  if (out.empty() || hi - out.back() > 1e-12) out.push_back(hi);
  return out;
}

std::pair<size_t, double> locate(const std::vector<double>& nodes, double s) {
  if (nodes.size() == 1 || s <= nodes.front()) return {0, 0.0};
  if (s >= nodes.back()) return {nodes.size() - 2, 1.0};
  const size_t m = static_cast<size_t>(std::upper_bound(nodes.begin(), nodes.end(), s) - nodes.begin()) - 1;
  return {m, (s - nodes[m]) / (nodes[m + 1] - nodes[m])};
}

}  // namespace

double Track::eval(double t) const {
  if (x.empty() || t >= x.back()) return 0.0;
  if (t <= x.front()) return v.front();
  const size_t k = static_cast<size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
  const double h = x[k + 1] - x[k], s = (t - x[k]) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * v[k] + (s3 - 2 * s2 + s) * h * dl[k] + (-2 * s3 + 3 * s2) * v[k + 1] +
         (s3 - s2) * h * dr[k];
}

double ReserveGrid::Piece::eval(double onset, double u) const {
  if (zero || nodes.empty()) return 0.0;
  if (nodes.size() == 1) return tracks[0].eval(nodes[0] + u);
  auto [m, lam] = locate(nodes, onset);
  return (1 - lam) * tracks[m].eval(nodes[m] + u) + lam * tracks[m + 1].eval(nodes[m + 1] + u);
}

double ReserveGrid::Piece::entry(double x) const {
  if (zero || nodes.empty()) return 0.0;
  if (nodes.size() == 1) return tracks[0].at_origin();
  auto [m, lam] = locate(nodes, x);
  return (1 - lam) * tracks[m].at_origin() + lam * tracks[m + 1].at_origin();
}

std::vector<double> ReserveGrid::breaks() const {
  std::vector<double> out;
  for (double k : b_.curve.knots())
    if (k > 0.0) out.push_back(k);
  if (std::isfinite(b_.spec.coverage_period)) out.push_back(b_.spec.coverage_period);
  out.push_back(H_);
  return out;
}

ReserveGrid::ReserveGrid(ValuationBasis basis) : b_(std::move(basis)) {
  b_.num.validate();
  b_.spec.validate();
  b_.hazards.validate();
  H_ = b_.spec.horizon(b_.cov, b_.num);
  const auto& spec = b_.spec;
  const auto& curve = b_.curve;
  const auto& hz = b_.hazards;
  const double h = b_.num.rk4_step, ho = b_.num.onset_step, H = H_;
  const double cov_end = std::min(spec.coverage_period, H);
  r_.zero = i_cov_.zero = i_unc_.zero = true;
  if (!(H > 0.0)) return;
  const auto base = breaks();
  const Dec ai = dec(hz.ai, b_.cov), ad = dec(hz.ad, b_.cov), ir = dec(hz.ir, b_.cov),
            id = dec(hz.id, b_.cov), rd = dec(hz.rd, b_.cov);

  r_zero_ = !spec.pays_from(State::r);
  if (!r_zero_) {
    r_.zero = false;
    r_.nodes = onset_nodes(0.0, H, ho);
    for (double w : r_.nodes) {
      auto br = base;
      add_caps(br, hz.rd, w);
      r_.tracks.push_back(solve_track(w, make_grid(w, H, h, br), [&, w](double x, double xm, double V) {
        const double m = val(rd, x, x - w);
        return curve.force(xm) * V - spec.rate(State::r, xm, xm - w, H) -
               m * (spec.lump(State::r, State::d, xm, xm - w, H) - V);
      }));
    }
  }

  auto solve_i = [&](Piece& piece, double lo, double hi, bool covered) {
    piece.zero = false;
    piece.nodes = onset_nodes(lo, hi, ho);
    for (double w : piece.nodes) {
      auto br = base;
      add_caps(br, hz.ir, w);
      add_caps(br, hz.id, w);
      br.push_back(w + spec.qualifying_period);
      piece.tracks.push_back(solve_track(w, make_grid(w, H, h, br), [&, w, covered](double x, double xm, double V) {
        const double u = x - w;
        const double mir = val(ir, x, u), mid = val(id, x, u);
        const double vr = r_zero_ ? 0.0 : r_.entry(x);
        return curve.force(xm) * V - spec.disability_rate(xm, xm - w, covered, H) -
               mir * (spec.lump(State::i, State::r, xm, u, H) + vr - V) -
               mid * (spec.lump(State::i, State::d, xm, u, H) - V);
      }));
    }
  };
  // onset exactly at the coverage end counts as covered; later onsets form their own piece
  solve_i(i_cov_, 0.0, cov_end, true);
  const bool uncovered_pays = !r_zero_ || std::any_of(spec.lump_sums.begin(), spec.lump_sums.end(), [](const LumpSum& l) {
    return l.from == State::i && l.amount != 0.0;
  });
  if (cov_end < H && uncovered_pays) solve_i(i_unc_, cov_end, H, false);

  auto br = base;
  add_caps(br, hz.ai, 0.0);
  add_caps(br, hz.ad, 0.0);
  a_ = solve_track(0.0, make_grid(0.0, H, h, br), [&](double x, double xm, double V) {
    const double mai = val(ai, x, x), mad = val(ad, x, x);
    const double vi = V_i_entry(x, spec.covered_onset(xm));
    return curve.force(xm) * V - spec.rate(State::a, xm, xm, H) -
           mai * (spec.lump(State::a, State::i, xm, xm, H) + vi - V) -
           mad * (spec.lump(State::a, State::d, xm, xm, H) - V);
  });
}

double ReserveGrid::V_r_entry(double x) const { return r_zero_ ? 0.0 : r_.entry(x); }

double ReserveGrid::V_i_entry(double x, bool covered) const {
  return covered ? i_cov_.entry(x) : i_unc_.entry(x);
}

double ReserveGrid::V(State j, double t, double u) const {
  if (t >= H_) return 0.0;
  switch (j) {
    case State::a: return a_.eval(t);
    case State::i: return V_i(t, u, b_.spec.covered_onset(t - u));
    case State::r: return r_zero_ ? 0.0 : r_.eval(t - u, u);
    case State::d: return 0.0;
  }
  return 0.0;
}

double ReserveGrid::V_i(double t, double u, bool covered) const {
  if (t >= H_) return 0.0;
  return covered ? i_cov_.eval(t - u, u) : i_unc_.eval(t - u, u);
}

ConditionalValue conditional_r(const ReserveGrid& grid, double t0, double u, double t) {
  const auto& b = grid.basis();
  if (t0 >= t) return {1.0, grid.V(State::r, t0, u)};
  const double entry = t0 - u;
  const double S = std::exp(-(b.hazards.rd ? cumulative_hazard_exact(*b.hazards.rd, t0, t, u, b.cov) : 0.0));
  if (!(S > 0.0)) throw DegenerateConditioning("conditional reserve: survival probability 0");
  const double v = stream_value(b.spec, b.curve, State::r, entry, t0, t, t0, grid.horizon()) +
                   b.curve.value_factor(t0, t) * grid.V(State::r, t, t - entry);
  return {S, v};
}

ConditionalValue conditional_i(const ReserveGrid& grid, double t0, double u, double t, int coverage) {
  const auto& b = grid.basis();
  const double w = t0 - u, H = grid.horizon();
  const bool covered = coverage < 0 ? b.spec.covered_onset(w) : coverage == 1;
  if (t0 >= t) return {1.0, grid.V_i(t0, u, covered)};
  const Dec ir = dec(b.hazards.ir, b.cov), id = dec(b.hazards.id, b.cov), rd = dec(b.hazards.rd, b.cov);
  auto br = grid.breaks();
  add_caps(br, b.hazards.ir, w);
  add_caps(br, b.hazards.id, w);
  br.push_back(w + b.spec.qualifying_period);
  const bool r_pays = b.spec.pays_from(State::r);
  const auto g = make_grid(t0, t, b.num.rk4_step, br);
  auto y = rk4_backward<2>(
      g, {1.0, grid.V_i(t, t - w, covered)},
      [&](double x, double xm, const std::array<double, 2>& y) {
        const double uu = x - w;
        const double mir = val(ir, x, uu), mid = val(id, x, uu);
        const double Sr = std::exp(-cum(rd, x, t, 0.0));
        double vr = 0.0;
        if (r_pays)
          vr = stream_value(b.spec, b.curve, State::r, x, x, t, x, H) +
               b.curve.value_factor(x, t) * grid.V(State::r, t, t - x);
        return std::array<double, 2>{
            (mir + mid) * y[0] - mir * Sr,
            (b.curve.force(xm) + mir + mid) * y[1] - b.spec.disability_rate(xm, xm - w, covered, H) * y[0] -
                mir * Sr * (b.spec.lump(State::i, State::r, xm, xm - w, H) + vr)};
      },
      [](size_t, const auto&, const auto&, const auto&, bool) {});
  if (!(y[0] > 0.0)) throw DegenerateConditioning("conditional reserve: survival probability 0");
  return {y[0], y[1] / y[0]};
}

ConditionalCache::ConditionalCache(const ReserveGrid& grid, double t, double lo)
    : t_(t), cov_end_(grid.basis().spec.coverage_period) {
  const double ho = grid.basis().num.onset_step;
  auto build = [&](double a, double b, bool covered) {
    if (!(b >= a)) return;
    std::vector<Node> nodes;
    long n = std::max<long>(2, static_cast<long>(std::ceil((b - a) / ho - 1e-9)));
    if (n % 2) ++n;
    for (long m = 0; m <= n; ++m) {
      const double s = m == n ? b : a + (b - a) * m / n;
      const ConditionalValue cv = conditional_i(grid, s, 0.0, t, covered ? 1 : 0);
      nodes.push_back({s, cv.survival, cv.survival * cv.value});
    }
    pieces_.push_back(std::move(nodes));
    covered_.push_back(covered);
  };
  const double c = cov_end_;
  if (lo <= c) build(lo, std::min(t, c), true);
  if (t > c) build(std::max(lo, c), t, false);
}

double ConditionalCache::lookup(double s, bool covered, bool want_w) const {
  for (size_t k = 0; k < pieces_.size(); ++k) {
    if (covered_[k] != covered && pieces_.size() > 1) continue;
    const auto& p = pieces_[k];
    auto y = [&](size_t m) { return want_w ? p[m].W : p[m].S; };
    if (p.size() == 1) return y(0);
    // cubic Lagrange on the four uniform nodes around s
    const double h = p[1].s - p[0].s;
    if (!(h > 0.0)) return y(0);
    const double pos = std::clamp((s - p.front().s) / h, 0.0, static_cast<double>(p.size() - 1));
    long m = std::clamp<long>(static_cast<long>(std::floor(pos)) - 1, 0, static_cast<long>(p.size()) - 4);
    if (p.size() < 4) m = 0;
    const size_t cnt = std::min<size_t>(4, p.size());
    double total = 0.0;
    for (size_t a = 0; a < cnt; ++a) {
      double w = 1.0;
      for (size_t b = 0; b < cnt; ++b)
        if (b != a) w *= (pos - (m + b)) / static_cast<double>(static_cast<long>(a) - static_cast<long>(b));
      total += w * y(m + a);
    }
    return total;
  }
  return 0.0;
}

double ConditionalCache::S_i(double s, bool covered) const { return lookup(s, covered, false); }
double ConditionalCache::W_i(double s, bool covered) const { return lookup(s, covered, true); }
double ConditionalCache::V_i(double s) const {
  const bool covered = s <= cov_end_ + 1e-12;
  return W_i(s, covered) / S_i(s, covered);
}

ConditionalValue conditional_a(const ReserveGrid& grid, const ConditionalCache& cache, double t0) {
  const auto& b = grid.basis();
  const double t = cache.t();
  if (t0 >= t) return {1.0, grid.V(State::a, t0, t0)};
  const double H = grid.horizon();
  const Dec ai = dec(b.hazards.ai, b.cov), ad = dec(b.hazards.ad, b.cov);
  auto br = grid.breaks();
  add_caps(br, b.hazards.ai, 0.0);
  add_caps(br, b.hazards.ad, 0.0);
  const auto g = make_grid(t0, t, b.num.rk4_step, br);
  auto y = rk4_backward<2>(
      g, {1.0, grid.V(State::a, t, t)},
      [&](double x, double xm, const std::array<double, 2>& y) {
        const double mai = val(ai, x, x), mad = val(ad, x, x);
        const bool covered = b.spec.covered_onset(xm);
        const double Si = cache.S_i(x, covered), Wi = cache.W_i(x, covered);
        return std::array<double, 2>{
            (mai + mad) * y[0] - mai * Si,
            (b.curve.force(xm) + mai + mad) * y[1] - b.spec.rate(State::a, xm, xm, H) * y[0] -
                mai * (b.spec.lump(State::a, State::i, xm, xm, H) * Si + Wi)};
      },
      [](size_t, const auto&, const auto&, const auto&, bool) {});
  if (!(y[0] > 0.0)) throw DegenerateConditioning("conditional reserve: survival probability 0");
  return {y[0], y[1] / y[0]};
}

double statewise_reserve(State j, double t, double u, const PaymentSpec& spec, const InterestCurve& curve,
                         const HazardSet& hz, const CovariateVector& cov, const Numerics& num) {
  if (u > t + 1e-12 || u < 0.0) throw InvalidArgument("statewise_reserve: need 0 <= u <= t");
  ReserveGrid g({hz, cov, spec, curve, num});
  return g.V(j, t, u);
}

double conditional_reserve(State j, double t0, double u, double t, const PaymentSpec& spec,
                           const InterestCurve& curve, const HazardSet& hz, const CovariateVector& cov,
                           const Numerics& num) {
  if (u > t0 + 1e-12 || u < 0.0) throw InvalidArgument("conditional_reserve: need 0 <= u <= t0");
  ReserveGrid g({hz, cov, spec, curve, num});
  if (t0 >= t) return g.V(j, t0, u);
  switch (j) {
    case State::a: {
      ConditionalCache cache(g, t, t0);
      return conditional_a(g, cache, t0).value;
    }
    case State::i: return conditional_i(g, t0, u, t).value;
    case State::r: return conditional_r(g, t0, u, t).value;
    case State::d: return 0.0;
  }
  return 0.0;
}

}  // namespace reng

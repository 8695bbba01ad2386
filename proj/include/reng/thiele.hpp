#pragma once
#include <memory>
#include <vector>

#include "reng/payments.hpp"

namespace reng {

// One backward ODE solution along a fixed entry time, with cubic Hermite evaluation.
struct Track {
  double origin = 0.0;
  std::vector<double> x, v, dl, dr;  // nodes, values, step-end derivatives

  double eval(double t) const;
  double at_origin() const { return v.empty() ? 0.0 : v.front(); }
};

struct ValuationBasis {
  HazardSet hazards;
  CovariateVector cov;
  PaymentSpec spec;
  InterestCurve curve;
  Numerics num;
};

// State-wise valid-time reserves V_a, V_i, V_r for one covariate class.
class ReserveGrid {
 public:
  explicit ReserveGrid(ValuationBasis basis);

  double V(State j, double t, double u) const;
  double V_i(double t, double u, bool covered) const;
  double V_r_entry(double x) const;
  // V_i(x, 0); covered selects the onset piece at the coverage boundary.
  double V_i_entry(double x, bool covered) const;
  double horizon() const { return H_; }
  const ValuationBasis& basis() const { return b_; }
  std::vector<double> breaks() const;  // payment, interest and coverage discontinuities

 private:
  struct Piece {
    std::vector<double> nodes;
    std::vector<Track> tracks;
    bool zero = false;
    double eval(double onset, double u) const;
    double entry(double x) const;
  };
  ValuationBasis b_;
  double H_ = 0.0;
  Piece r_, i_cov_, i_unc_;
  Track a_;
  bool r_zero_ = true;
};

// Survival-conditioned i-reserves for onsets in [lo, t], conditioned on tau_d > t.
class ConditionalCache {
 public:
  ConditionalCache(const ReserveGrid& grid, double t, double lo = 0.0);

  double t() const { return t_; }
  double S_i(double s, bool covered) const;   // P(alive at t | i at s, duration 0)
  double W_i(double s, bool covered) const;   // S_i * V_i(s, 0; tau_d > t)
  double V_i(double s) const;
  struct Node {
    double s, S, W;
  };
  // Simpson-ready onset nodes, one piece per side of the coverage end.
  const std::vector<std::vector<Node>>& pieces() const { return pieces_; }
  bool covered_piece(size_t k) const { return covered_[k]; }

 private:
  double t_;
  double cov_end_;
  std::vector<std::vector<Node>> pieces_;
  std::vector<bool> covered_;
  double lookup(double s, bool covered, bool want_w) const;
};

struct ConditionalValue {
  double survival = 1.0;  // P(tau_d > t | state at t0)
  double value = 0.0;     // conditional reserve
};

// Joint survival/reserve solve along one onset from t back to t0.
// coverage: -1 decides from the onset, 0 forces uncovered, 1 forces covered.
ConditionalValue conditional_i(const ReserveGrid& grid, double t0, double u, double t, int coverage = -1);
ConditionalValue conditional_r(const ReserveGrid& grid, double t0, double u, double t);
ConditionalValue conditional_a(const ReserveGrid& grid, const ConditionalCache& cache, double t0);

double statewise_reserve(State j, double t, double u, const PaymentSpec& spec, const InterestCurve& curve,
                         const HazardSet& hz, const CovariateVector& cov, const Numerics& num = {});
double conditional_reserve(State j, double t0, double u, double t, const PaymentSpec& spec,
                           const InterestCurve& curve, const HazardSet& hz, const CovariateVector& cov,
                           const Numerics& num = {});

}  // namespace reng

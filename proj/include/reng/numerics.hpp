#pragma once
#include <algorithm>
#include <cmath>
#include <vector>

namespace reng {

struct Numerics {
  double simpson_step = 1.0 / 256.0;
  double rk4_step = 1.0 / 52.0;
  double onset_step = 1.0 / 52.0;
  double omega = 110.0;
  double root_tolerance = 1e-8;

  void validate() const;
};

// Composite Simpson with at least two panels and an even panel count.
template <class F>
double simpson(F&& f, double a, double b, double h) {
  if (b <= a) return 0.0;
  long n = std::max<long>(2, static_cast<long>(std::ceil((b - a) / h - 1e-9)));
  if (n % 2) ++n;
  const double dx = (b - a) / n;
  double s = f(a) + f(b);
  for (long k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * dx);
  return s * dx / 3.0;
}

// Grid from x0 to x1 with steps of at most h, hitting every breakpoint inside.
std::vector<double> make_grid(double x0, double x1, double h, std::vector<double> breaks);

// Cumulative fourth-order integral over uniformly spaced samples.
// out[n] approximates the integral from x[0] to x[n].
std::vector<double> cumulative_simpson(const std::vector<double>& y, double dx);

}  // namespace reng

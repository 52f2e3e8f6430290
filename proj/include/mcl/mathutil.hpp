#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace mcl {

// Standard normal tail Q(x) = P{G > x} and CDF Phi(x).
inline double q_func(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }
inline double phi_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
inline double phi_pdf(double x) {
  return std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a,
                            double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  if (depth <= 0) return left + right;
  if (std::fabs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature on [a,b].
inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-12, int max_depth = 40) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = detail::simpson(f, a, b, fa, fm, fb);
  return detail::adaptive_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// E_{G ~ N(0,1)}[ f(G) ], integrating over +-9 standard deviations.
inline double gaussian_expectation(const std::function<double(double)>& f,
                                   double tol = 1e-12) {
  return integrate([&f](double x) { return phi_pdf(x) * f(x); }, -9.0, 9.0,
                   tol);
}

}  // namespace mcl

#pragma once

// Independent reference computations used only by the test suites. None of
// these call into the closed-form propagation they are checking.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "pwcheat/piecewise.hpp"
#include "pwcheat/rng.hpp"

namespace pwcheat::oracle {

/// (v, a v') at x = 1 from adaptive Dormand-Prince integration of
/// v' = F/a, F' = lambda v, restarted at every breakpoint.
inline std::array<double, 2> ode_v_oracle(const PiecewiseFunction& a, double lambda, double tol = 1e-13) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 2>;
  State y{0.0, 1.0};
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
  for (std::size_t j = 0; j < a.pieces(); ++j) {
    const double aj = a.values()[j];
    auto rhs = [aj, lambda](const State& s, State& ds, double) {
      ds[0] = s[1] / aj;
      ds[1] = lambda * s[0];
    };
    const double w = a.width(j);
    if (w > 0.0) odeint::integrate_adaptive(stepper, rhs, y, a.left(j), a.right(j), w / 64.0);
  }
  return y;
}

inline double ode_transfer_oracle(const PiecewiseFunction& a, double lambda) {
  const auto y = ode_v_oracle(a, lambda);
  return y[0] / y[1];
}

/// psi and psi' at x from classical RK4 on a uniform grid of `steps` per unit
/// length, with step boundaries snapped to breakpoints.
inline std::array<double, 2> rk4_psi_oracle(const PiecewiseFunction& q2, double k, double x, int steps = 4000) {
  std::array<double, 2> y{1.0, 0.0};
  for (std::size_t j = 0; j < q2.pieces() && q2.left(j) < x; ++j) {
    const double lo = q2.left(j);
    const double hi = std::min(q2.right(j), x);
    const int n = std::max(1, static_cast<int>(std::ceil(steps * (hi - lo))));
    const double h = (hi - lo) / n;
    const double c = k * k * q2.values()[j];
    auto f = [c](const std::array<double, 2>& s) { return std::array<double, 2>{s[1], c * s[0]}; };
    for (int i = 0; i < n; ++i) {
      const auto k1 = f(y);
      const auto k2 = f({y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]});
      const auto k3 = f({y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]});
      const auto k4 = f({y[0] + h * k3[0], y[1] + h * k3[1]});
      y[0] += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      y[1] += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    }
  }
  return y;
}

/// Adaptive Gauss-Kronrod integral of f over [lo, hi].
template <class F>
double adaptive_integral(F f, double lo, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-14);
}

/// Random profile with 1..max_pieces pieces, widths >= min_width and values
/// log-uniform in [lo, hi].
inline PiecewiseFunction random_profile(NormalStream& rng, int max_pieces, double lo, double hi,
                                        double min_width = 0.05) {
  const int n = 1 + static_cast<int>(rng.uniform() * max_pieces * 0.999999);
  std::vector<double> widths(n);
  double total = 0.0;
  for (double& w : widths) total += (w = rng.uniform());
  std::vector<double> xs{0.0};
  for (int j = 0; j < n; ++j) xs.push_back(xs.back() + min_width + (1.0 - n * min_width) * widths[j] / total);
  xs.back() = 1.0;
  std::vector<double> vs(n);
  for (int j = 0; j < n; ++j) {
    do {
      vs[j] = std::exp(rng.uniform(std::log(lo), std::log(hi)));
    } while (j > 0 && std::abs(std::log(vs[j] / vs[j - 1])) < 0.1);
  }
  return {xs, vs};
}

}  // namespace pwcheat::oracle

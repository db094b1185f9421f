#pragma once

// Exact Laplace-domain solvers for the rod problem with piecewise-constant
// conductivity.
//
// Two equivalent second-order problems are solved by propagating closed-form
// cosh/sinh solutions piece by piece:
//
//   psi-form:  psi'' = k^2 q^2(x) psi,      psi(0) = 1, psi'(0) = 0
//              (psi, psi') continuous across breakpoints
//   v-form:    (a v')' = lambda v,          v(0) = 0, a v'(0) = 1
//              (v, a v') continuous across breakpoints
//
// with q^2 = 1/a and lambda = k^2. The two are linked by psi = a v'.
//
// Both are instances of  y1' = y2 / m,  y2' = m r^2 y1  on a piece with constant
// rate r and weight m (psi-form: m = 1, r = k q; v-form: m = a, r = sqrt(lambda/a)).
// Across a piece of width w the exact map is
//
//   y1 <- y1 cosh(rw) + (y2/m) sinh(rw)/r
//   y2 <- y2 cosh(rw) + m r^2 y1 sinh(rw)/r
//
// evaluated with the factor exp(rw) moved into a running log scale, so no
// intermediate ever overflows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "pwcheat/errors.hpp"
#include "pwcheat/piecewise.hpp"
#include "pwcheat/scaled.hpp"

namespace pwcheat {

/// State (y1, y2) at position x; true values are mantissas times exp(log_scale).
///
/// For psi solutions y1 = psi and y2 = psi'. For v solutions y1 = v and y2 = a v'
/// (the heat flux).
struct NodeState {
  double x = 0.0;
  double value = 0.0;
  double flux = 0.0;
  double log_scale = 0.0;

  Scaled scaled_value() const { return {value, log_scale}; }
  Scaled scaled_flux() const { return {flux, log_scale}; }
  double log_value() const { return log_scale + std::log(value); }
};

/// y1 on one piece written as plus*e^{r(x-left)} + minus*e^{-r(x-left)}, both
/// coefficients carrying the shared log scale.
struct IntervalCoefficients {
  double left = 0.0;
  double width = 0.0;
  double rate = 0.0;
  double plus = 0.0;
  double minus = 0.0;
  double log_scale = 0.0;
};

namespace detail {

inline void rebalance(NodeState& s) {
  const double big = std::max(std::abs(s.value), std::abs(s.flux));
  if (big == 0.0 || !std::isfinite(big)) return;
  int exponent = 0;
  std::frexp(big, &exponent);
  if (exponent > -300 && exponent < 300) return;
  s.value = std::ldexp(s.value, -exponent);
  s.flux = std::ldexp(s.flux, -exponent);
  s.log_scale += exponent * std::log(2.0);
}

/// Exact advance of y1' = y2/m, y2' = m r^2 y1 over width w >= 0.
inline NodeState advance(const NodeState& s, double rate, double weight, double width) {
  const double two_rw = 2.0 * rate * width;
  const double cosh_part = 0.5 * (1.0 + std::exp(-two_rw));           // cosh(rw) e^{-rw}
  const double sinh_over_rate = rate > 0.0 ? -std::expm1(-two_rw) / (2.0 * rate) : width;  // sinh(rw) e^{-rw} / r
  NodeState out;
  out.x = s.x + width;
  out.value = s.value * cosh_part + (s.flux / weight) * sinh_over_rate;
  out.flux = s.flux * cosh_part + weight * rate * rate * s.value * sinh_over_rate;
  out.log_scale = s.log_scale + rate * width;
  rebalance(out);
  return out;
}

}  // namespace detail

/// Solution of a piecewise-constant-coefficient problem, stored at every
/// breakpoint together with per-piece exponential coefficients.
class LayeredSolution {
 public:
  LayeredSolution(std::vector<double> breakpoints, std::vector<double> rates, std::vector<double> weights,
                  NodeState start)
      : breakpoints_(std::move(breakpoints)), rates_(std::move(rates)), weights_(std::move(weights)) {
    nodes_.reserve(breakpoints_.size());
    nodes_.push_back(start);
    for (std::size_t j = 0; j < rates_.size(); ++j) {
      const NodeState& s = nodes_.back();
      IntervalCoefficients c{breakpoints_[j], breakpoints_[j + 1] - breakpoints_[j], rates_[j], s.value, 0.0,
                             s.log_scale};
      if (rates_[j] > 0.0) {
        const double scaled_slope = s.flux / (weights_[j] * rates_[j]);
        c.plus = 0.5 * (s.value + scaled_slope);
        c.minus = 0.5 * (s.value - scaled_slope);
      }
      intervals_.push_back(c);
      NodeState next = detail::advance(s, rates_[j], weights_[j], c.width);
      next.x = breakpoints_[j + 1];
      if (!std::isfinite(next.value) || !std::isfinite(next.flux) || !std::isfinite(next.log_scale))
        throw NumericalError("non-finite state while propagating across piece " + std::to_string(j));
      nodes_.push_back(next);
    }
  }

  std::span<const NodeState> nodes() const { return nodes_; }
  std::span<const IntervalCoefficients> intervals() const { return intervals_; }
  const NodeState& node(std::size_t j) const { return nodes_.at(j); }
  const NodeState& end() const { return nodes_.back(); }
  double rate(std::size_t piece) const { return rates_.at(piece); }
  double weight(std::size_t piece) const { return weights_.at(piece); }
  std::size_t pieces() const { return rates_.size(); }

  /// Piece holding x (right-limit convention at breakpoints).
  std::size_t piece_index(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("position " + std::to_string(x) + " outside [0,1]");
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
    const auto j = static_cast<std::size_t>(it - breakpoints_.begin());
    return std::min(j == 0 ? 0 : j - 1, pieces() - 1);
  }

  /// State at an arbitrary x in [0,1].
  NodeState at(double x) const {
    const std::size_t j = piece_index(x);
    NodeState s = detail::advance(nodes_[j], rates_[j], weights_[j], x - breakpoints_[j]);
    s.x = x;
    return s;
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> rates_;
  std::vector<double> weights_;
  std::vector<NodeState> nodes_;
  std::vector<IntervalCoefficients> intervals_;
};

/// psi(x,k) with psi(0)=1, psi'(0)=0 for psi'' = k^2 q^2 psi.
class PsiSolution : public LayeredSolution {
 public:
  PsiSolution(double k, PiecewiseFunction q_squared, LayeredSolution solution)
      : LayeredSolution(std::move(solution)), k_(k), q_squared_(std::move(q_squared)) {}

  double k() const { return k_; }
  const PiecewiseFunction& q_squared() const { return q_squared_; }
  /// sqrt(q^2) on the piece.
  double q(std::size_t piece) const { return std::sqrt(q_squared_.values()[piece]); }

 private:
  double k_;
  PiecewiseFunction q_squared_;
};

/// v(x,lambda) with v(0)=0 and flux a v' normalized at x=0; NodeState::flux holds a v'.
class VSolution : public LayeredSolution {
 public:
  VSolution(double lambda, PiecewiseFunction conductivity, LayeredSolution solution)
      : LayeredSolution(std::move(solution)), lambda_(lambda), conductivity_(std::move(conductivity)) {}

  double lambda() const { return lambda_; }
  const PiecewiseFunction& conductivity() const { return conductivity_; }

  /// v'(x) = (a v')/a, using the piece to the right at a breakpoint.
  Scaled derivative_at(double x) const {
    const NodeState s = at(x);
    return {s.flux / conductivity_(x), s.log_scale};
  }

 private:
  double lambda_;
  PiecewiseFunction conductivity_;
};

inline PsiSolution solve_psi(const PiecewiseFunction& q_squared, double k) {
  if (!(k >= 0.0) || !std::isfinite(k)) throw DomainError("spectral parameter k must be finite and >= 0");
  std::vector<double> rates;
  rates.reserve(q_squared.pieces());
  for (double q2 : q_squared.values()) {
    if (!(q2 > 0.0)) throw ValidationError("q^2 must be positive on every piece");
    rates.push_back(k * std::sqrt(q2));
  }
  std::vector<double> weights(q_squared.pieces(), 1.0);
  LayeredSolution solution(q_squared.breakpoints(), std::move(rates), std::move(weights), NodeState{0.0, 1.0, 0.0, 0.0});
  return {k, q_squared, std::move(solution)};
}

/// Solves (a v')' = lambda v with v(0) = 0 and a v'(0) = initial_flux.
inline VSolution solve_v(const ConductivityProfile& a, double lambda, double initial_flux = 1.0) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be finite and > 0");
  if (!(initial_flux > 0.0)) throw DomainError("initial flux normalization must be positive");
  std::vector<double> rates;
  rates.reserve(a.pieces());
  for (double ai : a.values()) rates.push_back(std::sqrt(lambda / ai));
  LayeredSolution solution(a.breakpoints(), std::move(rates), a.values(), NodeState{0.0, 0.0, initial_flux, 0.0});
  return {lambda, a.conductivity(), std::move(solution)};
}

/// H(lambda) = v(1) / (a v'(1)) = G(lambda) / F(lambda).
inline double transfer_function(const ConductivityProfile& a, double lambda) {
  const NodeState& tip = solve_v(a, lambda).end();
  return tip.value / tip.flux;
}

/// Largest relative defect of psi against the Volterra form
///   psi(x) = 1 + k^2 int_0^x (x - s) q^2(s) psi(s) ds
/// over the breakpoints and a 1/32 grid. The integral uses 8-point
/// Gauss-Legendre panels aligned with the pieces, about `quadrature_points`
/// nodes per unit length.
inline double psi_integral_residual(const PiecewiseFunction& q_squared, double k, int quadrature_points) {
  if (quadrature_points < 16) throw ValidationError("quadrature_points must be >= 16");
  const PsiSolution psi = solve_psi(q_squared, k);
  if (k == 0.0) return 0.0;

  using Rule = boost::math::quadrature::gauss<double, 8>;
  const auto& abscissa = Rule::abscissa();
  const auto& weights = Rule::weights();

  std::vector<double> grid;
  for (int i = 1; i <= 32; ++i) grid.push_back(i / 32.0);
  grid = union_breakpoints(grid, q_squared.breakpoints());

  double worst = 0.0;
  for (double x : grid) {
    if (x == 0.0) continue;
    const double log_psi_x = psi.at(x).log_value();
    double integral_over_psi = 0.0;  // int_0^x (x-s) q^2 psi(s) ds / psi(x)
    for (std::size_t j = 0; j < q_squared.pieces() && q_squared.left(j) < x; ++j) {
      const double lo = q_squared.left(j);
      const double hi = std::min(q_squared.right(j), x);
      if (hi <= lo) continue;
      const double q2 = q_squared.values()[j];
      const int panels = std::max(1, static_cast<int>(std::lround(quadrature_points * (hi - lo) / 8.0)));
      const double h = (hi - lo) / panels;
      for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * h;
        for (std::size_t i = 0; i < abscissa.size(); ++i) {
          for (double side : {-1.0, 1.0}) {
            if (abscissa[i] == 0.0 && side > 0.0) continue;
            const double s = mid + side * abscissa[i] * 0.5 * h;
            const NodeState at_s = detail::advance(psi.node(j), psi.rate(j), 1.0, s - lo);
            integral_over_psi += weights[i] * 0.5 * h * (x - s) * q2 * std::exp(at_s.log_value() - log_psi_x);
          }
        }
      }
    }
    const double defect = std::abs(1.0 - std::exp(-log_psi_x) - k * k * integral_over_psi);
    worst = std::max(worst, defect);
  }
  return worst;
}

}  // namespace pwcheat

#pragma once

// Time-domain simulation of u_t = (a u_x)_x on [0,1] with u(x,0) = 0,
// u(0,t) = 0 and prescribed heat flux a u_x(1,t) = f(t), and the trapezoidal
// Laplace transform of the sampled boundary signals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pwcheat/dataset.hpp"
#include "pwcheat/errors.hpp"
#include "pwcheat/laplace_forward.hpp"
#include "pwcheat/piecewise.hpp"
#include "pwcheat/rng.hpp"

namespace pwcheat {

/// Boundary flux f(t).
///
/// At a jump, value() returns the mean of the one-sided limits; the time
/// stepper never samples at a jump and instead uses exact interval averages.
class FluxSpec {
 public:
  enum class Kind { constant, pulse, custom };

  static FluxSpec constant(double amplitude) { return FluxSpec(Kind::constant, amplitude, 0.0, 0.0, {}); }

  static FluxSpec pulse(double amplitude, double t_on, double t_off) {
    if (!(t_on >= 0.0) || !(t_off > t_on)) throw ValidationError("pulse needs 0 <= t_on < t_off");
    return FluxSpec(Kind::pulse, amplitude, t_on, t_off, {});
  }

  /// Piecewise-linear through (t, f) points with ascending t >= 0, zero outside.
  static FluxSpec custom(std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 2) throw ValidationError("custom flux needs at least two samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!std::isfinite(samples[i].first) || !std::isfinite(samples[i].second) || samples[i].first < 0.0)
        throw ValidationError("custom flux samples must be finite with t >= 0");
      if (i > 0 && !(samples[i].first > samples[i - 1].first))
        throw ValidationError("custom flux sample times must increase");
    }
    const double first = samples.front().first;
    const double last = samples.back().first;
    return FluxSpec(Kind::custom, 1.0, first, last, std::move(samples));
  }

  Kind kind() const { return kind_; }
  double amplitude() const { return amplitude_; }
  double t_on() const { return t_on_; }
  double t_off() const { return t_off_; }
  const std::vector<std::pair<double, double>>& custom_samples() const { return custom_; }

  /// f identically zero; such data carry no information about a(x).
  bool is_zero() const {
    if (kind_ != Kind::custom) return amplitude_ == 0.0;
    return std::all_of(custom_.begin(), custom_.end(), [](const auto& s) { return s.second == 0.0; });
  }

  double value(double t) const {
    if (t <= 0.0) return right_limit(0.0);
    return 0.5 * (left_limit(t) + right_limit(t));
  }

  /// Exact integral of f over [t0, t1].
  double integral(double t0, double t1) const {
    switch (kind_) {
      case Kind::constant:
        return amplitude_ * (std::max(t1, 0.0) - std::max(t0, 0.0));
      case Kind::pulse:
        return amplitude_ * std::max(0.0, std::min(t1, t_off_) - std::max(t0, t_on_));
      case Kind::custom: {
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < custom_.size(); ++i) {
          const double lo = std::max(t0, custom_[i].first);
          const double hi = std::min(t1, custom_[i + 1].first);
          if (hi > lo) sum += 0.5 * (hi - lo) * (interpolate(i, lo) + interpolate(i, hi));
        }
        return sum;
      }
    }
    return 0.0;
  }

  double average(double t0, double t1) const { return integral(t0, t1) / (t1 - t0); }

  /// Times where f jumps.
  std::vector<double> jumps() const {
    std::vector<double> out;
    auto add = [&](double t, double size) {
      if (size != 0.0) out.push_back(t);
    };
    switch (kind_) {
      case Kind::constant:
        add(0.0, amplitude_);
        break;
      case Kind::pulse:
        add(t_on_, amplitude_);
        add(t_off_, amplitude_);
        break;
      case Kind::custom:
        add(custom_.front().first, custom_.front().second);
        add(custom_.back().first, custom_.back().second);
        break;
    }
    return out;
  }

 private:
  FluxSpec(Kind kind, double amplitude, double t_on, double t_off, std::vector<std::pair<double, double>> custom)
      : kind_(kind), amplitude_(amplitude), t_on_(t_on), t_off_(t_off), custom_(std::move(custom)) {
    if (!std::isfinite(amplitude_)) throw ValidationError("flux amplitude must be finite");
  }

  double interpolate(std::size_t i, double t) const {
    const auto& [ta, fa] = custom_[i];
    const auto& [tb, fb] = custom_[i + 1];
    return fa + (fb - fa) * (t - ta) / (tb - ta);
  }

  // Limits of f at t from the left / right.
  double left_limit(double t) const {
    switch (kind_) {
      case Kind::constant:
        return t > 0.0 ? amplitude_ : 0.0;
      case Kind::pulse:
        return (t > t_on_ && t <= t_off_) ? amplitude_ : 0.0;
      case Kind::custom:
        return (t > t_on_ && t <= t_off_) ? at_custom(t) : 0.0;
    }
    return 0.0;
  }
  double right_limit(double t) const {
    switch (kind_) {
      case Kind::constant:
        return t >= 0.0 ? amplitude_ : 0.0;
      case Kind::pulse:
        return (t >= t_on_ && t < t_off_) ? amplitude_ : 0.0;
      case Kind::custom:
        return (t >= t_on_ && t < t_off_) ? at_custom(t) : 0.0;
    }
    return 0.0;
  }
  double at_custom(double t) const {
    const auto it = std::upper_bound(custom_.begin(), custom_.end(), t,
                                     [](double v, const auto& s) { return v < s.first; });
    const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - custom_.begin() - 1, 0));
    return interpolate(std::min(i, custom_.size() - 2), t);
  }

  Kind kind_;
  double amplitude_;
  double t_on_;
  double t_off_;
  std::vector<std::pair<double, double>> custom_;
};

/// f(t_m), g(t_m) at t_m = m dt, m = 0..M.
struct TimeSeries {
  double dt = 0.0;
  std::vector<double> f;
  std::vector<double> g;

  std::size_t size() const { return f.size(); }
  double t(std::size_t m) const { return static_cast<double>(m) * dt; }
  double t_end() const { return t(size() - 1); }

  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("time series needs dt > 0");
    if (f.size() != g.size() || f.empty()) throw ValidationError("time series f and g must have equal nonzero length");
    if (g.front() != 0.0) throw ValidationError("time series must start from g(0) = 0");
    for (std::size_t m = 0; m < f.size(); ++m)
      if (!std::isfinite(f[m]) || !std::isfinite(g[m])) throw ValidationError("time series values must be finite");
  }
};

/// Cell-centred finite-volume grid whose cell faces include every breakpoint.
struct FvGrid {
  std::vector<double> centers;
  std::vector<double> widths;
  std::vector<double> conductivity;

  std::size_t size() const { return centers.size(); }

  /// Discrete energy sum_i h_i u_i^2.
  double energy(std::span<const double> u) const {
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) e += widths[i] * u[i] * u[i];
    return e;
  }
};

/// Distributes about nx cells over the pieces of a, at least two per piece.
inline FvGrid make_grid(const ConductivityProfile& a, int nx) {
  if (nx < 2 * static_cast<int>(a.pieces()))
    throw ValidationError("nx = " + std::to_string(nx) + " cannot resolve " + std::to_string(a.pieces()) +
                          " pieces (need nx >= 2 per piece)");
  FvGrid grid;
  for (std::size_t j = 0; j < a.pieces(); ++j) {
    const double w = a.conductivity().width(j);
    if (w <= kBreakpointTolerance) throw ValidationError("piece too narrow to align a grid to");
    const int cells = std::max(2, static_cast<int>(std::lround(nx * w)));
    const double h = w / cells;
    for (int c = 0; c < cells; ++c) {
      grid.centers.push_back(a.conductivity().left(j) + (c + 0.5) * h);
      grid.widths.push_back(h);
      grid.conductivity.push_back(a.values()[j]);
    }
  }
  return grid;
}

using StateObserver = std::function<void(double t, std::span<const double> u, const FvGrid& grid)>;

namespace detail {

/// Thomas algorithm for a constant tridiagonal matrix, factored once.
class TridiagonalSolver {
 public:
  TridiagonalSolver(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)), pivot_(diag.size()) {
    pivot_[0] = diag[0];
    for (std::size_t i = 1; i < diag.size(); ++i) pivot_[i] = diag[i] - lower_[i] * upper_[i - 1] / pivot_[i - 1];
  }

  void solve(std::vector<double>& rhs) const {
    const std::size_t n = rhs.size();
    for (std::size_t i = 1; i < n; ++i) rhs[i] -= lower_[i] / pivot_[i - 1] * rhs[i - 1];
    rhs[n - 1] /= pivot_[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper_[i] * rhs[i + 1]) / pivot_[i];
  }

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> pivot_;
};

}  // namespace detail

/// Simulates the rod and samples g(t) = u(1,t).
///
/// Space: finite volumes with interface conductance 1/(h_L/2a_L + h_R/2a_R),
/// the harmonic average that is exact for breakpoint-aligned cells. u(0)=0 is
/// imposed through the boundary half-cell conductance, f(t) enters as the
/// flux through the face at x=1.
///
/// Time: Crank-Nicolson. The step starting at t=0 and every step holding a
/// jump of f is replaced by two backward-Euler half steps (Rannacher
/// smoothing). Each step receives the exact average of f over its interval.
inline TimeSeries simulate(const ConductivityProfile& a, const FluxSpec& flux, int nx, double dt, double t_end,
                           const StateObserver& observer = {}) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw ValidationError("simulate needs dt > 0 and T > 0");
  const FvGrid grid = make_grid(a, nx);
  const std::size_t n = grid.size();

  // Face conductances; face 0 is the Dirichlet boundary at x=0.
  std::vector<double> conductance(n);
  conductance[0] = 2.0 * grid.conductivity[0] / grid.widths[0];
  for (std::size_t i = 1; i < n; ++i)
    conductance[i] = 1.0 / (0.5 * grid.widths[i - 1] / grid.conductivity[i - 1] + 0.5 * grid.widths[i] / grid.conductivity[i]);

  // Stiffness A (symmetric positive definite): (A u)_i = -(flux_{i+1/2} - flux_{i-1/2}).
  std::vector<double> a_lower(n, 0.0), a_diag(n, 0.0), a_upper(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    a_diag[i] += conductance[i];
    if (i + 1 < n) {
      a_diag[i] += conductance[i + 1];
      a_upper[i] = -conductance[i + 1];
      a_lower[i + 1] = -conductance[i + 1];
    }
  }
  // Both CN and the backward-Euler half steps solve with M + dt/2 A.
  const double half = 0.5 * dt;
  std::vector<double> lhs_lower(n), lhs_diag(n), lhs_upper(n);
  for (std::size_t i = 0; i < n; ++i) {
    lhs_lower[i] = half * a_lower[i];
    lhs_diag[i] = grid.widths[i] + half * a_diag[i];
    lhs_upper[i] = half * a_upper[i];
  }
  const detail::TridiagonalSolver solver(lhs_lower, lhs_diag, lhs_upper);

  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  const std::vector<double> jumps = flux.jumps();
  const double last_half_width = 0.5 * grid.widths.back() / grid.conductivity.back();

  TimeSeries series;
  series.dt = dt;
  series.f.reserve(steps + 1);
  series.g.reserve(steps + 1);
  series.f.push_back(flux.value(0.0));
  series.g.push_back(0.0);

  std::vector<double> u(n, 0.0), rhs(n);
  if (observer) observer(0.0, u, grid);

  for (std::size_t step = 0; step < steps; ++step) {
    const double t0 = step * dt;
    const double t1 = (step + 1) * dt;
    const bool smooth_start =
        step == 0 || std::any_of(jumps.begin(), jumps.end(), [&](double tj) { return tj >= t0 - 1e-12 * dt && tj < t1 - 1e-12 * dt; });
    if (smooth_start) {
      for (const auto& [lo, hi] : {std::pair{t0, t0 + half}, std::pair{t0 + half, t1}}) {
        for (std::size_t i = 0; i < n; ++i) rhs[i] = grid.widths[i] * u[i];
        rhs[n - 1] += half * flux.average(lo, hi);
        solver.solve(rhs);
        u.swap(rhs);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double au = a_diag[i] * u[i];
        if (i > 0) au += a_lower[i] * u[i - 1];
        if (i + 1 < n) au += a_upper[i] * u[i + 1];
        rhs[i] = grid.widths[i] * u[i] - half * au;
      }
      rhs[n - 1] += dt * flux.average(t0, t1);
      solver.solve(rhs);
      u.swap(rhs);
    }
    if (!std::isfinite(u.back()) || !std::isfinite(u.front()))
      throw NumericalError("non-finite temperature at t = " + std::to_string(t1));
    const double f1 = flux.value(t1);
    series.f.push_back(f1);
    series.g.push_back(u.back() + f1 * last_half_width);
    if (observer) observer(t1, u, grid);
  }
  return series;
}

enum class Signal { f, g };

struct LaplaceEstimate {
  double value = 0.0;
  /// Bound on the omitted integral over (t_end, inf), assuming |signal| does
  /// not grow past its last sample.
  double tail_bound = 0.0;
};

/// Trapezoidal estimate of int_0^inf e^{-lambda t} s(t) dt from samples.
///
/// tail_tol < 0 selects the default 1e-8 * max|s|. Throws NumericalError when
/// the last sample exceeds tail_tol and the tail bound exceeds 0.1% of the
/// integral.
inline LaplaceEstimate laplace_of_samples(const TimeSeries& series, Signal which, double lambda,
                                          double tail_tol = -1.0) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
  series.validate();
  const std::vector<double>& s = which == Signal::f ? series.f : series.g;
  double peak = 0.0;
  for (double v : s) peak = std::max(peak, std::abs(v));
  if (tail_tol < 0.0) tail_tol = 1e-8 * peak;

  const std::size_t last = s.size() - 1;
  double sum = 0.0;
  for (std::size_t m = 0; m <= last; ++m) {
    const double w = (m == 0 || m == last) ? 0.5 : 1.0;
    sum += w * std::exp(-lambda * series.t(m)) * s[m];
  }
  LaplaceEstimate out{sum * series.dt, std::abs(s[last]) * std::exp(-lambda * series.t_end()) / lambda};
  if (std::abs(s[last]) > tail_tol && out.tail_bound > 1e-3 * std::abs(out.value))
    throw NumericalError("Laplace transform at lambda = " + std::to_string(lambda) +
                         " is dominated by the unrecorded tail; extend T or raise lambda");
  return out;
}

/// Floor applied to the relative standard deviation of noiseless samples so
/// every sigma stays positive; far below any physical noise level.
inline constexpr double kNoiselessRelativeSigma = 1e-9;

/// Samples H at the given lambdas with multiplicative Gaussian noise
/// H_i (1 + noise_rel xi_i), xi_i from NormalStream(seed) in ascending lambda order.
inline TransferDataset synthesize_dataset(const ConductivityProfile& a, std::vector<double> lambdas, double noise_rel,
                                          std::uint64_t seed) {
  if (lambdas.empty()) throw ValidationError("lambda grid is empty");
  if (!(noise_rel >= 0.0)) throw ValidationError("noise level must be >= 0");
  std::sort(lambdas.begin(), lambdas.end());
  NormalStream noise(seed);
  std::vector<TransferSample> samples;
  samples.reserve(lambdas.size());
  for (double lambda : lambdas) {
    const double clean = transfer_function(a, lambda);
    const double noisy = noise_rel > 0.0 ? clean * (1.0 + noise_rel * noise.normal()) : clean;
    if (!(noisy > 0.0)) throw NumericalError("noise drove a transfer sample non-positive; lower noise_rel");
    samples.push_back({lambda, noisy, std::max(noise_rel, kNoiselessRelativeSigma) * noisy});
  }
  return TransferDataset(std::move(samples), {Provenance::Kind::synthetic, seed, noise_rel});
}

}  // namespace pwcheat

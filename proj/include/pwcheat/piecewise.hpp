#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pwcheat/errors.hpp"

namespace pwcheat {

/// Breakpoints closer than this are treated as the same point when two
/// partitions are merged.
inline constexpr double kBreakpointTolerance = 1e-12;

/// A piecewise-constant function on [0,1].
///
/// Piece j covers [breakpoints[j], breakpoints[j+1]) and carries values[j]; the
/// last piece is closed at 1. At an interior breakpoint the function takes the
/// value of the piece to its right.
///
/// The constructor accepts any non-decreasing breakpoint list (zero-width
/// pieces are legal input); normalize() produces the canonical form with
/// strictly increasing breakpoints and no equal neighbours.
class PiecewiseFunction {
 public:
  PiecewiseFunction(std::vector<double> breakpoints, std::vector<double> values)
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    validate();
  }

  static PiecewiseFunction constant(double value) { return {{0.0, 1.0}, {value}}; }

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t pieces() const { return values_.size(); }
  double left(std::size_t j) const { return breakpoints_[j]; }
  double right(std::size_t j) const { return breakpoints_[j + 1]; }
  double width(std::size_t j) const { return breakpoints_[j + 1] - breakpoints_[j]; }

  /// Index of the piece holding x, right-limit convention at breakpoints.
  std::size_t piece_index(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("evaluation point " + std::to_string(x) + " outside [0,1]");
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
    const auto j = static_cast<std::size_t>(it - breakpoints_.begin());
    return std::min(j == 0 ? 0 : j - 1, pieces() - 1);
  }

  double operator()(double x) const { return values_[piece_index(x)]; }

  bool strictly_increasing() const {
    return std::adjacent_find(breakpoints_.begin(), breakpoints_.end(), std::greater_equal<>()) ==
           breakpoints_.end();
  }

  friend bool operator==(const PiecewiseFunction&, const PiecewiseFunction&) = default;

 private:
  void validate() const {
    if (values_.empty()) throw ValidationError("piecewise function needs at least one piece");
    if (breakpoints_.size() != values_.size() + 1)
      throw ValidationError("breakpoints must number one more than values");
    if (breakpoints_.front() != 0.0 || breakpoints_.back() != 1.0)
      throw ValidationError("breakpoints must start at exactly 0 and end at exactly 1");
    for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
      if (!std::isfinite(breakpoints_[i]) || breakpoints_[i + 1] < breakpoints_[i])
        throw ValidationError("breakpoints must be finite and sorted");
    }
    for (double v : values_)
      if (!std::isfinite(v)) throw ValidationError("piece values must be finite");
  }

  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

/// Drops zero-width pieces and merges neighbours with equal values.
inline PiecewiseFunction normalize(const PiecewiseFunction& p) {
  std::vector<double> xs{0.0};
  std::vector<double> vs;
  for (std::size_t j = 0; j < p.pieces(); ++j) {
    if (p.width(j) <= kBreakpointTolerance) continue;
    if (!vs.empty() && vs.back() == p.values()[j]) {
      xs.back() = p.right(j);
      continue;
    }
    vs.push_back(p.values()[j]);
    xs.push_back(p.right(j));
  }
  // A dropped trailing sliver leaves the last kept piece short of 1.
  xs.back() = 1.0;
  return {std::move(xs), std::move(vs)};
}

/// Sorted union of breakpoint sets, points within kBreakpointTolerance merged.
inline std::vector<double> union_breakpoints(std::span<const double> a, std::span<const double> b) {
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double x : all)
    if (out.empty() || x - out.back() > kBreakpointTolerance) out.push_back(x);
  out.front() = 0.0;
  out.back() = 1.0;
  return out;
}

/// Same function on a finer partition; `points` in (0,1) become breakpoints.
inline PiecewiseFunction refine(const PiecewiseFunction& p, std::span<const double> points) {
  auto xs = union_breakpoints(p.breakpoints(), points);
  std::vector<double> vs;
  vs.reserve(xs.size() - 1);
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) vs.push_back(p(0.5 * (xs[j] + xs[j + 1])));
  return {std::move(xs), std::move(vs)};
}

/// alpha*p1 + beta*p2 on the union refinement, normalized.
inline PiecewiseFunction combine(double alpha, const PiecewiseFunction& p1, double beta,
                                 const PiecewiseFunction& p2) {
  auto xs = union_breakpoints(p1.breakpoints(), p2.breakpoints());
  std::vector<double> vs;
  vs.reserve(xs.size() - 1);
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double mid = 0.5 * (xs[j] + xs[j + 1]);
    vs.push_back(alpha * p1(mid) + beta * p2(mid));
  }
  return normalize({std::move(xs), std::move(vs)});
}

inline PiecewiseFunction subtract(const PiecewiseFunction& p1, const PiecewiseFunction& p2) {
  auto xs = union_breakpoints(p1.breakpoints(), p2.breakpoints());
  std::vector<double> vs;
  vs.reserve(xs.size() - 1);
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double mid = 0.5 * (xs[j] + xs[j + 1]);
    vs.push_back(p1(mid) - p2(mid));
  }
  return normalize({std::move(xs), std::move(vs)});
}

enum class Norm { L1, Linf };

inline double distance(const PiecewiseFunction& p1, const PiecewiseFunction& p2, Norm norm) {
  const auto xs = union_breakpoints(p1.breakpoints(), p2.breakpoints());
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double mid = 0.5 * (xs[j] + xs[j + 1]);
    const double gap = std::abs(p1(mid) - p2(mid));
    if (norm == Norm::L1)
      total += gap * (xs[j + 1] - xs[j]);
    else
      total = std::max(total, gap);
  }
  return total;
}

/// Pointwise reciprocal; maps a conductivity a(x) to q^2(x) = 1/a(x) and back.
inline PiecewiseFunction reciprocal(const PiecewiseFunction& p) {
  std::vector<double> vs;
  vs.reserve(p.pieces());
  for (double v : p.values()) {
    if (v == 0.0) throw ValidationError("reciprocal of a piecewise function with a zero piece");
    vs.push_back(1.0 / v);
  }
  return {p.breakpoints(), std::move(vs)};
}

/// Exact integral over [0,1].
inline double integral(const PiecewiseFunction& p) {
  double sum = 0.0;
  for (std::size_t j = 0; j < p.pieces(); ++j) sum += p.values()[j] * p.width(j);
  return sum;
}

/// A conductivity profile a(x) with bounds 0 < c0 <= a_j <= c1, kept in
/// normalized form.
class ConductivityProfile {
 public:
  static constexpr double kDefaultLowerBound = 1e-3;
  static constexpr double kDefaultUpperBound = 1e3;

  explicit ConductivityProfile(const PiecewiseFunction& a, double c0 = kDefaultLowerBound,
                               double c1 = kDefaultUpperBound)
      : a_(normalize(a)), c0_(c0), c1_(c1) {
    if (!(c0 > 0.0) || !(c1 >= c0) || !std::isfinite(c1))
      throw ValidationError("conductivity bounds must satisfy 0 < c0 <= c1");
    for (double v : a_.values())
      if (v < c0_ || v > c1_)
        throw ValidationError("conductivity value " + std::to_string(v) + " outside [c0, c1]");
  }

  ConductivityProfile(std::vector<double> breakpoints, std::vector<double> values,
                      double c0 = kDefaultLowerBound, double c1 = kDefaultUpperBound)
      : ConductivityProfile(PiecewiseFunction(std::move(breakpoints), std::move(values)), c0, c1) {}

  static ConductivityProfile constant(double a) { return ConductivityProfile(PiecewiseFunction::constant(a)); }

  const PiecewiseFunction& conductivity() const { return a_; }
  PiecewiseFunction q_squared() const { return reciprocal(a_); }
  const std::vector<double>& breakpoints() const { return a_.breakpoints(); }
  const std::vector<double>& values() const { return a_.values(); }
  std::size_t pieces() const { return a_.pieces(); }
  double c0() const { return c0_; }
  double c1() const { return c1_; }
  double operator()(double x) const { return a_(x); }

  /// Integral of 1/a over [0,1]; the zero-frequency limit of the transfer function.
  double thermal_resistance() const { return integral(reciprocal(a_)); }

  friend bool operator==(const ConductivityProfile&, const ConductivityProfile&) = default;

 private:
  PiecewiseFunction a_;
  double c0_;
  double c1_;
};

}  // namespace pwcheat

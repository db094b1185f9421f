#pragma once

// Numerical checks of the completeness machinery for products of solutions:
// moment integrals of psi1*psi2 against piecewise-constant weights, the
// integration-by-parts identity behind uniqueness, and the exponential
// coefficients of psi on the last constant piece.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pwcheat/errors.hpp"
#include "pwcheat/laplace_forward.hpp"
#include "pwcheat/piecewise.hpp"
#include "pwcheat/scaled.hpp"

namespace pwcheat {

namespace detail {

/// int_0^w e^{g s} ds, with e^{g w} moved to the log scale when large.
inline Scaled exp_integral(double g, double w) {
  if (g * w > 1.0) return {-std::expm1(-g * w) / g, g * w};
  if (g == 0.0) return {w, 0.0};
  return {std::expm1(g * w) / g, 0.0};
}

/// f on [0,w] as plus*e^{rate s} + minus*e^{-rate s}, coefficients sharing log_scale.
struct ExpForm {
  double plus = 0.0;
  double minus = 0.0;
  double rate = 0.0;
  double log_scale = 0.0;
};

/// int_0^w f1 f2 ds for two exponential forms.
inline Scaled product_integral(const ExpForm& f1, const ExpForm& f2, double w) {
  Scaled total;
  const std::array<std::pair<double, double>, 2> terms1{{{f1.plus, f1.rate}, {f1.minus, -f1.rate}}};
  const std::array<std::pair<double, double>, 2> terms2{{{f2.plus, f2.rate}, {f2.minus, -f2.rate}}};
  for (const auto& [c1, r1] : terms1)
    for (const auto& [c2, r2] : terms2)
      if (c1 != 0.0 && c2 != 0.0) total = total + exp_integral(r1 + r2, w) * (c1 * c2);
  return Scaled{total.mantissa, total.log_scale + f1.log_scale + f2.log_scale}.normalized();
}

/// Exponential form of psi on [x, ...) within the piece holding `mid`.
inline ExpForm psi_form(const PsiSolution& psi, double x, double mid) {
  const std::size_t j = psi.piece_index(mid);
  const double rate = psi.rate(j);
  NodeState s = advance(psi.node(j), rate, 1.0, x - psi.node(j).x);
  const double slope = s.flux / rate;
  return {0.5 * (s.value + slope), 0.5 * (s.value - slope), rate, s.log_scale};
}

/// Exponential form of v' = (a v')/a on [x, ...) within the piece holding `mid`.
inline ExpForm v_derivative_form(const VSolution& v, double x, double mid) {
  const std::size_t j = v.piece_index(mid);
  const double rate = v.rate(j);
  const double a = v.weight(j);
  NodeState s = advance(v.node(j), rate, a, x - v.node(j).x);
  // v = c+ e^{rs} + c- e^{-rs} with c+- = (v +- (a v')/(a r))/2; v' = r c+ e^{rs} - r c- e^{-rs}.
  const double slope = s.flux / (a * rate);
  return {0.5 * rate * (s.value + slope), -0.5 * rate * (s.value - slope), rate, s.log_scale};
}

inline void require_positive_k(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("spectral parameter k must be finite and > 0");
}

}  // namespace detail

/// Exact int_0^1 h psi1 psi2 dx, with psi_i solving psi'' = k^2 q_i^2 psi.
inline Scaled product_moment(const PiecewiseFunction& h, const PiecewiseFunction& q1_squared,
                             const PiecewiseFunction& q2_squared, double k) {
  detail::require_positive_k(k);
  const PsiSolution psi1 = solve_psi(q1_squared, k);
  const PsiSolution psi2 = solve_psi(q2_squared, k);
  const auto xs = union_breakpoints(union_breakpoints(h.breakpoints(), q1_squared.breakpoints()),
                                    q2_squared.breakpoints());
  Scaled total;
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double mid = 0.5 * (xs[j] + xs[j + 1]);
    const double weight = h(mid);
    if (weight == 0.0) continue;
    const Scaled piece = detail::product_integral(detail::psi_form(psi1, xs[j], mid),
                                                  detail::psi_form(psi2, xs[j], mid), xs[j + 1] - xs[j]);
    total = total + piece * weight;
  }
  return total;
}

/// Log-spaced k-grid on [0.25, 64] with three points per partition piece.
inline std::vector<double> default_k_grid(std::size_t pieces) {
  const std::size_t count = std::max<std::size_t>(3 * pieces, 2);
  std::vector<double> ks(count);
  for (std::size_t i = 0; i < count; ++i)
    ks[i] = 0.25 * std::pow(64.0 / 0.25, static_cast<double>(i) / static_cast<double>(count - 1));
  return ks;
}

inline std::vector<double> uniform_partition(std::size_t pieces) {
  std::vector<double> xs(pieces + 1);
  for (std::size_t i = 0; i <= pieces; ++i) xs[i] = static_cast<double>(i) / static_cast<double>(pieces);
  xs.back() = 1.0;
  return xs;
}

/// Moment matrix M[i][m] = int over partition piece m of psi1 psi2 at k_i.
///
/// Raw rows span hundreds of orders of magnitude, so each row is stored as
/// mantissas over a per-row log scale and every row is divided by its largest
/// entry before the SVD. A positive smallest singular value of the normalized
/// matrix certifies that no nonzero weight on this partition is orthogonal to
/// all sampled products; it is a finite-dimensional check, not a proof.
struct MomentMatrix {
  std::vector<double> k_grid;
  std::vector<double> partition;
  Eigen::MatrixXd mantissas;      // raw entries = mantissas(i,m) * exp(row_log_scale[i])
  std::vector<double> row_log_scale;
  Eigen::MatrixXd normalized;     // rows divided by their sup
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
  double condition = 0.0;

  std::size_t rows() const { return k_grid.size(); }
  std::size_t cols() const { return partition.size() - 1; }
  Scaled entry(std::size_t i, std::size_t m) const { return {mantissas(i, m), row_log_scale[i]}; }

  /// Smallest singular value above the usual numerical-rank threshold.
  bool full_rank() const {
    return min_singular_value >
           std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(rows(), cols())) * max_singular_value;
  }

  /// || h || for the least-squares solution of M h = 0 (column-pivoting QR).
  double null_solution_norm() const {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows()));
    const Eigen::VectorXd h = normalized.colPivHouseholderQr().solve(zero);
    return h.norm();
  }
};

inline MomentMatrix moment_matrix(const PiecewiseFunction& q1_squared, const PiecewiseFunction& q2_squared,
                                  std::vector<double> k_grid, std::vector<double> partition) {
  const PiecewiseFunction cells(partition, std::vector<double>(partition.size() > 0 ? partition.size() - 1 : 0, 0.0));
  if (!cells.strictly_increasing()) throw ValidationError("partition must be strictly increasing");
  const std::size_t cols = cells.pieces();
  if (k_grid.size() < cols) throw ValidationError("k grid needs at least as many points as partition pieces");
  std::sort(k_grid.begin(), k_grid.end());
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    detail::require_positive_k(k_grid[i]);
    if (i > 0 && k_grid[i] == k_grid[i - 1]) throw ValidationError("k grid values must be distinct");
  }

  MomentMatrix out;
  out.k_grid = k_grid;
  out.partition = partition;
  const auto rows = static_cast<Eigen::Index>(k_grid.size());
  out.mantissas.resize(rows, static_cast<Eigen::Index>(cols));
  out.normalized.resize(rows, static_cast<Eigen::Index>(cols));
  out.row_log_scale.resize(k_grid.size());

  for (Eigen::Index i = 0; i < rows; ++i) {
    std::vector<Scaled> row(cols);
    for (std::size_t m = 0; m < cols; ++m) {
      std::vector<double> indicator(cols, 0.0);
      indicator[m] = 1.0;
      row[m] = product_moment(PiecewiseFunction(partition, indicator), q1_squared, q2_squared, k_grid[i]);
      if (!(row[m].mantissa > 0.0) || !row[m].is_finite())
        throw NumericalError("moment matrix entry is not a positive finite number");
    }
    const Scaled sup = *std::max_element(row.begin(), row.end(),
                                         [](const Scaled& a, const Scaled& b) { return a.log_abs() < b.log_abs(); });
    out.row_log_scale[i] = sup.log_scale;
    for (std::size_t m = 0; m < cols; ++m) {
      const auto c = static_cast<Eigen::Index>(m);
      out.mantissas(i, c) = row[m].mantissa_at(sup.log_scale);
      out.normalized(i, c) = ratio(row[m], sup);
    }
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.normalized);
  const auto& s = svd.singularValues();
  if (!s.allFinite()) throw NumericalError("singular value decomposition failed");
  out.max_singular_value = s(0);
  out.min_singular_value = s(s.size() - 1);
  out.condition = out.min_singular_value > 0.0 ? out.max_singular_value / out.min_singular_value
                                               : std::numeric_limits<double>::infinity();
  return out;
}

/// Both sides of
///   int_0^1 p v2' v1' dx = [p v2' v1 + a1 w' v1 - a1 w v1']_0^1,
/// p = a1 - a2, w = v1 - v2, for v_i solving (a_i v_i')' = lambda v_i, v_i(0) = 0.
struct IdentityTerms {
  Scaled lhs;
  Scaled rhs;
  double defect = 0.0;
};

/// Guard added to the denominator of relative defects so that two exact zeros
/// compare as agreement.
inline constexpr double kDefectGuard = 1e-290;

inline IdentityTerms orthogonality_identity(const ConductivityProfile& a1, const ConductivityProfile& a2,
                                            double lambda) {
  const VSolution v1 = solve_v(a1, lambda);
  const VSolution v2 = solve_v(a2, lambda);
  const auto xs = union_breakpoints(a1.breakpoints(), a2.breakpoints());

  IdentityTerms out;
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double mid = 0.5 * (xs[j] + xs[j + 1]);
    const double p = a1(mid) - a2(mid);
    if (p == 0.0) continue;
    const Scaled piece = detail::product_integral(detail::v_derivative_form(v1, xs[j], mid),
                                                  detail::v_derivative_form(v2, xs[j], mid), xs[j + 1] - xs[j]);
    out.lhs = out.lhs + piece * p;
  }

  auto boundary = [&](double x) {
    const NodeState s1 = v1.at(x);
    const NodeState s2 = v2.at(x);
    const double c1 = a1(x);
    const double c2 = a2(x);
    const Scaled v1x = s1.scaled_value();
    const Scaled v2x = s2.scaled_value();
    const Scaled d1 = Scaled{s1.flux / c1, s1.log_scale};
    const Scaled d2 = Scaled{s2.flux / c2, s2.log_scale};
    const Scaled first = d2 * v1x * (c1 - c2);
    const Scaled second = (d1 - d2) * v1x * c1;
    const Scaled third = (v1x - v2x) * d1 * c1;
    return first + second - third;
  };
  out.rhs = boundary(1.0) - boundary(0.0);

  const Scaled gap = abs(out.lhs - out.rhs);
  Scaled scale = abs(out.lhs) + abs(out.rhs);
  if (scale.is_zero() || scale.log_abs() < std::log(kDefectGuard)) scale = Scaled::of(kDefectGuard);
  out.defect = gap.is_zero() ? 0.0 : ratio(gap, scale);
  return out;
}

/// |LHS - RHS| / (|LHS| + |RHS| + guard) of the integration-by-parts identity.
inline double orthogonality_identity_defect(const ConductivityProfile& a1, const ConductivityProfile& a2,
                                            double lambda) {
  return orthogonality_identity(a1, a2, lambda).defect;
}

/// psi on [x0,1] (constant q there) written as a e^{kq(x-x0)} + b e^{-kq(x-x0)}.
struct ExpCoefficients {
  double k = 0.0;
  double x0 = 0.0;
  double q_last = 0.0;
  Scaled a_coef;
  Scaled b_coef;
  Scaled psi_x0;
  Scaled dpsi_x0;

  /// a >= |b| >= 0.
  bool dominance_holds() const {
    return a_coef.mantissa > 0.0 && b_coef.mantissa_at(a_coef.log_scale) <= a_coef.mantissa &&
           -b_coef.mantissa_at(a_coef.log_scale) <= a_coef.mantissa;
  }
  /// 2a > psi(x0); equality is the only possibility when psi'(x0) = 0 (x0 = 0).
  bool doubling_holds() const { return 2.0 * a_coef.mantissa > psi_x0.mantissa_at(a_coef.log_scale); }
};

/// Coefficients from (psi, psi') at the node x0.
inline ExpCoefficients exp_coefficients(const PsiSolution& psi, double x0, double q_last) {
  if (!(psi.k() > 0.0)) throw DomainError("exponential coefficients need k > 0");
  if (!(q_last > 0.0)) throw DomainError("q on the last piece must be positive");
  const auto nodes = psi.nodes();
  const auto it = std::find_if(nodes.begin(), nodes.end(),
                               [x0](const NodeState& s) { return std::abs(s.x - x0) <= kBreakpointTolerance; });
  if (it == nodes.end()) throw ValidationError("x0 = " + std::to_string(x0) + " is not a node of the solution");
  const double slope = it->flux / (psi.k() * q_last);
  ExpCoefficients out;
  out.k = psi.k();
  out.x0 = x0;
  out.q_last = q_last;
  out.a_coef = Scaled{0.5 * (it->value + slope), it->log_scale};
  out.b_coef = Scaled{0.5 * (it->value - slope), it->log_scale};
  out.psi_x0 = it->scaled_value();
  out.dpsi_x0 = it->scaled_flux();
  return out;
}

/// Last interior breakpoint of q^2 (0 for a constant profile).
inline double last_discontinuity(const PiecewiseFunction& q_squared) {
  const auto& xs = q_squared.breakpoints();
  return xs.size() > 2 ? xs[xs.size() - 2] : 0.0;
}

/// psi(y,k)/a(k) and its lower bound e^{kq(y-x0)} - e^{-kq(y-x0)}, both as logs.
struct GrowthRatio {
  double log_ratio = 0.0;
  double log_lower_bound = 0.0;

  double ratio() const { return std::exp(log_ratio); }
};

/// Ratio psi(y,k)/a(k) on the last constant piece [x0,1]. x0 defaults to the
/// last discontinuity of q^2; any larger x0 < 1 is allowed.
inline GrowthRatio growth_ratio(const PiecewiseFunction& q_squared, double y, double k, double x0 = -1.0) {
  detail::require_positive_k(k);
  if (x0 < 0.0) x0 = last_discontinuity(q_squared);
  if (x0 < last_discontinuity(q_squared) - kBreakpointTolerance || !(x0 < 1.0))
    throw DomainError("x0 must lie in the last constant piece of q^2");
  if (!(y > x0 && y < 1.0)) throw DomainError("y must lie strictly inside (x0, 1)");
  const std::vector<double> extra{x0};
  const PsiSolution psi = solve_psi(x0 > 0.0 ? refine(q_squared, extra) : q_squared, k);
  const double q_last = std::sqrt(q_squared.values().back());
  const ExpCoefficients c = exp_coefficients(psi, x0, q_last);
  const double exponent = k * q_last * (y - x0);
  return {psi.at(y).log_value() - c.a_coef.log_abs(), exponent + std::log(-std::expm1(-2.0 * exponent))};
}

}  // namespace pwcheat

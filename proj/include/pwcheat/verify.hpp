#pragma once

// Battery of inequality and identity checks over a pair of q^2 profiles,
// reported as pass/fail with the worst value seen and where it occurred.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "pwcheat/laplace_forward.hpp"
#include "pwcheat/piecewise.hpp"
#include "pwcheat/property_c.hpp"

namespace pwcheat {

struct InvariantCheck {
  std::string name;
  bool pass = true;
  double worst_value = 0.0;
  std::string location;
  int instances = 0;
};

struct VerificationOptions {
  std::vector<double> k_values{0.5, 1, 2, 4, 8, 16, 32, 64};
  std::vector<double> lambdas{0.5, 2, 8};
  std::vector<double> growth_k{4, 8, 16, 32, 64};
  int quadrature_points = 1024;
  double volterra_tolerance = 1e-6;
  double identity_tolerance = 1e-8;
  double linearity_tolerance = 1e-12;
  /// Relative allowance for comparing two differently rounded evaluations of
  /// quantities that agree to leading order (the exponential lower bound).
  double rounding_slack = 1e-12;
  std::size_t partition_pieces = 4;
  std::vector<double> k_grid;  // empty: default_k_grid(partition_pieces)
};

struct VerificationReport {
  std::vector<InvariantCheck> invariants;
  MomentMatrix certificate;
  double null_solution_norm = 0.0;

  bool all_pass() const {
    return std::all_of(invariants.begin(), invariants.end(), [](const auto& c) { return c.pass; });
  }
  const InvariantCheck& find(const std::string& name) const {
    for (const auto& c : invariants)
      if (c.name == name) return c;
    throw ValidationError("no invariant named " + name);
  }
};

namespace detail {

class CheckTracker {
 public:
  CheckTracker(std::string name, bool higher_is_worse) : higher_is_worse_(higher_is_worse) {
    check_.name = std::move(name);
    check_.worst_value = higher_is_worse ? -INFINITY : INFINITY;
  }

  void observe(double value, bool ok, const std::string& where) {
    ++check_.instances;
    if (!ok) check_.pass = false;
    const bool worse = higher_is_worse_ ? value > check_.worst_value : value < check_.worst_value;
    if (worse || std::isnan(value)) {
      check_.worst_value = value;
      check_.location = where;
    }
  }

  InvariantCheck result() const { return check_; }

 private:
  InvariantCheck check_;
  bool higher_is_worse_;
};

inline std::string where(const char* profile, double k, double x) {
  std::ostringstream out;
  out << profile << " k=" << k << " x=" << x;
  return out.str();
}

inline ConductivityProfile conductivity_from_q_squared(const PiecewiseFunction& q_squared) {
  const auto a = normalize(reciprocal(q_squared));
  const auto [lo, hi] = std::minmax_element(a.values().begin(), a.values().end());
  return ConductivityProfile(a, *lo, *hi);
}

}  // namespace detail

/// Runs every check on (q1^2, q2^2). x0 is the larger of the two last
/// discontinuities, as in the completeness argument.
inline VerificationReport verify_property_c(const PiecewiseFunction& q1_squared, const PiecewiseFunction& q2_squared,
                                            const VerificationOptions& opts = {}) {
  using detail::CheckTracker;
  const double x0 = std::max(last_discontinuity(q1_squared), last_discontinuity(q2_squared));

  CheckTracker positivity("positivity_monotonicity", false);
  CheckTracker volterra("volterra_residual", true);
  CheckTracker dominance("coefficient_dominance", false);
  CheckTracker doubling("coefficient_doubling", false);
  CheckTracker chain("bound_chain", false);
  CheckTracker lower_bound("growth_lower_bound", false);
  CheckTracker divergence("growth_divergence", false);
  CheckTracker identity("identity_defect", true);
  CheckTracker linearity("product_moment_linearity", true);
  CheckTracker certificate("moment_certificate", false);

  std::vector<double> samples;
  for (int i = 0; i <= 64; ++i) samples.push_back(i / 64.0);
  std::vector<double> sample_ks = opts.k_values;
  std::sort(sample_ks.begin(), sample_ks.end());

  const std::vector<double> x0_point{x0};
  for (const auto& [label, q2] : {std::pair{"q1", &q1_squared}, std::pair{"q2", &q2_squared}}) {
    const PiecewiseFunction refined = x0 > 0.0 ? refine(*q2, x0_point) : *q2;
    const double q_last = std::sqrt(q2->values().back());
    const auto grid = union_breakpoints(samples, refined.breakpoints());
    std::vector<double> previous_logs;

    for (double k : sample_ks) {
      const PsiSolution psi = solve_psi(refined, k);

      // psi >= 1, psi' >= 0, nondecreasing in x and in k.
      std::vector<double> logs;
      for (double x : grid) {
        const NodeState s = psi.at(x);
        const double log_psi = s.log_value();
        double slack = std::min(log_psi, s.flux);
        if (!logs.empty()) slack = std::min(slack, log_psi - logs.back());
        if (!previous_logs.empty()) slack = std::min(slack, log_psi - previous_logs[logs.size()]);
        logs.push_back(log_psi);
        positivity.observe(slack, slack >= 0.0, detail::where(label, k, x));
      }
      previous_logs = logs;

      const double residual = psi_integral_residual(*q2, k, opts.quadrature_points);
      volterra.observe(residual, residual < opts.volterra_tolerance, detail::where(label, k, 0.0));

      if (k <= 0.0) continue;
      const ExpCoefficients c = exp_coefficients(psi, x0, q_last);
      const double a = c.a_coef.mantissa;
      const double b = c.b_coef.mantissa;
      dominance.observe((a - std::abs(b)) / a, c.dominance_holds(), detail::where(label, k, x0));
      const double psi0 = c.psi_x0.mantissa;
      const double doubling_slack = (2.0 * a - psi0) / psi0;
      doubling.observe(doubling_slack, x0 > 0.0 ? c.doubling_holds() : doubling_slack >= 0.0,
                       detail::where(label, k, x0));

      // 1 <= psi(x) <= psi(x0) < 2a on [0, x0].
      const double log_psi_x0 = c.psi_x0.log_abs();
      const double log_two_a = std::log(2.0) + c.a_coef.log_abs();
      for (double x : grid) {
        if (x > x0) break;
        const double log_psi = psi.at(x).log_value();
        const double slack = std::min({log_psi, log_psi_x0 - log_psi, log_two_a - log_psi_x0});
        const bool strict_ok = log_psi >= 0.0 && log_psi <= log_psi_x0 && (x0 > 0.0 ? 2.0 * a > psi0 : 2.0 * a >= psi0);
        chain.observe(slack, strict_ok, detail::where(label, k, x));
      }

      // psi(x) >= a (e^{kq(x-x0)} - e^{-kq(x-x0)}) on (x0, 1].
      for (int i = 1; i <= 8; ++i) {
        const double y = x0 + (1.0 - x0) * i / 8.0;
        const double exponent = k * q_last * (y - x0);
        const double log_bound = exponent + std::log(-std::expm1(-2.0 * exponent));
        const double margin = psi.at(y).log_value() - c.a_coef.log_abs() - log_bound;
        lower_bound.observe(margin, margin >= -opts.rounding_slack * std::max(1.0, std::abs(log_bound)),
                            detail::where(label, k, y));
      }
    }

    // Ratio psi(y,k)/a(k) outgrows e^{0.5 k q (y - x0)} on every doubling of k.
    const double y = 0.5 * (x0 + 1.0);
    for (std::size_t i = 0; i + 1 < opts.growth_k.size(); ++i) {
      const double k = opts.growth_k[i];
      const double step = growth_ratio(*q2, y, opts.growth_k[i + 1], x0).log_ratio - growth_ratio(*q2, y, k, x0).log_ratio;
      const double margin = step - 0.5 * k * q_last * (y - x0);
      divergence.observe(margin, margin > 0.0, detail::where(label, k, y));
    }
  }

  const auto a1 = detail::conductivity_from_q_squared(q1_squared);
  const auto a2 = detail::conductivity_from_q_squared(q2_squared);
  for (double lambda : opts.lambdas) {
    const double defect = orthogonality_identity_defect(a1, a2, lambda);
    std::ostringstream at;
    at << "lambda=" << lambda;
    identity.observe(defect, defect < opts.identity_tolerance, at.str());
  }

  const auto partition = uniform_partition(opts.partition_pieces);
  std::vector<double> w1(opts.partition_pieces), w2(opts.partition_pieces);
  for (std::size_t m = 0; m < opts.partition_pieces; ++m) {
    w1[m] = 1.0 + 0.5 * static_cast<double>(m % 3) - 0.75 * static_cast<double>(m % 2);
    w2[m] = std::cos(1.0 + static_cast<double>(m));
  }
  const PiecewiseFunction h1(partition, w1);
  const PiecewiseFunction h2(partition, w2);
  const PiecewiseFunction mixed = combine(0.7, h1, -1.3, h2);
  for (double k : sample_ks) {
    if (k <= 0.0) continue;
    const Scaled m1 = product_moment(h1, q1_squared, q2_squared, k);
    const Scaled m2 = product_moment(h2, q1_squared, q2_squared, k);
    const Scaled both = product_moment(mixed, q1_squared, q2_squared, k);
    const Scaled expected = m1 * 0.7 + m2 * -1.3;
    const Scaled size = abs(m1) * 0.7 + abs(m2) * 1.3;
    const double err = ratio(abs(both - expected), size);
    linearity.observe(err, err < opts.linearity_tolerance, detail::where("h", k, 0.0));
  }

  VerificationReport report;
  const auto k_grid = opts.k_grid.empty() ? default_k_grid(opts.partition_pieces) : opts.k_grid;
  report.certificate = moment_matrix(q1_squared, q2_squared, k_grid, partition);
  report.null_solution_norm = report.certificate.null_solution_norm();
  certificate.observe(report.certificate.min_singular_value,
                      report.certificate.full_rank() &&
                          report.null_solution_norm < 1e-8 * report.certificate.max_singular_value,
                      "partition pieces=" + std::to_string(opts.partition_pieces));

  for (const CheckTracker* t : {&positivity, &volterra, &dominance, &doubling, &chain, &lower_bound, &divergence,
                                &identity, &linearity, &certificate})
    report.invariants.push_back(t->result());
  return report;
}

}  // namespace pwcheat

#pragma once

// Least-squares reconstruction of a piecewise-constant conductivity from
// transfer-function samples, plus model selection over the number of pieces.
//
// Unknowns for n pieces are 2n-1 unconstrained parameters theta:
//   theta[0..n)      values,  log a_j = log c0 + log(c1/c0) * sigmoid(theta_j)
//   theta[n..2n-1)   widths,  w_j = min_width + (1 - n min_width) softmax(0, theta_n, ...)_j
// Residuals are r_i = (log H(lambda_i; a) - log H_i) / (sigma_i / H_i).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "pwcheat/dataset.hpp"
#include "pwcheat/errors.hpp"
#include "pwcheat/laplace_forward.hpp"
#include "pwcheat/piecewise.hpp"
#include "pwcheat/rng.hpp"

namespace pwcheat {

/// Maps between the unconstrained parameter vector and a ConductivityProfile.
class Parameterization {
 public:
  /// Parameters are clamped to [-kLimit, kLimit]; sigmoid(30) is 1 to 1e-13.
  static constexpr double kLimit = 30.0;

  Parameterization(std::size_t pieces, double c0, double c1, double min_width)
      : pieces_(pieces), c0_(c0), c1_(c1), min_width_(min_width) {
    if (pieces == 0) throw ValidationError("number of pieces must be >= 1");
    if (!(c0 > 0.0 && c1 > c0) || !std::isfinite(c1)) throw ValidationError("bounds must satisfy 0 < c0 < c1 < inf");
    if (!(min_width >= 0.0) || !(static_cast<double>(pieces) * min_width < 1.0))
      throw ValidationError("min_width must be >= 0 and n * min_width < 1");
  }

  std::size_t pieces() const { return pieces_; }
  std::size_t size() const { return 2 * pieces_ - 1; }
  double c0() const { return c0_; }
  double c1() const { return c1_; }
  double min_width() const { return min_width_; }

  double log_value(double u) const { return std::log(c0_) + log_range() * sigmoid(u); }

  /// d log a / d theta_j for a value parameter.
  double log_value_derivative(double u) const {
    const double s = sigmoid(u);
    return log_range() * s * (1.0 - s);
  }

  /// Inverse of log_value, clamped to the parameter box.
  double value_parameter(double a) const {
    const double s = (std::log(a) - std::log(c0_)) / log_range();
    if (s <= 0.0) return -kLimit;
    if (s >= 1.0) return kLimit;
    return std::clamp(std::log(s / (1.0 - s)), -kLimit, kLimit);
  }

  std::vector<double> widths(const Eigen::VectorXd& theta) const {
    std::vector<double> z(pieces_, 0.0);
    for (std::size_t j = 1; j < pieces_; ++j) z[j] = theta(static_cast<Eigen::Index>(pieces_ + j - 1));
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double& e : z) total += (e = std::exp(e - top));
    const double free = 1.0 - static_cast<double>(pieces_) * min_width_;
    for (double& e : z) e = min_width_ + free * e / total;
    return z;
  }

  ConductivityProfile profile(const Eigen::VectorXd& theta) const {
    check_size(theta);
    std::vector<double> xs{0.0};
    const auto w = widths(theta);
    for (std::size_t j = 0; j + 1 < pieces_; ++j) xs.push_back(std::min(1.0, xs.back() + w[j]));
    xs.push_back(1.0);
    std::vector<double> values(pieces_);
    for (std::size_t j = 0; j < pieces_; ++j)
      values[j] = std::clamp(std::exp(log_value(theta(static_cast<Eigen::Index>(j)))), c0_, c1_);
    return ConductivityProfile(PiecewiseFunction(std::move(xs), std::move(values)), c0_, c1_);
  }

  /// Parameters reproducing a profile with exactly pieces() pieces.
  Eigen::VectorXd parameters(const ConductivityProfile& a) const {
    if (a.pieces() != pieces_) throw ValidationError("profile piece count does not match the parameterization");
    Eigen::VectorXd theta(static_cast<Eigen::Index>(size()));
    for (std::size_t j = 0; j < pieces_; ++j) theta(static_cast<Eigen::Index>(j)) = value_parameter(a.values()[j]);
    const auto& pw = a.conductivity();
    const double base = pw.width(0) - min_width_;
    for (std::size_t j = 1; j < pieces_; ++j) {
      const double excess = pw.width(j) - min_width_;
      double z = -kLimit;
      if (excess > 0.0 && base > 0.0) z = std::log(excess / base);
      else if (excess > 0.0) z = kLimit;
      theta(static_cast<Eigen::Index>(pieces_ + j - 1)) = std::clamp(z, -kLimit, kLimit);
    }
    return theta;
  }

  void check_size(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != size()) throw ValidationError("parameter vector has the wrong size");
  }

 private:
  static double sigmoid(double u) { return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }
  double log_range() const { return std::log(c1_ / c0_); }

  std::size_t pieces_;
  double c0_;
  double c1_;
  double min_width_;
};

inline std::vector<double> residuals(const ConductivityProfile& a, const TransferDataset& data) {
  std::vector<double> r(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    r[i] = (std::log(transfer_function(a, s.lambda)) - std::log(s.H)) / (s.sigma / s.H);
  }
  return r;
}

inline double sum_of_squares(const std::vector<double>& r) {
  double total = 0.0;
  for (double x : r) total += x * x;
  return total;
}

/// Finite-difference Jacobian of the residuals with respect to theta.
struct JacobianResult {
  Eigen::MatrixXd matrix;
  std::vector<bool> one_sided;  // parameter at the box edge: forward/backward difference used
  double condition = 0.0;
};

namespace detail {

inline Eigen::VectorXd to_vector(const std::vector<double>& r) {
  return Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
}

inline double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

inline JacobianResult fd_jacobian(const Parameterization& param, const Eigen::VectorXd& theta,
                                  const TransferDataset& data, double h_rel, const std::vector<double>& r0) {
  const auto cols = static_cast<Eigen::Index>(param.size());
  JacobianResult out;
  out.matrix.resize(static_cast<Eigen::Index>(data.size()), cols);
  out.one_sided.assign(param.size(), false);
  const Eigen::VectorXd base = to_vector(r0);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const double h = h_rel * std::max(1.0, std::abs(theta(j)));
    Eigen::VectorXd up = theta, down = theta;
    up(j) += h;
    down(j) -= h;
    const bool at_top = up(j) > Parameterization::kLimit;
    const bool at_bottom = down(j) < -Parameterization::kLimit;
    if (at_top && at_bottom) throw ValidationError("finite-difference step larger than the parameter box");
    if (at_top || at_bottom) {
      out.one_sided[static_cast<std::size_t>(j)] = true;
      const Eigen::VectorXd& other = at_top ? down : up;
      const Eigen::VectorXd r = to_vector(residuals(param.profile(other), data));
      out.matrix.col(j) = at_top ? (base - r) / h : (r - base) / h;
    } else {
      const Eigen::VectorXd rp = to_vector(residuals(param.profile(up), data));
      const Eigen::VectorXd rm = to_vector(residuals(param.profile(down), data));
      out.matrix.col(j) = (rp - rm) / (2.0 * h);
    }
  }
  out.condition = condition_number(out.matrix);
  return out;
}

}  // namespace detail

/// Jacobian of residuals(a, data) with respect to the transformed parameters of
/// a, using an n = a.pieces() parameterization with a's own bounds.
inline JacobianResult jacobian(const ConductivityProfile& a, const TransferDataset& data, double h_rel = 1e-5,
                               double min_width = 0.0) {
  if (!(h_rel >= 1e-8 && h_rel <= 1e-3)) throw ValidationError("h_rel must lie in [1e-8, 1e-3]");
  const Parameterization param(a.pieces(), a.c0(), a.c1(), min_width);
  const Eigen::VectorXd theta = param.parameters(a);
  return detail::fd_jacobian(param, theta, data, h_rel, residuals(param.profile(theta), data));
}

enum class StopReason { gradient, step, stall, max_iter, numerical };

inline const char* to_string(StopReason s) {
  switch (s) {
    case StopReason::gradient: return "gradient";
    case StopReason::step: return "step";
    case StopReason::stall: return "stall";
    case StopReason::max_iter: return "max_iter";
    case StopReason::numerical: return "numerical";
  }
  return "unknown";
}

struct ReconstructOptions {
  double c0 = ConductivityProfile::kDefaultLowerBound;
  double c1 = ConductivityProfile::kDefaultUpperBound;
  int restarts = 8;
  int max_iter = 1000;
  /// Largest cosine between the residual and any Jacobian column at a stationary point.
  double tol_grad = 1e-8;
  /// Relative parameter step below which iteration stops.
  double tol_step = 1e-12;
  double min_width = 0.02;
  double damping_init = 1e-3;
  std::uint64_t seed = 1;
  /// Weight of the optional penalty sum (log a_{j+1} - log a_j)^2; 0 disables it.
  double ridge = 0.0;
  double h_rel = 1e-5;
  /// A stopped run counts as converged only if objective <= chi2_factor * samples.
  double chi2_factor = 2.0;
  /// L1 distance within which a restart agrees with the best one.
  double agreement_tol = 1e-3;
  /// Standard deviation of the per-restart perturbation of log a and width logits.
  double jitter = 0.7;
  /// Add the geodesic-acceleration correction to each damped step.
  bool geodesic_acceleration = true;
  /// Largest allowed 2|acceleration| / |velocity| for an accelerated step.
  double acceleration_ratio = 0.75;
  /// Worker threads for restarts; 0 uses the hardware concurrency.
  int threads = 1;
};

struct RestartSummary {
  ConductivityProfile profile = ConductivityProfile::constant(1.0);
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  StopReason stop = StopReason::numerical;
  bool converged = false;
};

struct ReconstructionResult {
  ConductivityProfile profile = ConductivityProfile::constant(1.0);
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  StopReason stop = StopReason::numerical;
  int restarts_agreeing = 0;
  int converged_restarts = 0;
  double jacobian_condition = std::numeric_limits<double>::infinity();
  /// sqrt(diag((J^T J)^+)) in transformed parameters at the optimum.
  std::vector<double> parameter_std;
  /// Objective after every accepted iteration of the winning restart.
  std::vector<double> objective_history;
  std::vector<RestartSummary> restarts;
};

namespace detail {

struct LmOutcome {
  Eigen::VectorXd theta;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  StopReason stop = StopReason::numerical;
  std::vector<double> history;
};

/// Data residuals followed by sqrt(ridge) (log a_{j+1} - log a_j) rows.
inline Eigen::VectorXd augmented_residuals(const Parameterization& param, const Eigen::VectorXd& theta,
                                           const TransferDataset& data, double ridge, std::vector<double>* data_part) {
  std::vector<double> r = residuals(param.profile(theta), data);
  const std::size_t extra = ridge > 0.0 ? param.pieces() - 1 : 0;
  Eigen::VectorXd out(static_cast<Eigen::Index>(r.size() + extra));
  for (std::size_t i = 0; i < r.size(); ++i) out(static_cast<Eigen::Index>(i)) = r[i];
  for (std::size_t j = 0; j < extra; ++j)
    out(static_cast<Eigen::Index>(r.size() + j)) =
        std::sqrt(ridge) * (param.log_value(theta(static_cast<Eigen::Index>(j + 1))) -
                            param.log_value(theta(static_cast<Eigen::Index>(j))));
  if (data_part) *data_part = std::move(r);
  return out;
}

inline Eigen::MatrixXd ridge_rows(const Parameterization& param, const Eigen::VectorXd& theta, double ridge) {
  const std::size_t extra = ridge > 0.0 ? param.pieces() - 1 : 0;
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(extra), static_cast<Eigen::Index>(param.size()));
  for (std::size_t j = 0; j < extra; ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    rows(i, i) = -std::sqrt(ridge) * param.log_value_derivative(theta(i));
    rows(i, i + 1) = std::sqrt(ridge) * param.log_value_derivative(theta(i + 1));
  }
  return rows;
}

inline double stationarity(const Eigen::MatrixXd& J, const Eigen::VectorXd& r) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < J.cols(); ++j) {
    const double cn = J.col(j).norm();
    if (cn > 0.0) worst = std::max(worst, std::abs(J.col(j).dot(r)) / (cn * rn));
  }
  return worst;
}

/// Levenberg-Marquardt with Marquardt diagonal scaling; damping x10 on a
/// rejected step and /3 on an accepted one.
inline LmOutcome levenberg_marquardt(const Parameterization& param, Eigen::VectorXd theta, const TransferDataset& data,
                                     const ReconstructOptions& opts) {
  LmOutcome out;
  std::vector<double> data_r;
  Eigen::VectorXd r = augmented_residuals(param, theta, data, opts.ridge, &data_r);
  double f = r.squaredNorm();
  out.history.push_back(f);
  double mu = opts.damping_init;
  const auto m = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(param.size());

  for (int it = 1; it <= opts.max_iter; ++it) {
    out.iterations = it;
    Eigen::MatrixXd J(r.size(), p);
    J.topRows(m) = fd_jacobian(param, theta, data, opts.h_rel, data_r).matrix;
    if (r.size() > m) J.bottomRows(r.size() - m) = ridge_rows(param, theta, opts.ridge);
    if (stationarity(J, r) < opts.tol_grad) {
      out.stop = StopReason::gradient;
      break;
    }
    Eigen::VectorXd scale = J.colwise().squaredNorm().transpose();
    const double floor = std::max(scale.maxCoeff(), 1.0) * 1e-12;
    scale = scale.cwiseMax(floor);

    bool accepted = false;
    Eigen::VectorXd next;
    while (!accepted) {
      Eigen::MatrixXd A(r.size() + p, p);
      A.topRows(r.size()) = J;
      A.bottomRows(p) = (mu * scale).cwiseSqrt().asDiagonal();
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r.size() + p);
      rhs.head(r.size()) = -r;
      const auto qr = A.colPivHouseholderQr();
      Eigen::VectorXd delta = qr.solve(rhs);
      if (opts.geodesic_acceleration) {
        // Second directional derivative of r along delta by finite differences;
        // the correction bends the step along the curved valley floor.
        constexpr double probe = 0.1;
        const Eigen::VectorXd ahead = augmented_residuals(param, theta + probe * delta, data, opts.ridge, nullptr);
        rhs.head(r.size()) = -(2.0 / probe) * ((ahead - r) / probe - J * delta);
        const Eigen::VectorXd accel = qr.solve(rhs);
        // An oversized correction means the quadratic model is unreliable; take the plain step.
        if (accel.allFinite() && 2.0 * accel.norm() <= opts.acceleration_ratio * delta.norm()) delta += 0.5 * accel;
      }
      next = (theta + delta).cwiseMax(-Parameterization::kLimit).cwiseMin(Parameterization::kLimit);
      std::vector<double> next_data_r;
      const Eigen::VectorXd next_r = augmented_residuals(param, next, data, opts.ridge, &next_data_r);
      const double next_f = next_r.squaredNorm();
      if (std::isfinite(next_f) && next_f < f) {
        accepted = true;
        r = next_r;
        data_r = std::move(next_data_r);
        f = next_f;
        mu /= 3.0;
      } else {
        mu *= 10.0;
        if (mu > 1e16) break;
      }
    }
    if (!accepted) {
      out.stop = StopReason::stall;
      break;
    }
    const double step = (next - theta).norm();
    theta = next;
    out.history.push_back(f);
    if (f == 0.0) {
      out.stop = StopReason::gradient;
      break;
    }
    if (step <= opts.tol_step * (theta.norm() + opts.tol_step)) {
      out.stop = StopReason::step;
      break;
    }
    if (it == opts.max_iter) out.stop = StopReason::max_iter;
  }
  if (opts.max_iter == 0) out.stop = StopReason::max_iter;
  out.theta = theta;
  out.objective = f;
  return out;
}

inline std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  // splitmix64 finalizer over (seed, restart)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(restart + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Restart 0: every value at the harmonic mean implied by H at the smallest
/// lambda and uniform widths. Later restarts perturb log a and width logits.
inline Eigen::VectorXd initial_point(const Parameterization& param, const TransferDataset& data, int restart,
                                     const ReconstructOptions& opts) {
  const double log_lo = std::log(param.c0());
  const double log_hi = std::log(param.c1());
  const double margin = 1e-3 * (log_hi - log_lo);
  const double log_mean = std::clamp(-std::log(data[0].H), log_lo + margin, log_hi - margin);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param.size()));
  NormalStream rng(restart_seed(opts.seed, restart));
  const double spread = restart == 0 ? 0.0 : opts.jitter;
  for (std::size_t j = 0; j < param.pieces(); ++j) {
    const double log_a = std::clamp(log_mean + spread * rng.normal(), log_lo + margin, log_hi - margin);
    theta(static_cast<Eigen::Index>(j)) = param.value_parameter(std::exp(log_a));
  }
  for (std::size_t j = param.pieces(); j < param.size(); ++j) theta(static_cast<Eigen::Index>(j)) = spread * rng.normal();
  return theta;
}

inline int resolve_threads(int requested, int tasks) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(n, 1, std::max(tasks, 1));
}

/// Runs body(i) for i in [0, count) on `threads` workers; results must be
/// written to per-index slots so the outcome does not depend on scheduling.
template <class Body>
void parallel_for(int count, int threads, Body body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Multi-start damped least squares for an n-piece profile.
inline ReconstructionResult reconstruct(const TransferDataset& data, std::size_t n, const ReconstructOptions& opts = {}) {
  if (data.size() < 2 * n) throw ValidationError("under-determined: need at least 2n samples for n pieces");
  if (opts.restarts < 1) throw ValidationError("restarts must be >= 1");
  if (opts.max_iter < 0) throw ValidationError("max_iter must be >= 0");
  if (!(opts.h_rel >= 1e-8 && opts.h_rel <= 1e-3)) throw ValidationError("h_rel must lie in [1e-8, 1e-3]");
  if (!(opts.ridge >= 0.0)) throw ValidationError("ridge must be >= 0");
  const Parameterization param(n, opts.c0, opts.c1, opts.min_width);
  const double chi2_cap = opts.chi2_factor * static_cast<double>(data.size());

  std::vector<detail::LmOutcome> outcomes(static_cast<std::size_t>(opts.restarts));
  detail::parallel_for(opts.restarts, detail::resolve_threads(opts.threads, opts.restarts), [&](int i) {
    try {
      outcomes[static_cast<std::size_t>(i)] =
          detail::levenberg_marquardt(param, detail::initial_point(param, data, i, opts), data, opts);
    } catch (const NumericalError&) {
      outcomes[static_cast<std::size_t>(i)] = detail::LmOutcome{};
    }
  });

  ReconstructionResult result;
  int best = -1;
  for (int i = 0; i < opts.restarts; ++i) {
    const auto& o = outcomes[static_cast<std::size_t>(i)];
    RestartSummary s;
    s.iterations = o.iterations;
    s.stop = o.stop;
    if (o.theta.size() > 0) {
      s.profile = param.profile(o.theta);
      s.objective = sum_of_squares(residuals(s.profile, data));
    }
    s.converged = std::isfinite(s.objective) && s.stop != StopReason::max_iter && s.stop != StopReason::numerical &&
                  s.objective <= chi2_cap;
    result.converged_restarts += s.converged ? 1 : 0;
    result.restarts.push_back(s);
  }
  auto better = [&](int i, int j) {
    const auto& a = result.restarts[static_cast<std::size_t>(i)];
    const auto& b = result.restarts[static_cast<std::size_t>(j)];
    if (a.converged != b.converged) return a.converged;
    return a.objective < b.objective;
  };
  for (int i = 0; i < opts.restarts; ++i)
    if (std::isfinite(result.restarts[static_cast<std::size_t>(i)].objective) && (best < 0 || better(i, best))) best = i;
  if (best < 0) throw NumericalError("no restart produced a finite objective");

  const auto& winner = result.restarts[static_cast<std::size_t>(best)];
  const auto& lm = outcomes[static_cast<std::size_t>(best)];
  result.profile = winner.profile;
  result.objective = winner.objective;
  result.iterations = winner.iterations;
  result.converged = winner.converged;
  result.stop = winner.stop;
  result.objective_history = lm.history;
  for (const auto& s : result.restarts)
    if (distance(s.profile.conductivity(), winner.profile.conductivity(), Norm::L1) <= opts.agreement_tol &&
        std::isfinite(s.objective))
      ++result.restarts_agreeing;

  const auto J = detail::fd_jacobian(param, lm.theta, data, opts.h_rel, residuals(param.profile(lm.theta), data));
  result.jacobian_condition = J.condition;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J.matrix, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Eigen::MatrixXd& V = svd.matrixV();
  result.parameter_std.assign(param.size(), 0.0);
  for (Eigen::Index j = 0; j < V.rows(); ++j) {
    double var = 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
      var += sv(k) > 0.0 ? V(j, k) * V(j, k) / (sv(k) * sv(k)) : std::numeric_limits<double>::infinity();
    result.parameter_std[static_cast<std::size_t>(j)] = std::sqrt(var);
  }
  return result;
}

struct SelectOptions {
  double penalty = 1.0;
  /// Adjacent pieces whose values differ by less than this (relative, in log a) are merged.
  double merge_tol = 1e-3;
};

struct ModelCandidate {
  std::size_t n = 0;
  double objective = 0.0;
  double score = 0.0;
  bool converged = false;
};

struct ModelSelection {
  std::size_t best_n = 0;
  ReconstructionResult result;
  std::vector<ModelCandidate> candidates;
};

/// Merges neighbours whose values differ by less than merge_tol in log a.
/// The merged value is the width-weighted harmonic mean, which keeps the
/// thermal resistance int 1/a unchanged.
inline ConductivityProfile merge_close_pieces(const ConductivityProfile& a, double merge_tol) {
  const auto& pw = a.conductivity();
  std::vector<double> xs{0.0};
  std::vector<double> values;
  double run_width = 0.0, run_resistance = 0.0, run_first = 0.0;
  for (std::size_t j = 0; j < pw.pieces(); ++j) {
    const double v = pw.values()[j];
    if (run_width > 0.0 && std::abs(std::log(v / run_first)) >= merge_tol) {
      xs.push_back(pw.left(j));
      values.push_back(run_width / run_resistance);
      run_width = run_resistance = 0.0;
    }
    if (run_width == 0.0) run_first = v;
    run_width += pw.width(j);
    run_resistance += pw.width(j) / v;
  }
  xs.push_back(1.0);
  values.push_back(std::clamp(run_width / run_resistance, a.c0(), a.c1()));
  for (double& v : values) v = std::clamp(v, a.c0(), a.c1());
  return ConductivityProfile(PiecewiseFunction(std::move(xs), std::move(values)), a.c0(), a.c1());
}

/// Fits n = 1..n_max and picks the smallest objective + penalty (2n-1) log(samples).
inline ModelSelection model_select(const TransferDataset& data, std::size_t n_max, const ReconstructOptions& opts = {},
                                   const SelectOptions& select = {}) {
  if (n_max < 1) throw ValidationError("n_max must be >= 1");
  if (!(select.penalty >= 0.0) || !(select.merge_tol >= 0.0)) throw ValidationError("penalty and merge_tol must be >= 0");
  const double log_m = std::log(static_cast<double>(data.size()));
  ModelSelection out;
  std::vector<ReconstructionResult> fits;
  for (std::size_t n = 1; n <= n_max; ++n) {
    fits.push_back(reconstruct(data, n, opts));
    const auto& fit = fits.back();
    out.candidates.push_back(
        {n, fit.objective, fit.objective + select.penalty * static_cast<double>(2 * n - 1) * log_m, fit.converged});
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.candidates.size(); ++i) {
    const auto& c = out.candidates[i];
    const auto& b = out.candidates[best];
    if ((c.converged && !b.converged) || (c.converged == b.converged && c.score < b.score)) best = i;
  }
  out.best_n = out.candidates[best].n;
  out.result = std::move(fits[best]);
  const ConductivityProfile merged = merge_close_pieces(out.result.profile, select.merge_tol);
  if (!(merged == out.result.profile)) {
    out.result.profile = merged;
    out.result.objective = sum_of_squares(residuals(merged, data));
  }
  return out;
}

}  // namespace pwcheat

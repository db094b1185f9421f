// Acceptance gate: one PASS/FAIL line per criterion; exit status is nonzero if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "cli_app.hpp"
#include "oracles.hpp"
#include "pwcheat/inverse.hpp"
#include "pwcheat/laplace_forward.hpp"
#include "pwcheat/property_c.hpp"
#include "pwcheat/time_domain.hpp"
#include "pwcheat/verify.hpp"

namespace {

using namespace pwcheat;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, x);
  return buf;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> xs(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) xs[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  xs.back() = hi;
  return xs;
}

// 1. tanh(1), cosh(1) and evaluation cost.
Outcome closed_form_anchors() {
  const auto one = ConductivityProfile::constant(1.0);
  const auto q_one = PiecewiseFunction::constant(1.0);
  const double h_err = std::abs(transfer_function(one, 1.0) - std::tanh(1.0));
  const double psi_err = std::abs(solve_psi(q_one, 1.0).end().scaled_value().value() - std::cosh(1.0));

  constexpr int reps = 20000;
  double sink = 0.0;
  auto start = Clock::now();
  for (int i = 0; i < reps; ++i) sink += transfer_function(one, 1.0 + 1e-9 * i);
  const double h_us = seconds_since(start) / reps * 1e6;
  start = Clock::now();
  for (int i = 0; i < reps; ++i) sink += solve_psi(q_one, 1.0 + 1e-9 * i).end().scaled_value().value();
  const double psi_us = seconds_since(start) / reps * 1e6;

  const bool pass = h_err < 1e-12 && psi_err < 1e-12 && h_us < 1000.0 && psi_us < 1000.0 && std::isfinite(sink);
  return {pass, "|H-tanh1|=" + fmt("%.2e", h_err) + " |psi-cosh1|=" + fmt("%.2e", psi_err) + " H " +
                    fmt("%.2f", h_us) + " us/eval, psi " + fmt("%.2f", psi_us) + " us/eval (limit 1 ms)"};
}

// 2. Exact propagation against adaptive Dormand-Prince integration.
Outcome forward_oracle() {
  const auto start = Clock::now();
  NormalStream rng(2002);
  const auto lambdas = log_grid(0.01, 100.0, 16);
  double worst = 0.0;
  for (int p = 0; p < 50; ++p) {
    const ConductivityProfile a(oracle::random_profile(rng, 5, 0.05, 20.0));
    for (double lambda : lambdas) {
      const double expected = oracle::ode_transfer_oracle(a.conductivity(), lambda);
      worst = std::max(worst, std::abs(transfer_function(a, lambda) / expected - 1.0));
    }
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-8 && elapsed < 30.0,
          "50 profiles x 16 lambda, worst rel err " + fmt("%.2e", worst) + " (tol 1e-8), " + fmt("%.2f", elapsed) + " s"};
}

// 3. Simulated G/F against the exact transfer function.
Outcome time_laplace_consistency() {
  const auto start = Clock::now();
  const std::vector<ConductivityProfile> profiles{
      ConductivityProfile::constant(1.0),
      ConductivityProfile({0.0, 0.5, 1.0}, {1.0, 4.0}),
      ConductivityProfile({0.0, 0.3, 1.0}, {3.0, 0.5}),
      ConductivityProfile({0.0, 0.3, 0.7, 1.0}, {0.5, 2.0, 1.0}),
      ConductivityProfile({0.0, 0.2, 0.45, 0.8, 1.0}, {2.0, 0.7, 5.0, 1.5}),
  };
  const auto lambdas = log_grid(0.5, 20.0, 16);
  double worst = 0.0;
  for (const auto& a : profiles) {
    const auto series = simulate(a, FluxSpec::pulse(1.0, 0.0, 1.0), 400, 2.5e-4, 30.0);
    for (double lambda : lambdas) {
      const double h = laplace_of_samples(series, Signal::g, lambda).value / laplace_of_samples(series, Signal::f, lambda).value;
      const double exact = transfer_function(a, lambda);
      worst = std::max(worst, std::abs(h - exact) / exact);
    }
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-3 && elapsed < 120.0, "5 profiles, unit pulse, nx=400 dt=2.5e-4 T=30: worst rel err " +
                                               fmt("%.2e", worst) + " (tol 1e-3), " + fmt("%.2f", elapsed) + " s"};
}

std::pair<PiecewiseFunction, PiecewiseFunction> random_q_pair(NormalStream& rng) {
  while (true) {
    auto q1 = oracle::random_profile(rng, 5, 0.1, 10.0);
    auto q2 = oracle::random_profile(rng, 5, 0.1, 10.0);
    if (q1.pieces() > 1 || q2.pieces() > 1) return {q1, q2};
  }
}

// 4. Inequalities of the completeness argument on random q pairs.
Outcome proof_machinery() {
  NormalStream rng(4004);
  const std::vector<std::string> required{"positivity_monotonicity", "volterra_residual", "coefficient_dominance",
                                          "coefficient_doubling",    "bound_chain",       "growth_lower_bound"};
  int violations = 0, instances = 0;
  std::string worst_name;
  for (int pair = 0; pair < 20; ++pair) {
    const auto [q1, q2] = random_q_pair(rng);
    VerificationOptions opts;
    opts.k_values = {0.5, 1, 2, 4, 8, 16, 32, 64};
    opts.quadrature_points = 1024;
    const auto report = verify_property_c(q1, q2, opts);
    for (const auto& name : required) {
      const auto& c = report.find(name);
      instances += c.instances;
      if (!c.pass) {
        ++violations;
        worst_name = name + " at " + c.location;
      }
    }
  }
  return {violations == 0, "20 q-pairs x 8 k, " + std::to_string(instances) + " checked instances, " +
                               std::to_string(violations) + " failing checks" +
                               (worst_name.empty() ? "" : " (e.g. " + worst_name + ")")};
}

// 5. Integration-by-parts identity.
Outcome identity_defect() {
  NormalStream rng(5005);
  double worst = 0.0;
  for (int t = 0; t < 60; ++t) {
    const ConductivityProfile a1(oracle::random_profile(rng, 5, 0.05, 20.0));
    const ConductivityProfile a2(oracle::random_profile(rng, 5, 0.05, 20.0));
    const double lambda = std::exp(rng.uniform(std::log(0.01), std::log(100.0)));
    worst = std::max(worst, orthogonality_identity_defect(a1, a2, lambda));
  }
  return {worst < 1e-8, "60 triples, worst defect " + fmt("%.2e", worst) + " (tol 1e-8)"};
}

// 6. Moment-matrix certificate on uniform partitions.
Outcome moment_certificate() {
  const auto start = Clock::now();
  NormalStream rng(6006);
  double min_sv = INFINITY, worst_null = 0.0;
  bool all_ok = true;
  for (int c = 0; c < 10; ++c) {
    const std::size_t pieces = 2 + static_cast<std::size_t>(c % 5);
    const auto [q1, q2] = random_q_pair(rng);
    const auto m = moment_matrix(q1, q2, default_k_grid(pieces), uniform_partition(pieces));
    const double null_ratio = m.null_solution_norm() / m.max_singular_value;
    min_sv = std::min(min_sv, m.min_singular_value);
    worst_null = std::max(worst_null, null_ratio);
    all_ok = all_ok && m.min_singular_value > 0.0 && m.full_rank() && null_ratio < 1e-8;
  }
  const double elapsed = seconds_since(start);
  return {all_ok && elapsed < 10.0, "10 configs (2-6 pieces, 3k/piece), smallest min_sv " + fmt("%.2e", min_sv) +
                                        ", worst |h|/|M| " + fmt("%.1e", worst_null) + ", " + fmt("%.2f", elapsed) + " s"};
}

ConductivityProfile random_two_piece(NormalStream& rng) {
  const double x = 0.1 + 0.8 * rng.uniform();
  const double v1 = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
  double v2 = v1;
  while (std::abs(std::log(v2 / v1)) < 0.1 || v2 / v1 > 5.0 || v1 / v2 > 5.0)
    v2 = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
  return ConductivityProfile({0.0, x, 1.0}, {v1, v2});
}

double breakpoint_error(const ConductivityProfile& got, const ConductivityProfile& want) {
  if (got.pieces() != want.pieces()) return 1.0;
  double worst = 0.0;
  for (std::size_t j = 0; j < got.breakpoints().size(); ++j)
    worst = std::max(worst, std::abs(got.breakpoints()[j] - want.breakpoints()[j]));
  return worst;
}

double value_error(const ConductivityProfile& got, const ConductivityProfile& want) {
  if (got.pieces() != want.pieces()) return INFINITY;
  double worst = 0.0;
  for (std::size_t j = 0; j < got.pieces(); ++j) worst = std::max(worst, std::abs(got.values()[j] - want.values()[j]));
  return worst;
}

// 7. Multi-start agreement on noiseless data.
Outcome uniqueness_shadow() {
  const auto start = Clock::now();
  NormalStream rng(7007);
  int recovered = 0, agreeing_targets = 0, all_eight = 0;
  double worst_pairwise = 0.0;
  for (int t = 0; t < 10; ++t) {
    const auto target = random_two_piece(rng);
    const auto data = synthesize_dataset(target, log_grid(0.01, 100.0, 16), 0.0, 1);
    ReconstructOptions opts;
    opts.restarts = 8;
    opts.seed = 100 + static_cast<std::uint64_t>(t);
    const auto r = reconstruct(data, 2, opts);
    double pairwise = 0.0;
    for (std::size_t i = 0; i < r.restarts.size(); ++i)
      for (std::size_t j = i + 1; j < r.restarts.size(); ++j)
        if (r.restarts[i].converged && r.restarts[j].converged)
          pairwise = std::max(pairwise, distance(r.restarts[i].profile.conductivity(),
                                                 r.restarts[j].profile.conductivity(), Norm::L1));
    worst_pairwise = std::max(worst_pairwise, pairwise);
    if (r.converged_restarts > 0 && pairwise <= 1e-3) ++agreeing_targets;
    if (r.converged_restarts == 8) ++all_eight;
    if (r.converged && value_error(r.profile, target) < 1e-3 && breakpoint_error(r.profile, target) < 1e-2) ++recovered;
  }
  const double elapsed = seconds_since(start);
  return {agreeing_targets == 10 && recovered >= 8 && elapsed < 300.0,
          "converged restarts agree pairwise on " + std::to_string(agreeing_targets) +
              "/10 targets (worst L1 " + fmt("%.1e", worst_pairwise) + "; all 8 restarts converged on " +
              std::to_string(all_eight) + "/10), recovered " + std::to_string(recovered) + "/10 (need 8), " +
              fmt("%.2f", elapsed) + " s"};
}

// 8. Breakpoint error grows with noise.
Outcome ill_posedness() {
  const ConductivityProfile target({0.0, 0.4, 1.0}, {1.0, 3.0});
  const auto lambdas = log_grid(0.01, 100.0, 16);
  std::vector<double> medians;
  for (double noise : {0.0, 0.003, 0.01, 0.03}) {
    std::vector<double> errors;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      ReconstructOptions opts;
      opts.seed = seed;
      const auto r = reconstruct(synthesize_dataset(target, lambdas, noise, seed), 2, opts);
      errors.push_back(breakpoint_error(r.profile, target));
    }
    std::sort(errors.begin(), errors.end());
    medians.push_back(0.5 * (errors[4] + errors[5]));
  }
  const bool monotone = std::is_sorted(medians.begin(), medians.end());
  std::string detail = "median breakpoint error at noise {0, 0.003, 0.01, 0.03}:";
  for (double m : medians) detail += " " + fmt("%.2e", m);
  return {monotone, detail};
}

// 9. Same seed, same bytes, whatever the thread count.
Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("pwcheat_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  io::write_file(p("target.json"), io::profile_to_string(ConductivityProfile({0.0, 0.4, 1.0}, {1.0, 3.0})));
  io::write_file(p("q1.json"), io::profile_to_string(ConductivityProfile::constant(1.0)));
  std::ostringstream sink_out, sink_err;
  auto run = [&](std::vector<std::string> args) { return cli::run(args, sink_out, sink_err); };

  const int hw = std::max(2, static_cast<int>(std::thread::hardware_concurrency()));
  for (const std::string tag : {"a", "b"}) {
    run({"synth", "--profile", p("target.json"), "--lambdas", "log:0.01:100:16", "--noise", "0.01", "--seed", "11",
         "--out", p("data_" + tag + ".csv")});
    run({"simulate", "--profile", p("target.json"), "--flux", "pulse:1:1", "--nx", "100", "--dt", "1e-3", "--T", "10",
         "--seed", "11", "--out", p("series_" + tag + ".csv")});
    run({"verify", "--q1", p("q1.json"), "--q2", p("target.json"), "--pieces", "3", "--seed", "11", "--out",
         p("verify_" + tag + ".json")});
    run({"select", "--data", p("data_a.csv"), "--n-max", "3", "--seed", "11", "--threads",
         tag == "a" ? "1" : std::to_string(hw), "--out", p("select_" + tag + ".json")});
    run({"reconstruct", "--data", p("data_a.csv"), "--n", "2", "--seed", "11", "--threads",
         tag == "a" ? "1" : std::to_string(hw), "--out", p("fit_" + tag + ".json")});
  }
  int identical = 0, total = 0;
  for (const std::string stem : {"data_", "series_", "verify_", "select_", "fit_"}) {
    const bool exists_both = fs::exists(p(stem + "a" + (stem == "data_" || stem == "series_" ? ".csv" : ".json"))) &&
                             fs::exists(p(stem + "b" + (stem == "data_" || stem == "series_" ? ".csv" : ".json")));
    const std::string ext = stem == "data_" || stem == "series_" ? ".csv" : ".json";
    ++total;
    if (exists_both && io::read_file(p(stem + "a" + ext)) == io::read_file(p(stem + "b" + ext))) ++identical;
  }
  fs::remove_all(dir);
  return {identical == total, std::to_string(identical) + "/" + std::to_string(total) +
                                  " artifacts byte-identical across two runs (fits: 1 vs " + std::to_string(hw) +
                                  " threads)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 closed-form anchors", closed_form_anchors},
      {"2 forward oracle equivalence", forward_oracle},
      {"3 time/Laplace consistency", time_laplace_consistency},
      {"4 proof-machinery inequalities", proof_machinery},
      {"5 identity defect", identity_defect},
      {"6 moment-matrix certificate", moment_certificate},
      {"7 multi-start uniqueness", uniqueness_shadow},
      {"8 monotone ill-posedness", ill_posedness},
      {"9 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

#pragma once

// The pwcheat command-line tool as a callable run(), so tests can drive it
// without spawning processes.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pwcheat/inverse.hpp"
#include "pwcheat/io.hpp"
#include "pwcheat/laplace_forward.hpp"
#include "pwcheat/piecewise.hpp"
#include "pwcheat/time_domain.hpp"
#include "pwcheat/verify.hpp"

namespace pwcheat::cli {

enum ExitCode { kOk = 0, kValidation = 1, kNumerical = 2, kIo = 3 };

/// Parses "log:<min>:<max>:<count>", "lin:<min>:<max>:<count>" or a comma list.
inline std::vector<double> parse_grid(const std::string& spec) {
  const auto parts = io::split(spec, ':');
  if (parts.size() == 4 && (parts[0] == "log" || parts[0] == "lin")) {
    const double lo = io::parse_number(parts[1], "grid " + spec);
    const double hi = io::parse_number(parts[2], "grid " + spec);
    const double count_d = io::parse_number(parts[3], "grid " + spec);
    if (count_d < 1 || count_d != std::floor(count_d) || count_d > 1e6)
      throw ValidationError("grid count must be a positive integer: " + spec);
    const auto count = static_cast<int>(count_d);
    if (!(hi >= lo)) throw ValidationError("grid needs min <= max: " + spec);
    if (count == 1 && hi != lo) throw ValidationError("a one-point grid needs min == max: " + spec);
    if (parts[0] == "log" && !(lo > 0.0)) throw ValidationError("log grid needs min > 0: " + spec);
    std::vector<double> xs(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const double s = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      xs[static_cast<std::size_t>(i)] = parts[0] == "log" ? lo * std::pow(hi / lo, s) : lo + (hi - lo) * s;
    }
    xs.back() = hi;
    return xs;
  }
  if (parts.size() != 1) throw ValidationError("unrecognized grid '" + spec + "'; use log:a:b:n, lin:a:b:n or a,b,c");
  std::vector<double> xs;
  for (const auto& f : io::split(spec, ',')) xs.push_back(io::parse_number(f, "grid " + spec));
  if (xs.empty()) throw ValidationError("empty grid");
  return xs;
}

/// "constant:A", "pulse:A:t_off" or "pulse:A:t_on:t_off".
inline FluxSpec parse_flux(const std::string& spec) {
  const auto parts = io::split(spec, ':');
  auto num = [&](std::size_t i) { return io::parse_number(parts[i], "flux " + spec); };
  if (parts.size() == 2 && parts[0] == "constant") return FluxSpec::constant(num(1));
  if (parts.size() == 3 && parts[0] == "pulse") return FluxSpec::pulse(num(1), 0.0, num(2));
  if (parts.size() == 4 && parts[0] == "pulse") return FluxSpec::pulse(num(1), num(2), num(3));
  throw ValidationError("unrecognized flux '" + spec + "'; use constant:A or pulse:A[:t_on]:t_off");
}

/// Canonical "key=value" list; output paths and thread counts are excluded so
/// that they do not change artifacts.
class ConfigDigest {
 public:
  explicit ConfigDigest(std::string subcommand) { add("subcommand", std::move(subcommand)); }
  void add(const std::string& key, const std::string& value) { entries_[key] = value; }
  void add(const std::string& key, double value) { entries_[key] = io::format_double(value); }
  void add_file(const std::string& key, const std::string& contents) {
    entries_[key] = io::hex64(io::fnv1a64(contents));
  }
  std::string hex() const {
    std::string canonical;
    for (const auto& [k, v] : entries_) canonical += k + "=" + v + "\n";
    return io::hex64(io::fnv1a64(canonical));
  }

 private:
  std::map<std::string, std::string> entries_;
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline void emit(const std::string& path, const std::string& contents, Streams io_streams) {
  if (path.empty() || path == "-")
    io_streams.out << contents;
  else
    io::write_file(path, contents);
}

inline int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("PWCHEAT_THREADS"); env && *env) {
    const double v = io::parse_number(env, "PWCHEAT_THREADS");
    if (v < 1 || v != std::floor(v)) throw ValidationError("PWCHEAT_THREADS must be a positive integer");
    return static_cast<int>(v);
  }
  return 0;
}

inline void write_error(std::ostream& err, const char* kind, const std::string& message, int code) {
  io::Json j{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  err << j.dump() << "\n";
}

struct Options {
  std::string profile, data, series, q1, q2, out, lambdas, flux = "constant:1", k_grid, identity_lambdas;
  std::optional<double> lambda;
  double noise = 0.0, sigma_rel = kNoiselessRelativeSigma, dt = 2.5e-4, t_end = 30.0;
  int nx = 400, pieces = 4, threads = 0;
  bool as_q2 = false;
  std::uint64_t seed = 1;
  std::optional<std::size_t> n, n_max;
  ReconstructOptions fit;
  SelectOptions select;
};

inline io::Metadata metadata(const ConfigDigest& digest, std::uint64_t seed) {
  io::Metadata m;
  m.config_digest = digest.hex();
  m.seed = seed;
  return m;
}

inline int cmd_transfer(const Options& o, Streams s) {
  const std::string text = io::read_file(o.profile);
  const auto a = io::profile_from_json(io::parse_json(text, o.profile));
  if (o.lambda && o.lambdas.empty() && o.out.empty()) {
    s.out << io::format_double(transfer_function(a, *o.lambda)) << "\n";
    return kOk;
  }
  if (o.lambda.has_value() == !o.lambdas.empty()) throw ValidationError("give exactly one of --lambda or --lambdas");
  const auto grid = o.lambda ? std::vector<double>{*o.lambda} : parse_grid(o.lambdas);
  ConfigDigest digest("transfer");
  digest.add_file("profile", text);
  digest.add("lambdas", o.lambda ? io::format_double(*o.lambda) : o.lambdas);
  std::vector<std::pair<double, double>> rows;
  for (double lambda : grid) rows.emplace_back(lambda, transfer_function(a, lambda));
  emit(o.out, io::transfer_to_csv(rows, metadata(digest, o.seed)), s);
  return kOk;
}

inline int cmd_simulate(const Options& o, Streams s) {
  const std::string text = io::read_file(o.profile);
  const auto a = io::profile_from_json(io::parse_json(text, o.profile));
  const auto series = simulate(a, parse_flux(o.flux), o.nx, o.dt, o.t_end);
  ConfigDigest digest("simulate");
  digest.add_file("profile", text);
  digest.add("flux", o.flux);
  digest.add("nx", std::to_string(o.nx));
  digest.add("dt", o.dt);
  digest.add("T", o.t_end);
  emit(o.out, io::series_to_csv(series, metadata(digest, o.seed)), s);
  return kOk;
}

inline int cmd_synth(const Options& o, Streams s) {
  if (o.profile.empty() == o.series.empty()) throw ValidationError("give exactly one of --profile or --series");
  if (o.lambdas.empty()) throw ValidationError("--lambdas is required");
  const auto grid = parse_grid(o.lambdas);
  ConfigDigest digest("synth");
  digest.add("lambdas", o.lambdas);
  std::optional<TransferDataset> data;
  if (!o.profile.empty()) {
    const std::string text = io::read_file(o.profile);
    digest.add_file("profile", text);
    digest.add("noise", o.noise);
    data = synthesize_dataset(io::profile_from_json(io::parse_json(text, o.profile)), grid, o.noise, o.seed);
  } else {
    // H = G/F from a recorded time series; sigma is assigned, no noise is added.
    const std::string text = io::read_file(o.series);
    digest.add_file("series", text);
    digest.add("sigma_rel", o.sigma_rel);
    if (!(o.sigma_rel > 0.0)) throw ValidationError("--sigma-rel must be > 0");
    const auto series = io::series_from_csv(text, o.series);
    auto sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    std::vector<TransferSample> samples;
    for (double lambda : sorted) {
      const double h = laplace_of_samples(series, Signal::g, lambda).value / laplace_of_samples(series, Signal::f, lambda).value;
      samples.push_back({lambda, h, o.sigma_rel * h});
    }
    data = TransferDataset(std::move(samples));
  }
  emit(o.out, io::dataset_to_csv(*data, metadata(digest, o.seed)), s);
  return kOk;
}

inline int cmd_verify(const Options& o, Streams s) {
  const std::string t1 = io::read_file(o.q1);
  const std::string t2 = io::read_file(o.q2);
  auto load = [&](const std::string& text, const std::string& name) {
    const auto p = io::piecewise_from_json(io::parse_json(text, name));
    return o.as_q2 ? p : normalize(reciprocal(p));
  };
  const auto q1 = load(t1, o.q1);
  const auto q2 = load(t2, o.q2);
  VerificationOptions vo;
  if (o.pieces < 1) throw ValidationError("--pieces must be >= 1");
  vo.partition_pieces = static_cast<std::size_t>(o.pieces);
  if (!o.k_grid.empty()) vo.k_grid = parse_grid(o.k_grid);
  if (!o.identity_lambdas.empty()) vo.lambdas = parse_grid(o.identity_lambdas);
  ConfigDigest digest("verify");
  digest.add_file("q1", t1);
  digest.add_file("q2", t2);
  digest.add("as_q2", o.as_q2 ? "1" : "0");
  digest.add("pieces", std::to_string(o.pieces));
  digest.add("k_grid", o.k_grid);
  digest.add("identity_lambdas", o.identity_lambdas);
  const auto report = verify_property_c(q1, q2, vo);
  io::Json j{{"meta", metadata(digest, o.seed).json()}};
  j.update(io::verification_json(report));
  emit(o.out, j.dump(2) + "\n", s);
  return report.all_pass() ? kOk : kNumerical;
}

inline int cmd_reconstruct(const Options& o, Streams s, bool select_only) {
  if (select_only && !o.n_max) throw ValidationError("select needs --n-max");
  if (o.n.has_value() == o.n_max.has_value()) throw ValidationError("give exactly one of --n or --n-max");
  const std::string text = io::read_file(o.data);
  const auto data = io::dataset_from_csv(text, o.data);
  ReconstructOptions fit = o.fit;
  fit.seed = o.seed;
  fit.threads = resolve_threads(o.threads);
  ConfigDigest digest(select_only ? "select" : "reconstruct");
  digest.add_file("data", text);
  digest.add("n", o.n ? std::to_string(*o.n) : "");
  digest.add("n_max", o.n_max ? std::to_string(*o.n_max) : "");
  digest.add("restarts", std::to_string(fit.restarts));
  digest.add("c0", fit.c0);
  digest.add("c1", fit.c1);
  digest.add("min_width", fit.min_width);
  digest.add("max_iter", std::to_string(fit.max_iter));
  digest.add("ridge", fit.ridge);
  digest.add("penalty", o.select.penalty);
  digest.add("merge_tol", o.select.merge_tol);
  io::Json j{{"meta", metadata(digest, o.seed).json()}, {"input_digest", io::hex64(io::fnv1a64(text))}};
  bool converged = false;
  if (o.n) {
    const auto result = reconstruct(data, *o.n, fit);
    converged = result.converged;
    j["n"] = *o.n;
    j.update(io::reconstruction_json(result));
  } else {
    const auto sel = model_select(data, *o.n_max, fit, o.select);
    converged = sel.result.converged;
    j.update(io::selection_json(sel));
  }
  emit(o.out, j.dump(2) + "\n", s);
  return converged ? kOk : kNumerical;
}

/// Runs the tool; args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Streams streams{out, err};
  Options o;
  CLI::App app{"Forward and inverse heat conduction with piecewise-constant conductivity", "pwcheat"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kToolVersion);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output path (default stdout)");
    sub->add_option("--seed", o.seed, "Seed recorded in outputs and used for noise/restarts");
  };

  auto* transfer = app.add_subcommand("transfer", "Evaluate H(lambda) = G/F exactly");
  transfer->add_option("--profile", o.profile, "Conductivity profile JSON")->required();
  transfer->add_option("--lambda", o.lambda, "Single lambda > 0; prints H");
  transfer->add_option("--lambdas", o.lambdas, "Grid: log:a:b:n, lin:a:b:n or comma list");
  common(transfer);

  auto* simulate_cmd = app.add_subcommand("simulate", "Time-domain simulation, writes t,f,g CSV");
  simulate_cmd->add_option("--profile", o.profile, "Conductivity profile JSON")->required();
  simulate_cmd->add_option("--flux", o.flux, "constant:A or pulse:A[:t_on]:t_off")->capture_default_str();
  simulate_cmd->add_option("--nx", o.nx, "Approximate number of cells")->capture_default_str();
  simulate_cmd->add_option("--dt", o.dt, "Time step")->capture_default_str();
  simulate_cmd->add_option("--T", o.t_end, "Final time")->capture_default_str();
  common(simulate_cmd);

  auto* synth = app.add_subcommand("synth", "Write a lambda,H,sigma dataset");
  synth->add_option("--profile", o.profile, "Conductivity profile JSON (exact H plus seeded noise)");
  synth->add_option("--series", o.series, "t,f,g time series CSV (H = G/F by quadrature)");
  synth->add_option("--lambdas", o.lambdas, "Grid: log:a:b:n, lin:a:b:n or comma list");
  synth->add_option("--noise", o.noise, "Relative Gaussian noise level")->capture_default_str();
  synth->add_option("--sigma-rel", o.sigma_rel, "Relative sigma assigned to series-derived samples")->capture_default_str();
  common(synth);

  auto* verify = app.add_subcommand("verify", "Check the completeness inequalities and identities");
  verify->add_option("--q1", o.q1, "First profile JSON (conductivity; q^2 = 1/a)")->required();
  verify->add_option("--q2", o.q2, "Second profile JSON")->required();
  verify->add_flag("--as-q2", o.as_q2, "Read the profiles' values as q^2 directly");
  verify->add_option("--pieces", o.pieces, "Uniform partition pieces for the moment certificate")->capture_default_str();
  verify->add_option("--k-grid", o.k_grid, "k grid for the certificate (default log:0.25:64:3*pieces)");
  verify->add_option("--identity-lambdas", o.identity_lambdas, "lambda values for the identity check");
  common(verify);

  auto fit_options = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "lambda,H,sigma CSV")->required();
    sub->add_option("--restarts", o.fit.restarts, "Number of multi-start runs")->capture_default_str();
    sub->add_option("--c0", o.fit.c0, "Lower bound on conductivity values")->capture_default_str();
    sub->add_option("--c1", o.fit.c1, "Upper bound on conductivity values")->capture_default_str();
    sub->add_option("--min-width", o.fit.min_width, "Smallest allowed piece width")->capture_default_str();
    sub->add_option("--max-iter", o.fit.max_iter, "Iteration limit per restart")->capture_default_str();
    sub->add_option("--ridge", o.fit.ridge, "Penalty on log-value differences")->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads (default PWCHEAT_THREADS or all cores)");
    sub->add_option("--penalty", o.select.penalty, "Model-selection penalty weight")->capture_default_str();
    sub->add_option("--merge-tol", o.select.merge_tol, "Merge neighbours closer than this in log a")
        ->capture_default_str();
    common(sub);
  };
  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "Fit an n-piece profile (or select n with --n-max)");
  fit_options(reconstruct_cmd);
  reconstruct_cmd->add_option("--n", o.n, "Number of pieces");
  reconstruct_cmd->add_option("--n-max", o.n_max, "Select the number of pieces up to this bound");
  auto* select_cmd = app.add_subcommand("select", "Model selection over n = 1..n-max");
  fit_options(select_cmd);
  select_cmd->add_option("--n-max", o.n_max, "Largest number of pieces")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << io::kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    write_error(err, "validation", e.what(), kValidation);
    return kValidation;
  }

  try {
    if (*transfer) return cmd_transfer(o, streams);
    if (*simulate_cmd) return cmd_simulate(o, streams);
    if (*synth) return cmd_synth(o, streams);
    if (*verify) return cmd_verify(o, streams);
    if (*reconstruct_cmd) return cmd_reconstruct(o, streams, false);
    if (*select_cmd) return cmd_reconstruct(o, streams, true);
  } catch (const IoError& e) {
    write_error(err, "io", e.what(), kIo);
    return kIo;
  } catch (const NumericalError& e) {
    write_error(err, "numerical", e.what(), kNumerical);
    return kNumerical;
  } catch (const std::invalid_argument& e) {  // ValidationError
    write_error(err, "validation", e.what(), kValidation);
    return kValidation;
  } catch (const std::domain_error& e) {
    write_error(err, "validation", e.what(), kValidation);
    return kValidation;
  }
  return kValidation;
}

}  // namespace pwcheat::cli

// sparsechan command line: Monte Carlo benchmarks, detector verification,
// complexity scaling and a single-instance demo.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 runtime failure.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparsechan/bench.hpp"
#include "sparsechan/estimators.hpp"
#include "sparsechan/scaling.hpp"
#include "sparsechan/simkit.hpp"
#include "sparsechan/verification.hpp"
#include "sparsechan/version.hpp"

namespace {

using namespace sparsechan;

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kRuntimeError = 3 };

struct ExperimentFlags {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::optional<std::string> seed, snr, algos, trials, m, k, l, eps, max_iter, timing;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--out", out_path, "output file (default: stdout)");
    cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", seed, "64-bit seed");
    cmd->add_option("--snr", snr, "SNR grid in dB, a:b:step or comma list");
    cmd->add_option("--algos", algos, "comma list of omapfg,lse,slse,omp");
    cmd->add_option("--trials", trials, "trials per SNR point");
    cmd->add_option("--M", m, "channel memory");
    cmd->add_option("--K", k, "sparsity");
    cmd->add_option("--L", l, "training length");
    cmd->add_option("--eps", eps, "OMAPFG convergence threshold");
    cmd->add_option("--max-iter", max_iter, "OMAPFG iteration cap");
    cmd->add_option("--timing", timing, "record wall time (true/false)");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) bench::apply_config_file(cfg, config_path);
    const std::pair<const char*, const std::optional<std::string>*> overrides[] = {
        {"seed", &seed}, {"snr", &snr}, {"algos", &algos}, {"trials", &trials}, {"M", &m},
        {"K", &k},       {"L", &l},     {"eps", &eps},     {"max_iter", &max_iter}, {"timing", &timing}};
    for (const auto& [key, value] : overrides)
      if (*value) bench::apply_setting(cfg, key, **value);
    cfg.validate();
    return cfg;
  }
};

/// Writes via `emit` to --out or stdout.
template <class Emit>
int write_output(const std::string& path, Emit&& emit) {
  if (path.empty()) {
    emit(std::cout);
    return std::cout ? kOk : kRuntimeError;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot open '" << path << "' for writing\n";
    return kRuntimeError;
  }
  emit(out);
  return out ? kOk : kRuntimeError;
}

int cmd_bench(const ExperimentFlags& flags) {
  ExperimentConfig cfg;
  try {
    cfg = flags.resolve();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  std::vector<ResultRecord> records;
  try {
    records = run_monte_carlo(cfg);
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
  for (const auto& r : records)
    if (r.flagged)
      std::cerr << "warning: " << algorithm_name(r.algorithm) << " at " << r.snr_db << " dB failed on "
                << r.failures << " trials\n";
  return write_output(flags.out_path, [&](std::ostream& os) {
    if (flags.format == "json")
      bench::write_json(os, cfg, records);
    else
      bench::write_csv(os, cfg, records);
  });
}

int cmd_verify(std::uint64_t seed, std::size_t instances, bool inject) {
  std::vector<verify::CheckResult> results;
  try {
    results = verify::run_suite(seed, instances, inject);
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.detail << ")\n";
    all = all && r.passed;
  }
  std::cout << (all ? "all checks passed\n" : "verification FAILED\n");
  return all ? kOk : kVerifyFailed;
}

int cmd_scale(std::uint64_t seed, std::size_t runs, const std::string& out_path) {
  std::vector<scaling::ScalePoint> by_m, by_l;
  try {
    for (std::size_t m : {64, 128, 256}) by_m.push_back(scaling::measure(m, 4, seed, runs));
    for (std::size_t l = 2; l <= 8; ++l) by_l.push_back(scaling::measure(128, l, seed, runs));
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }

  const int written = write_output(out_path, [&](std::ostream& os) {
    os << "# sparsechan " << kVersion << " detector scaling, median of " << runs << " runs\n";
    os << "M,L,states,additions,median_seconds\n";
    for (const auto* table : {&by_m, &by_l})
      for (const auto& p : *table)
        os << p.memory << ',' << p.bandwidth << ',' << p.states << ',' << p.additions << ','
           << bench::format_double(p.median_seconds) << '\n';
  });
  if (written != kOk) return written;

  bool ok = true;
  const double ratio = by_m[1].median_seconds / by_m[0].median_seconds;
  const bool time_ok = ratio <= 2.5;
  std::cerr << (time_ok ? "[PASS] " : "[FAIL] ") << "time(M=128)/time(M=64) at L=4 = " << ratio << " <= 2.5\n";
  ok = ok && time_ok;

  bool linear = true;
  for (const auto& p : by_m) linear = linear && p.additions == p.memory * 16;
  linear = linear && by_m[1].additions == 2 * by_m[0].additions && by_m[2].additions == 2 * by_m[1].additions;
  std::cerr << (linear ? "[PASS] " : "[FAIL] ") << "operation count exactly linear in M\n";
  ok = ok && linear;

  bool doubling = true;
  for (std::size_t i = 1; i < by_l.size(); ++i)
    doubling = doubling && by_l[i].additions == 2 * by_l[i - 1].additions && by_l[i].states == 2 * by_l[i - 1].states;
  std::cerr << (doubling ? "[PASS] " : "[FAIL] ") << "operation and state counts double per unit of L\n";
  ok = ok && doubling;
  return ok ? kOk : kVerifyFailed;
}

int cmd_demo(const ExperimentFlags& flags) {
  ExperimentConfig cfg;
  try {
    cfg = flags.resolve();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    const TrialInstance inst = draw_instance(cfg, 0, 0);
    std::vector<EstimatorOutput> outs;
    for (Algorithm a : cfg.algorithms) outs.push_back(run_algorithm(a, inst, cfg));

    return write_output(flags.out_path, [&](std::ostream& os) {
      os << "M=" << cfg.memory << " K=" << cfg.sparsity << " L=" << cfg.training_length
         << " SNR=" << cfg.snr_grid_db.front() << " dB sigma^2=" << inst.sigma2 << '\n';
      os << "training:";
      for (double s : inst.model.sequence()) os << (s > 0 ? " +1" : " -1");
      os << "\n\n";
      char line[256];
      std::snprintf(line, sizeof line, "%4s %10s", "tap", "true");
      os << line;
      for (Algorithm a : cfg.algorithms) {
        std::snprintf(line, sizeof line, " %10s", std::string(algorithm_name(a)).c_str());
        os << line;
      }
      os << '\n';
      for (std::size_t i = 0; i < cfg.memory; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        std::snprintf(line, sizeof line, "%4zu %10.4f", i, inst.channel.taps(ii));
        os << line;
        for (const auto& o : outs) {
          std::snprintf(line, sizeof line, " %10.4f", o.h_hat(ii));
          os << line;
        }
        os << '\n';
      }
      os << '\n';
      for (std::size_t a = 0; a < outs.size(); ++a) {
        os << algorithm_name(cfg.algorithms[a]) << ": squared error "
           << (inst.channel.taps - outs[a].h_hat).squaredNorm() << ", iterations " << outs[a].iterations
           << (outs[a].converged ? "" : " (not converged)") << '\n';
      }
      os << "CRB-S " << crb_s(inst.model, inst.channel, inst.sigma2) << ", CRB-US "
         << crb_us(inst.model, inst.sigma2) << '\n';
    });
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse channel estimation with exact trellis MAP support detection"};
  app.set_version_flag("--version", std::string("sparsechan ") + kVersion);
  app.require_subcommand(1);

  ExperimentFlags bench_flags;
  auto* bench_cmd = app.add_subcommand("bench", "Monte Carlo MSE-vs-SNR sweep");
  bench_flags.attach(bench_cmd);

  std::uint64_t verify_seed = 2024;
  std::size_t verify_instances = 200;
  bool inject = false;
  auto* verify_cmd = app.add_subcommand("verify", "trellis vs brute-force oracle and identity checks");
  verify_cmd->add_option("--seed", verify_seed, "instance seed");
  verify_cmd->add_option("--instances", verify_instances, "random instances")->check(CLI::PositiveNumber);
  verify_cmd->add_flag("--inject-offband", inject, "plant an off-band Gram entry (negative test)");

  std::uint64_t scale_seed = 7;
  std::size_t scale_runs = 20;
  std::string scale_out;
  auto* scale_cmd = app.add_subcommand("scale", "detector timing versus M and L");
  scale_cmd->add_option("--seed", scale_seed, "instance seed");
  scale_cmd->add_option("--runs", scale_runs, "timed runs per point")->check(CLI::PositiveNumber);
  scale_cmd->add_option("--out", scale_out, "output file (default: stdout)");

  ExperimentFlags demo_flags;
  demo_flags.snr = "20";
  auto* demo_cmd = app.add_subcommand("demo", "estimate one random channel with every algorithm");
  demo_flags.attach(demo_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (*bench_cmd) return cmd_bench(bench_flags);
  if (*verify_cmd) return cmd_verify(verify_seed, verify_instances, inject);
  if (*scale_cmd) return cmd_scale(scale_seed, scale_runs, scale_out);
  if (*demo_cmd) return cmd_demo(demo_flags);
  return kConfigError;
}

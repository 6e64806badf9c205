#pragma once

// Synthetic experiments: random sparse channels and training sequences, noise
// at a target SNR, Cramer-Rao bounds and the seeded Monte Carlo driver.
//
// SNR is per observation sample: SNR = ||U h||^2 / (N sigma^2).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sparsechan/estimators.hpp"
#include "sparsechan/numerics.hpp"

namespace sparsechan {

/// Counter-based generator: output n of the stream keyed by `key` is
/// splitmix64(key + n * golden). Streams derived from distinct keys are
/// independent of one another and of the order in which they are consumed.
class Substream {
 public:
  using result_type = std::uint64_t;

  explicit Substream(std::uint64_t key) noexcept : key_(key) {}

  /// Stream for one (trial, SNR point, purpose) triple under `seed`.
  static Substream derive(std::uint64_t seed, std::uint64_t trial, std::uint64_t point,
                          std::uint64_t purpose) noexcept {
    std::uint64_t k = mix(seed ^ 0x5bd1e9955bd1e995ULL);
    k = mix(k ^ (trial + 0x9e3779b97f4a7c15ULL));
    k = mix(k ^ (point + 0xc2b2ae3d27d4eb4fULL));
    k = mix(k ^ (purpose + 0x165667b19e3779f9ULL));
    return Substream(k);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Uniformly random size-K support with i.i.d. standard normal taps on it.
template <class Rng>
SparseChannel generate_sparse_channel(std::size_t memory, std::size_t sparsity, Rng& rng) {
  if (sparsity > memory) throw std::invalid_argument("sparsity K must not exceed M");
  std::vector<std::size_t> all(memory);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  chosen.reserve(sparsity);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), sparsity, rng);

  SparseChannel ch;
  ch.taps = Vector::Zero(static_cast<Eigen::Index>(memory));
  ch.support.assign(memory, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i : chosen) {
    double v = 0.0;
    while (v == 0.0) v = gauss(rng);
    ch.taps(static_cast<Eigen::Index>(i)) = v;
    ch.support[i] = 1;
  }
  return ch;
}

/// i.i.d. equiprobable +-1 symbols.
template <class Rng>
std::vector<double> generate_training_sequence(std::size_t length, Rng& rng) {
  if (length == 0) throw std::invalid_argument("training length must be >= 1");
  std::bernoulli_distribution coin(0.5);
  std::vector<double> u(length);
  for (auto& s : u) s = coin(rng) ? 1.0 : -1.0;
  return u;
}

/// Noise standard deviation that puts the clean output U h at `snr_db`.
inline double sigma_from_snr(const TrainingModel& model, const Vector& h, double snr_db) {
  const double power = (model.matrix() * h).squaredNorm();
  if (!(power > 0.0)) throw std::invalid_argument("sigma_from_snr: channel output has zero energy");
  const double sigma2 = power / (static_cast<double>(model.observation_length()) * std::pow(10.0, snr_db / 10.0));
  return std::sqrt(sigma2);
}

template <class Rng>
Vector awgn(const Vector& clean, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("awgn: sigma must be >= 0");
  Vector out = clean;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += gauss(rng);
  return out;
}

/// sigma^2 Tr{(U^T U)^{-1}}.
inline double crb_us(const TrainingModel& model, double sigma2) {
  return sigma2 * trace_inverse_gram(model.matrix());
}

/// sigma^2 Tr{(U_tau^T U_tau)^{-1}} over the true support columns.
inline double crb_s(const TrainingModel& model, const SparseChannel& channel, double sigma2) {
  return sigma2 * trace_inverse_gram(select_columns(model.matrix(), channel.support));
}

enum class Algorithm { kOmapfg, kLse, kSlse, kOmp };

inline std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kOmapfg: return "omapfg";
    case Algorithm::kLse: return "lse";
    case Algorithm::kSlse: return "slse";
    case Algorithm::kOmp: return "omp";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::kOmapfg, Algorithm::kLse, Algorithm::kSlse, Algorithm::kOmp})
    if (algorithm_name(a) == name) return a;
  return std::nullopt;
}

struct ExperimentConfig {
  std::size_t memory = 30;         // M
  std::size_t sparsity = 5;        // K
  std::size_t training_length = 5; // L
  std::vector<double> snr_grid_db = {0, 5, 10, 15, 20, 25, 30};
  std::size_t trials = 100;
  double eps = 0.01;
  std::size_t max_iter = 50;
  std::uint64_t seed = 1;
  std::vector<Algorithm> algorithms = {Algorithm::kOmapfg, Algorithm::kLse, Algorithm::kSlse,
                                       Algorithm::kOmp};
  bool record_timing = true;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const {
    if (memory == 0) throw std::invalid_argument("M must be >= 1");
    if (training_length == 0) throw std::invalid_argument("L must be >= 1");
    if (training_length > memory) throw std::invalid_argument("L must not exceed M");
    if (sparsity == 0 || sparsity > memory) throw std::invalid_argument("K must lie in [1, M]");
    if (trials == 0) throw std::invalid_argument("trials must be >= 1");
    if (snr_grid_db.empty()) throw std::invalid_argument("SNR grid must be non-empty");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (max_iter == 0) throw std::invalid_argument("max_iter must be >= 1");
    if (algorithms.empty()) throw std::invalid_argument("at least one algorithm is required");
    const bool map_based = std::find(algorithms.begin(), algorithms.end(), Algorithm::kOmapfg) != algorithms.end();
    if (map_based && !(2 * sparsity < memory))
      throw std::invalid_argument("omapfg needs K/M < 1/2 for a positive sparsity penalty");
  }

  double activity() const noexcept { return static_cast<double>(sparsity) / static_cast<double>(memory); }
};

struct ResultRecord {
  Algorithm algorithm = Algorithm::kLse;
  double snr_db = 0.0;
  double mse = 0.0;
  double nmse = 0.0;
  double crb_s = 0.0;
  double crb_us = 0.0;
  double mean_iterations = 0.0;
  std::size_t failures = 0;
  bool flagged = false;  ///< more than 5% of trials failed
  double wall_time_s = 0.0;
};

/// One synthetic draw: training, channel and noisy observation.
struct TrialInstance {
  TrainingModel model;
  SparseChannel channel;
  Vector y;
  double sigma2 = 0.0;
};

enum StreamPurpose : std::uint64_t { kChannelStream = 0, kTrainingStream = 1, kNoiseStream = 2 };

inline TrialInstance draw_instance(const ExperimentConfig& cfg, std::size_t point, std::size_t trial) {
  auto channel_rng = Substream::derive(cfg.seed, trial, point, kChannelStream);
  auto training_rng = Substream::derive(cfg.seed, trial, point, kTrainingStream);
  auto noise_rng = Substream::derive(cfg.seed, trial, point, kNoiseStream);

  SparseChannel channel = generate_sparse_channel(cfg.memory, cfg.sparsity, channel_rng);
  const auto u = generate_training_sequence(cfg.training_length, training_rng);
  TrainingModel model(u, cfg.memory);
  const double sigma = sigma_from_snr(model, channel.taps, cfg.snr_grid_db.at(point));
  Vector y = awgn(model.matrix() * channel.taps, sigma, noise_rng);
  return {std::move(model), std::move(channel), std::move(y), sigma * sigma};
}

/// Runs one estimator on an instance.
inline EstimatorOutput run_algorithm(Algorithm algo, const TrialInstance& inst, const ExperimentConfig& cfg) {
  switch (algo) {
    case Algorithm::kOmapfg:
      return omapfg_estimate(inst.model, inst.y, inst.sigma2, cfg.activity(), {cfg.eps, cfg.max_iter});
    case Algorithm::kOmp:
      return omp_estimate(inst.model, inst.y, cfg.sparsity);
    case Algorithm::kLse: {
      EstimatorOutput out;
      out.h_hat = lse_estimate(inst.model, inst.y);
      out.b_hat.assign(cfg.memory, 1);
      out.iterations = 1;
      out.converged = true;
      return out;
    }
    case Algorithm::kSlse: {
      EstimatorOutput out;
      const auto support = inst.channel.indices();
      out.h_hat = slse_genie(inst.model, inst.y, support);
      out.b_hat = inst.channel.support;
      out.iterations = 1;
      out.converged = true;
      return out;
    }
  }
  throw std::logic_error("unknown algorithm");
}

/// Seeded Monte Carlo sweep. Records are ordered algorithm-major in the
/// configured order, then by SNR grid position. MSE and NMSE average over the
/// trials that succeeded; failed trials are counted.
inline std::vector<ResultRecord> run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n_algo = cfg.algorithms.size();
  const std::size_t n_snr = cfg.snr_grid_db.size();

  struct Accum {
    double sq_err = 0.0, nsq_err = 0.0, iterations = 0.0, seconds = 0.0;
    std::size_t ok = 0, failed = 0;
  };
  std::vector<Accum> acc(n_algo * n_snr);
  std::vector<double> crb_s_sum(n_snr, 0.0), crb_us_sum(n_snr, 0.0);
  std::vector<std::size_t> crb_count(n_snr, 0);

  for (std::size_t p = 0; p < n_snr; ++p) {
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      std::optional<TrialInstance> inst;
      try {
        inst.emplace(draw_instance(cfg, p, t));
        const double cs = crb_s(inst->model, inst->channel, inst->sigma2);
        const double cu = crb_us(inst->model, inst->sigma2);
        crb_s_sum[p] += cs;
        crb_us_sum[p] += cu;
        ++crb_count[p];
      } catch (const std::exception&) {
        for (std::size_t a = 0; a < n_algo; ++a) ++acc[a * n_snr + p].failed;
        continue;
      }
      const double energy = inst->channel.taps.squaredNorm();
      for (std::size_t a = 0; a < n_algo; ++a) {
        Accum& slot = acc[a * n_snr + p];
        try {
          const auto start = std::chrono::steady_clock::now();
          const EstimatorOutput out = run_algorithm(cfg.algorithms[a], *inst, cfg);
          const auto stop = std::chrono::steady_clock::now();
          if (cfg.record_timing) slot.seconds += std::chrono::duration<double>(stop - start).count();
          const double err = (inst->channel.taps - out.h_hat).squaredNorm();
          slot.sq_err += err;
          slot.nsq_err += err / energy;
          slot.iterations += static_cast<double>(out.iterations);
          ++slot.ok;
        } catch (const std::exception&) {
          ++slot.failed;
        }
      }
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<ResultRecord> records;
  records.reserve(n_algo * n_snr);
  for (std::size_t a = 0; a < n_algo; ++a) {
    for (std::size_t p = 0; p < n_snr; ++p) {
      const Accum& s = acc[a * n_snr + p];
      ResultRecord r;
      r.algorithm = cfg.algorithms[a];
      r.snr_db = cfg.snr_grid_db[p];
      const double ok = static_cast<double>(s.ok);
      r.mse = s.ok ? s.sq_err / ok : nan;
      r.nmse = s.ok ? s.nsq_err / ok : nan;
      r.mean_iterations = s.ok ? s.iterations / ok : nan;
      const double nc = static_cast<double>(crb_count[p]);
      r.crb_s = crb_count[p] ? crb_s_sum[p] / nc : nan;
      r.crb_us = crb_count[p] ? crb_us_sum[p] / nc : nan;
      r.failures = s.failed;
      r.flagged = static_cast<double>(s.failed) > 0.05 * static_cast<double>(cfg.trials);
      r.wall_time_s = s.seconds;
      records.push_back(r);
    }
  }
  return records;
}

}  // namespace sparsechan

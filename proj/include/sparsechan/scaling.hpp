#pragma once

// Detector timing and operation counts as functions of M and L.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "sparsechan/simkit.hpp"
#include "sparsechan/trellis_map.hpp"

namespace sparsechan::scaling {

struct ScalePoint {
  std::size_t memory = 0;
  std::size_t bandwidth = 0;
  std::size_t states = 0;
  std::uint64_t additions = 0;
  double median_seconds = 0.0;  ///< per detector call
};

/// Random detector input with the given M and L (+-1 training, Gaussian h, y).
inline QuadraticForm random_form(std::size_t memory, std::size_t bandwidth, std::uint64_t seed) {
  Substream rng = Substream::derive(seed, memory, bandwidth, 0x5ca1e);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TrainingModel model(generate_training_sequence(bandwidth, rng), memory);
  Vector h(static_cast<Eigen::Index>(memory));
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = gauss(rng);
  Vector y(static_cast<Eigen::Index>(model.observation_length()));
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = gauss(rng);
  return compute_quadratics(model, h, y, lambda_from_prior(0.5, 1.0 / 6.0));
}

/// Median over `runs` samples; each sample times `batch` back-to-back calls.
inline ScalePoint measure(std::size_t memory, std::size_t bandwidth, std::uint64_t seed, std::size_t runs = 20,
                          std::size_t batch = 20) {
  const QuadraticForm q = random_form(memory, bandwidth, seed);
  ScalePoint p;
  p.memory = memory;
  p.bandwidth = bandwidth;
  std::vector<double> samples;
  samples.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < batch; ++k) {
      const TrellisRun run = map_detect_trellis(q);
      p.additions = run.additions;
      p.states = run.num_states();
    }
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double>(stop - start).count() / static_cast<double>(batch));
  }
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2), samples.end());
  p.median_seconds = samples[samples.size() / 2];
  return p;
}

}  // namespace sparsechan::scaling

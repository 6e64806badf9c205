#pragma once

// Oracle-equivalence and identity checks for the MAP detector, shared by the
// `verify` subcommand. Reference quantities are computed densely here
// (full matrix products) and never through the local-cost decomposition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "sparsechan/numerics.hpp"
#include "sparsechan/simkit.hpp"
#include "sparsechan/trellis_map.hpp"

namespace sparsechan::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// A random detector input together with the data that produced it.
struct DetectionInstance {
  TrainingModel model;
  Vector h_hat;
  Vector y;
  QuadraticForm form;
};

/// M in [6,12], L in [2,4], +-1 training, Gaussian h and noisy y, lambda from
/// a random prior.
template <class Rng>
DetectionInstance random_detection_instance(Rng& rng, std::size_t min_m = 6, std::size_t max_m = 12,
                                            std::size_t min_l = 2, std::size_t max_l = 4) {
  std::uniform_int_distribution<std::size_t> pick_m(min_m, max_m);
  std::uniform_int_distribution<std::size_t> pick_l(min_l, max_l);
  std::uniform_real_distribution<double> pick_sigma2(0.05, 2.0);
  std::uniform_real_distribution<double> pick_pa(0.02, 0.45);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t m = pick_m(rng);
  const std::size_t l = std::min(pick_l(rng), m);
  TrainingModel model(generate_training_sequence(l, rng), m);
  Vector h(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = gauss(rng);
  const double sigma2 = pick_sigma2(rng);
  Vector y = model.matrix() * h;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += std::sqrt(sigma2) * gauss(rng);
  const double lambda = lambda_from_prior(sigma2, pick_pa(rng));
  QuadraticForm form = compute_quadratics(model, h, y, lambda);
  return {std::move(model), std::move(h), std::move(y), std::move(form)};
}

inline Vector as_vector(const SupportMask& b) {
  Vector v(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) v(static_cast<Eigen::Index>(i)) = b[i] ? 1.0 : 0.0;
  return v;
}

/// b^T X b - 2 z^T b + lambda ||b||_0 with dense products.
inline double dense_quadratic_cost(const QuadraticForm& q, const SupportMask& b) {
  const Vector v = as_vector(b);
  return v.dot(q.gram * v) - 2.0 * q.correlation.dot(v) + q.lambda * static_cast<double>(support_size(b));
}

/// ||y - U diag(h) b||^2 + lambda ||b||_0.
inline double observation_cost(const TrainingModel& model, const Vector& h, const Vector& y,
                               const SupportMask& b, double lambda) {
  const Matrix uh = model.matrix() * h.asDiagonal();
  return (y - uh * as_vector(b)).squaredNorm() + lambda * static_cast<double>(support_size(b));
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Runs the full suite. With `inject_offband` an entry outside the band is
/// planted before the bandedness check, which must then fail.
inline std::vector<CheckResult> run_suite(std::uint64_t seed, std::size_t instances = 200,
                                          bool inject_offband = false) {
  Substream rng = Substream::derive(seed, 0, 0, 0xfeed);

  std::size_t exact_ok = 0, support_ok = 0, recompute_ok = 0, decomposition_ok = 0;
  std::size_t banded_ok = 0, reconcile_ok = 0, tail_ok = 0, counter_ok = 0, monotone_ok = 0;
  double worst_exact = 0.0, worst_reconcile = 0.0, worst_decomp = 0.0;
  std::bernoulli_distribution coin(0.5);

  for (std::size_t n = 0; n < instances; ++n) {
    DetectionInstance inst = random_detection_instance(rng);
    QuadraticForm& q = inst.form;
    const std::size_t m = q.memory();

    const TrellisRun run = map_detect_trellis(q);
    const auto [brute_support, brute_cost] = map_detect_bruteforce(q);

    const double scale = std::max({std::abs(run.best_cost), std::abs(brute_cost), 1e-300});
    worst_exact = std::max(worst_exact, std::abs(run.best_cost - brute_cost) / scale);
    if (close_rel(run.best_cost, brute_cost, 1e-9)) ++exact_ok;
    if (run.best_support == brute_support) ++support_ok;
    if (close_rel(dense_quadratic_cost(q, run.best_support), run.best_cost, 1e-9, 1e-10)) ++recompute_ok;

    SupportMask b(m);
    for (auto& bit : b) bit = coin(rng) ? 1 : 0;
    const double lhs = support_cost(q, b);
    const double rhs = dense_quadratic_cost(q, b);
    worst_decomp = std::max(worst_decomp, std::abs(lhs - rhs));
    if (close_rel(lhs, rhs, 1e-10, 1e-10)) ++decomposition_ok;

    if (inject_offband && n == 0 && m > q.bandwidth) {
      q.gram(0, static_cast<Eigen::Index>(q.bandwidth)) = 1e-3;
    }
    if (is_banded(q)) ++banded_ok;

    const double observed = observation_cost(inst.model, inst.h_hat, inst.y, run.best_support, q.lambda);
    worst_reconcile = std::max(worst_reconcile, std::abs(run.best_cost + q.y_energy - observed) / std::abs(observed));
    if (close_rel(run.best_cost + q.y_energy, observed, 1e-9)) ++reconcile_ok;

    const TrellisRun shortcut = map_detect_trellis(q, TailMode::kShortcut);
    if (shortcut.best_cost == run.best_cost && shortcut.best_support == run.best_support) ++tail_ok;

    if (run.additions == static_cast<std::uint64_t>(m) * (std::uint64_t{1} << q.bandwidth)) ++counter_ok;

    std::size_t prev = m + 1;
    bool monotone = true;
    for (double factor : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
      QuadraticForm scaled = q;
      scaled.lambda = q.lambda * factor;
      const std::size_t k = support_size(map_detect_trellis(scaled).best_support);
      if (k > prev) monotone = false;
      prev = k;
    }
    if (monotone) ++monotone_ok;
  }

  const double lam = lambda_from_prior(1.0, 1.0 / 6.0);
  const double lam_expected = 2.0 * std::log(5.0);

  auto tally = [instances](std::size_t ok) { return std::to_string(ok) + "/" + std::to_string(instances); };
  std::vector<CheckResult> out;
  out.push_back({"trellis cost equals brute-force minimum", exact_ok == instances,
                 tally(exact_ok) + ", worst rel err " + fmt(worst_exact)});
  out.push_back({"trellis support equals brute-force support", support_ok == instances, tally(support_ok)});
  out.push_back({"returned support re-evaluates to best cost", recompute_ok == instances, tally(recompute_ok)});
  out.push_back({"local-cost decomposition matches quadratic form", decomposition_ok == instances,
                 tally(decomposition_ok) + ", worst abs err " + fmt(worst_decomp)});
  out.push_back({"Gram matrix is banded", banded_ok == instances, tally(banded_ok)});
  out.push_back({"cost reconciles with observation objective", reconcile_ok == instances,
                 tally(reconcile_ok) + ", worst rel err " + fmt(worst_reconcile)});
  out.push_back({"tail shortcut matches explicit tail", tail_ok == instances, tally(tail_ok)});
  out.push_back({"operation count is M * 2^L", counter_ok == instances, tally(counter_ok)});
  out.push_back({"support size non-increasing in lambda", monotone_ok == instances, tally(monotone_ok)});
  out.push_back({"lambda(sigma2=1, p_a=1/6) = 2 ln 5", std::abs(lam - lam_expected) <= 1e-12,
                 "got " + std::to_string(lam)});
  return out;
}

}  // namespace sparsechan::verify

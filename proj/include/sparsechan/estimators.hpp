#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsechan/numerics.hpp"
#include "sparsechan/trellis_map.hpp"

namespace sparsechan {

/// Channel taps with their support indicator.
struct SparseChannel {
  Vector taps;
  SupportMask support;

  std::size_t memory() const noexcept { return support.size(); }
  std::size_t sparsity() const noexcept { return support_size(support); }

  /// Support positions in increasing order.
  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < support.size(); ++i)
      if (support[i]) out.push_back(i);
    return out;
  }
};

struct EstimatorOutput {
  Vector h_hat;
  SupportMask b_hat;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

struct OmapfgOptions {
  double eps = 0.01;
  std::size_t max_iter = 50;
};

/// J(h, b) = ||y - U (b .* h)||^2 + lambda ||b||_0.
inline double joint_objective(const TrainingModel& model, const Vector& y, const Vector& h,
                              const SupportMask& b, double lambda) {
  Vector masked = h;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (!b[i]) masked(static_cast<Eigen::Index>(i)) = 0.0;
  return (y - model.matrix() * masked).squaredNorm() + lambda * static_cast<double>(support_size(b));
}

/// Unstructured least-squares estimate of all M taps.
inline Vector lse_estimate(const TrainingModel& model, const Vector& y) {
  if (y.size() != static_cast<Eigen::Index>(model.observation_length()))
    throw std::invalid_argument("observation length must equal L+M-1");
  return least_squares(model.matrix(), y);
}

/// Genie-aided structured LS: least squares on the true support columns only.
inline Vector slse_genie(const TrainingModel& model, const Vector& y,
                         std::span<const std::size_t> support) {
  SupportMask mask(model.memory(), 0);
  for (std::size_t i : support) {
    if (i >= model.memory()) throw std::invalid_argument("slse_genie: support index out of range");
    mask[i] = 1;
  }
  return masked_least_squares(model, mask, y);
}

/// Alternates exact MAP support detection with a least-squares refit on the
/// detected support, starting from the unstructured LS estimate. Stops once
/// ||h_k - h_{k-1}||^2 / ||h_k||^2 <= eps or after max_iter rounds.
inline EstimatorOutput omapfg_estimate(const TrainingModel& model, const Vector& y, double sigma2,
                                       double p_a, const OmapfgOptions& opts = {}) {
  if (!(opts.eps > 0.0)) throw std::invalid_argument("omapfg: eps must be positive");
  if (opts.max_iter == 0) throw std::invalid_argument("omapfg: max_iter must be positive");
  const double lambda = lambda_from_prior(sigma2, p_a);

  EstimatorOutput out;
  Vector h = lse_estimate(model, y);
  out.b_hat.assign(model.memory(), 1);

  while (out.iterations < opts.max_iter) {
    const QuadraticForm q = compute_quadratics(model, h, y, lambda);
    SupportMask b = map_detect_trellis(q).best_support;
    Vector next = masked_least_squares(model, b, y);
    ++out.iterations;
    out.objective_trace.push_back(joint_objective(model, y, next, b, lambda));

    const double step = (next - h).squaredNorm();
    const double energy = next.squaredNorm();
    h = std::move(next);
    out.b_hat = std::move(b);

    if (energy == 0.0) {
      // An all-zero iterate is a fixed point only if the previous one was too.
      out.converged = (step == 0.0);
      break;
    }
    if (step / energy <= opts.eps) {
      out.converged = true;
      break;
    }
  }
  out.h_hat = std::move(h);
  return out;
}

/// Orthogonal matching pursuit with exactly K greedy selections (fewer if the
/// residual becomes orthogonal to every remaining column). Ties in the
/// correlation pick the lowest column index.
inline EstimatorOutput omp_estimate(const TrainingModel& model, const Vector& y, std::size_t sparsity) {
  const std::size_t m = model.memory();
  if (sparsity > m) throw std::invalid_argument("omp: K must not exceed M");
  if (y.size() != static_cast<Eigen::Index>(model.observation_length()))
    throw std::invalid_argument("observation length must equal L+M-1");
  const Matrix& u = model.matrix();

  EstimatorOutput out;
  out.b_hat.assign(m, 0);
  out.h_hat = Vector::Zero(static_cast<Eigen::Index>(m));
  Vector residual = y;

  for (std::size_t round = 0; round < sparsity; ++round) {
    const Vector corr = u.transpose() * residual;
    std::size_t pick = m;
    double best = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (out.b_hat[j]) continue;
      const double c = std::abs(corr(static_cast<Eigen::Index>(j)));
      if (c > best) {
        best = c;
        pick = j;
      }
    }
    if (pick == m) break;
    out.b_hat[pick] = 1;
    out.h_hat = masked_least_squares(model, out.b_hat, y);
    residual = y - u * out.h_hat;
    ++out.iterations;
    out.objective_trace.push_back(residual.squaredNorm());
  }
  out.converged = true;
  return out;
}

}  // namespace sparsechan

#pragma once

// Exact MAP support detection.
//
// Given a current tap estimate h, the support b minimizes
//
//   g(b) = b^T X b - 2 z^T b + lambda * ||b||_0,   X = U_h^T U_h,  z = U_h^T y,
//
// over {0,1}^M, with U_h = U diag(h). X is banded (X_ij = 0 for |i-j| >= L),
// so g splits into M local terms
//
//   f_i(b_i, s_i) = b_i * (X_ii + 2 * sum_{j=i-L+1}^{i-1} b_j X_ij - 2 z_i + lambda)
//
// that depend only on b_i and the state s_i = (b_{i-1}, ..., b_{i-L+1}).
// Minimizing the sum is then a min-sum (Viterbi) recursion on a trellis with
// 2^(L-1) states per stage, linear in M.
//
// Conventions:
//   - indices j < 0 in the inner sum contribute nothing;
//   - states pack the most recent bit in bit 0, advance is (s << 1 | b) & mask;
//   - unreachable states carry +inf, which absorbs under + and is neutral
//     under min;
//   - equal-weight merges keep the predecessor whose dropped bit is 0, which
//     selects the colexicographically smallest minimizer (the one whose last
//     differing bit is 0). The brute-force search uses the same order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sparsechan/numerics.hpp"

namespace sparsechan {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Raised for a Bernoulli prior that does not induce a positive penalty.
class InvalidPriorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct QuadraticForm {
  Matrix gram;            ///< X = U_h^T U_h, banded
  Vector correlation;     ///< z = U_h^T y
  double lambda = 0.0;
  std::size_t bandwidth = 1;  ///< L
  double y_energy = 0.0;      ///< ||y||^2, the constant dropped from g

  std::size_t memory() const noexcept { return static_cast<std::size_t>(correlation.size()); }
};

/// Builds X and z for the detector. Only the 2L-1 central bands are filled;
/// X_ij = h_i h_j r(|i-j|) where r is the autocorrelation of u.
inline QuadraticForm compute_quadratics(const TrainingModel& model, const Vector& h_hat,
                                        const Vector& y, double lambda) {
  const auto m = static_cast<Eigen::Index>(model.memory());
  const auto n = static_cast<Eigen::Index>(model.observation_length());
  const std::size_t len = model.training_length();
  if (h_hat.size() != m) throw std::invalid_argument("compute_quadratics: h_hat length must be M");
  if (y.size() != n) throw std::invalid_argument("compute_quadratics: y length must be L+M-1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("compute_quadratics: lambda must be >= 0");

  const auto& u = model.sequence();
  std::vector<double> acf(len, 0.0);
  for (std::size_t d = 0; d < len; ++d)
    for (std::size_t k = 0; k + d < len; ++k) acf[d] += u[k] * u[k + d];

  QuadraticForm q;
  q.gram = Matrix::Zero(m, m);
  q.correlation = Vector::Zero(m);
  q.lambda = lambda;
  q.bandwidth = len;
  q.y_energy = y.squaredNorm();

  for (Eigen::Index i = 0; i < m; ++i) {
    q.gram(i, i) = h_hat(i) * h_hat(i) * acf[0];
    for (std::size_t d = 1; d < len && i + static_cast<Eigen::Index>(d) < m; ++d) {
      const Eigen::Index j = i + static_cast<Eigen::Index>(d);
      const double v = h_hat(i) * h_hat(j) * acf[d];
      q.gram(i, j) = v;
      q.gram(j, i) = v;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < len; ++k) acc += u[k] * y(i + static_cast<Eigen::Index>(k));
    q.correlation(i) = h_hat(i) * acc;
  }
  return q;
}

/// lambda = 2 sigma^2 ln((1 - p_a) / p_a) for an i.i.d. Bernoulli(p_a) support.
inline double lambda_from_prior(double sigma2, double p_a) {
  if (!(sigma2 > 0.0)) throw InvalidPriorError("noise variance must be positive");
  if (!(p_a > 0.0 && p_a < 0.5))
    throw InvalidPriorError("activity probability must lie in (0, 1/2), got " + std::to_string(p_a));
  return 2.0 * sigma2 * std::log((1.0 - p_a) / p_a);
}

/// True when every entry with |i-j| >= L is exactly zero.
inline bool is_banded(const QuadraticForm& q) {
  const auto m = q.gram.rows();
  const auto band = static_cast<Eigen::Index>(q.bandwidth);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if ((i - j >= band || j - i >= band) && q.gram(i, j) != 0.0) return false;
  return true;
}

struct TrellisState {
  std::uint32_t bits = 0;  ///< (b_{i-1}, ..., b_{i-L+1}), most recent in bit 0
  std::size_t stage = 0;
};

inline std::uint32_t state_mask(std::size_t bandwidth) {
  return bandwidth <= 1 ? 0u : static_cast<std::uint32_t>((1u << (bandwidth - 1)) - 1u);
}

inline TrellisState advance(TrellisState s, std::uint8_t bit, std::size_t bandwidth) {
  return {((s.bits << 1) | (bit & 1u)) & state_mask(bandwidth), s.stage + 1};
}

/// Whether `s` can occur at its stage: bits that would refer to b_j with j < 0
/// or j >= M must be zero.
inline bool is_legal(TrellisState s, std::size_t memory, std::size_t bandwidth) {
  const std::size_t width = bandwidth - 1;
  if (s.stage > memory + bandwidth) return false;
  if (s.bits & ~state_mask(bandwidth)) return false;
  for (std::size_t k = 0; k < width; ++k) {
    if (!((s.bits >> k) & 1u)) continue;
    // bit k holds b_{stage-1-k}
    if (s.stage < k + 1) return false;
    if (s.stage - 1 - k >= memory) return false;
  }
  return true;
}

namespace detail {

// f_i(1, s). Shared by the recursion and the brute-force search so that equal
// supports produce bit-identical sums.
inline double active_cost(const QuadraticForm& q, std::size_t i, std::uint32_t bits) {
  const auto ii = static_cast<Eigen::Index>(i);
  const std::size_t reach = std::min(i, q.bandwidth - 1);
  double cross = 0.0;
  for (std::size_t k = 0; k < reach; ++k)
    if ((bits >> k) & 1u) cross += q.gram(ii, ii - 1 - static_cast<Eigen::Index>(k));
  return q.gram(ii, ii) + 2.0 * cross - 2.0 * q.correlation(ii) + q.lambda;
}

inline void check_form(const QuadraticForm& q) {
  if (q.memory() == 0) throw std::invalid_argument("detector: empty channel");
  if (q.bandwidth == 0) throw std::invalid_argument("detector: bandwidth must be >= 1");
  if (q.bandwidth > 21) throw std::invalid_argument("detector: bandwidth above 21 is not supported");
  if (q.gram.rows() != q.gram.cols() || q.gram.rows() != q.correlation.size())
    throw std::invalid_argument("detector: X and z dimensions disagree");
}

}  // namespace detail

/// Local cost f_i(b_i, s_i).
inline double local_cost(const QuadraticForm& q, std::size_t i, std::uint8_t bit, TrellisState state) {
  if (!bit) return 0.0;
  return detail::active_cost(q, i, state.bits);
}

/// g(b) evaluated as the ordered sum of local costs.
inline double support_cost(const QuadraticForm& q, const SupportMask& b) {
  double total = 0.0;
  std::uint32_t bits = 0;
  const std::uint32_t mask = state_mask(q.bandwidth);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i]) total += detail::active_cost(q, i, bits);
    bits = ((bits << 1) | (b[i] ? 1u : 0u)) & mask;
  }
  return total;
}

enum class TailMode {
  kExplicit,  ///< run the L zero-weight merge stages down to the single end state
  kShortcut,  ///< pick the best stage-M state directly
};

class TrellisRun {
 public:
  struct Edge {
    std::uint32_t from = 0;
    std::uint8_t bit = 0;
  };

  /// alpha[i][s]: minimum accumulated cost of reaching state s at stage i.
  std::vector<std::vector<double>> alpha;
  /// back[i][s]: winning incoming edge of state s at stage i (i >= 1).
  std::vector<std::vector<Edge>> back;
  SupportMask best_support;
  double best_cost = 0.0;
  std::size_t memory = 0;
  std::size_t bandwidth = 1;
  /// alpha + gamma additions over the M data stages.
  std::uint64_t additions = 0;
  /// Zero-weight merges in the tail.
  std::uint64_t tail_merges = 0;

  std::size_t num_states() const noexcept { return std::size_t{1} << (bandwidth - 1); }

  /// Survivor path m_i(x): the decided bits b_0..b_{min(i,M)-1} of the best
  /// path ending in `state` at `stage`, rebuilt from the back pointers.
  SupportMask survivor(std::size_t stage, std::uint32_t state) const {
    if (stage >= alpha.size()) throw std::out_of_range("survivor: stage out of range");
    SupportMask path(std::min(stage, memory), 0);
    for (std::size_t i = stage; i > 0; --i) {
      const Edge& e = back[i][state];
      if (i - 1 < memory) path[i - 1] = e.bit;
      state = e.from;
    }
    return path;
  }
};

/// Exact minimizer of g over {0,1}^M by the min-sum recursion.
inline TrellisRun map_detect_trellis(const QuadraticForm& q, TailMode tail = TailMode::kExplicit) {
  detail::check_form(q);
  const std::size_t m = q.memory();
  const std::size_t band = q.bandwidth;
  const std::uint32_t mask = state_mask(band);
  const std::size_t states = std::size_t{1} << (band - 1);

  TrellisRun run;
  run.memory = m;
  run.bandwidth = band;
  const std::size_t stages = (tail == TailMode::kExplicit) ? m + band : m;
  run.alpha.assign(stages + 1, std::vector<double>(states, kUnreachable));
  run.back.assign(stages + 1, std::vector<TrellisRun::Edge>(states));
  run.alpha[0][0] = 0.0;

  for (std::size_t i = 0; i < m; ++i) {
    const auto& cur = run.alpha[i];
    auto& next = run.alpha[i + 1];
    auto& back = run.back[i + 1];
    // Ascending s visits the predecessor with dropped bit 0 first; strict <
    // keeps it on ties. With L = 1 the b = 0 edge is likewise seen first.
    for (std::uint32_t s = 0; s < states; ++s) {
      for (std::uint8_t b = 0; b < 2; ++b) {
        const double gamma = b ? detail::active_cost(q, i, s) : 0.0;
        const double cand = cur[s] + gamma;
        ++run.additions;
        const std::uint32_t t = ((s << 1) | b) & mask;
        if (cand < next[t]) {
          next[t] = cand;
          back[t] = {s, b};
        }
      }
    }
  }

  std::uint32_t end_state = 0;
  if (tail == TailMode::kExplicit) {
    for (std::size_t i = m; i < m + band; ++i) {
      const auto& cur = run.alpha[i];
      auto& next = run.alpha[i + 1];
      auto& back = run.back[i + 1];
      for (std::uint32_t s = 0; s < states; ++s) {
        const std::uint32_t t = (s << 1) & mask;
        ++run.tail_merges;
        if (cur[s] < next[t]) {
          next[t] = cur[s];
          back[t] = {s, 0};
        }
      }
    }
    end_state = 0;
  } else {
    // Colexicographic order on final states: compare b_{M-1} (bit 0) first.
    auto reversed = [band](std::uint32_t s) {
      std::uint32_t r = 0;
      for (std::size_t k = 0; k + 1 < band; ++k) r |= ((s >> k) & 1u) << (band - 2 - k);
      return r;
    };
    const auto& last = run.alpha[m];
    for (std::uint32_t s = 1; s < states; ++s) {
      if (last[s] < last[end_state] ||
          (last[s] == last[end_state] && reversed(s) < reversed(end_state)))
        end_state = s;
    }
  }

  run.best_cost = run.alpha[stages][end_state];
  run.best_support = run.survivor(stages, end_state);
  return run;
}

/// Exhaustive minimizer of g; refuses M > 20. Scans supports as integers with
/// b_i in bit i, so the first strict minimum is the colexicographically
/// smallest one, matching the trellis tie-break.
inline std::pair<SupportMask, double> map_detect_bruteforce(const QuadraticForm& q) {
  detail::check_form(q);
  const std::size_t m = q.memory();
  if (m > 20) throw std::invalid_argument("brute-force detector limited to M <= 20");
  const std::uint32_t mask = state_mask(q.bandwidth);
  std::uint32_t best = 0;
  double best_cost = kUnreachable;
  for (std::uint32_t code = 0; code < (1u << m); ++code) {
    double total = 0.0;
    std::uint32_t bits = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint32_t b = (code >> i) & 1u;
      if (b) total += detail::active_cost(q, i, bits);
      bits = ((bits << 1) | b) & mask;
    }
    if (total < best_cost) {
      best_cost = total;
      best = code;
    }
  }
  SupportMask support(m, 0);
  for (std::size_t i = 0; i < m; ++i) support[i] = static_cast<std::uint8_t>((best >> i) & 1u);
  return {support, best_cost};
}

}  // namespace sparsechan

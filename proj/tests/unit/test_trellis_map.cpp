#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sparsechan/trellis_map.hpp"

namespace sparsechan {
namespace {

struct Instance {
  TrainingModel model;
  Vector h;
  Vector y;
  QuadraticForm q;
};

Instance random_instance(std::size_t m, std::size_t l, double lambda, std::mt19937_64& rng) {
  TrainingModel model(oracle::random_pm1(l, rng), m);
  Vector h = oracle::random_vector(m, rng);
  Vector y = oracle::random_vector(model.observation_length(), rng);
  QuadraticForm q = compute_quadratics(model, h, y, lambda);
  return {std::move(model), std::move(h), std::move(y), std::move(q)};
}

Vector bits(const SupportMask& b) {
  Vector v(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) v(static_cast<Eigen::Index>(i)) = b[i];
  return v;
}

// b^T X b - 2 z^T b + lambda ||b||_0, by plain loops.
double quadratic_oracle(const QuadraticForm& q, const SupportMask& b) {
  double total = 0.0;
  const std::size_t m = b.size();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      total += b[i] * b[j] * q.gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  for (std::size_t i = 0; i < m; ++i) total += b[i] * (q.lambda - 2.0 * q.correlation(static_cast<Eigen::Index>(i)));
  return total;
}

QuadraticForm manual_form(const Matrix& x, const Vector& z, double lambda, std::size_t band) {
  QuadraticForm q;
  q.gram = x;
  q.correlation = z;
  q.lambda = lambda;
  q.bandwidth = band;
  return q;
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-3});
}

TEST(ComputeQuadratics, ZeroChannel) {
  std::mt19937_64 rng(1);
  const TrainingModel model(oracle::random_pm1(3, rng), 6);
  const QuadraticForm q = compute_quadratics(model, Vector::Zero(6), oracle::random_vector(8, rng), 1.0);
  EXPECT_EQ(q.gram, Matrix::Zero(6, 6));
  EXPECT_EQ(q.correlation, Vector::Zero(6));
}

TEST(ComputeQuadratics, SingleTapTraining) {
  std::mt19937_64 rng(2);
  const TrainingModel model(std::vector<double>{1.0}, 5);
  const Vector h = oracle::random_vector(5, rng);
  const Vector y = oracle::random_vector(5, rng);
  const QuadraticForm q = compute_quadratics(model, h, y, 0.3);
  EXPECT_EQ(q.bandwidth, 1u);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_EQ(q.gram(i, j), i == j ? h(i) * h(i) : 0.0);
    EXPECT_DOUBLE_EQ(q.correlation(i), h(i) * y(i));
  }
}

TEST(ComputeQuadratics, MatchesDenseProducts) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(6, 3, 0.5, rng);
    const Matrix uh = inst.model.matrix() * inst.h.asDiagonal();
    const Matrix dense_x = uh.transpose() * uh;
    const Vector dense_z = uh.transpose() * inst.y;
    EXPECT_LE((inst.q.gram - dense_x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((inst.q.correlation - dense_z).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(inst.q.y_energy, inst.y.squaredNorm(), 1e-12);
  }
}

TEST(ComputeQuadratics, SymmetricAndBanded) {
  std::mt19937_64 rng(4);
  for (std::size_t l = 1; l <= 5; ++l) {
    const auto inst = random_instance(12, l, 0.1, rng);
    EXPECT_EQ(inst.q.gram, inst.q.gram.transpose());
    EXPECT_TRUE(is_banded(inst.q));
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(inst.q.gram);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(ComputeQuadratics, OffBandEntryDetected) {
  std::mt19937_64 rng(5);
  auto inst = random_instance(8, 3, 0.1, rng);
  inst.q.gram(1, 5) = 1e-6;
  EXPECT_FALSE(is_banded(inst.q));
}

TEST(ComputeQuadratics, RejectsBadInput) {
  const TrainingModel model(std::vector<double>{1, -1}, 4);
  EXPECT_THROW(compute_quadratics(model, Vector::Zero(3), Vector::Zero(5), 1.0), std::invalid_argument);
  EXPECT_THROW(compute_quadratics(model, Vector::Zero(4), Vector::Zero(4), 1.0), std::invalid_argument);
  EXPECT_THROW(compute_quadratics(model, Vector::Zero(4), Vector::Zero(5), -1.0), std::invalid_argument);
}

TEST(LambdaFromPrior, LogOfE) {
  const double p_a = 1.0 / (1.0 + std::exp(1.0));
  EXPECT_NEAR(lambda_from_prior(0.5, p_a), 1.0, 1e-14);
}

TEST(LambdaFromPrior, VanishesAtSymmetricPrior) {
  const double lam = lambda_from_prior(1.0, 0.5 - 1e-9);
  EXPECT_GT(lam, 0.0);
  EXPECT_LT(lam, 1e-7);
}

TEST(LambdaFromPrior, SparsityOneSixth) {
  EXPECT_NEAR(lambda_from_prior(1.0, 1.0 / 6.0), 3.2188758248682006, 1e-12);
}

TEST(LambdaFromPrior, RejectsInvalidPrior) {
  EXPECT_THROW(lambda_from_prior(1.0, 0.5), InvalidPriorError);
  EXPECT_THROW(lambda_from_prior(1.0, 0.7), InvalidPriorError);
  EXPECT_THROW(lambda_from_prior(1.0, 0.0), InvalidPriorError);
  EXPECT_THROW(lambda_from_prior(0.0, 0.1), InvalidPriorError);
}

TEST(TrellisStateTest, AdvanceShiftsInNewestBit) {
  TrellisState s{0b010, 3};
  const TrellisState t = advance(s, 1, 4);
  EXPECT_EQ(t.bits, 0b101u);
  EXPECT_EQ(t.stage, 4u);
  EXPECT_EQ(advance(TrellisState{0b111, 5}, 0, 4).bits, 0b110u);
  EXPECT_EQ(advance(TrellisState{0, 0}, 1, 1).bits, 0u);
}

TEST(TrellisStateTest, BoundaryLegality) {
  // L = 4: three state bits. At stage 1 only b_0 (bit 0) exists.
  EXPECT_TRUE(is_legal({0b001, 1}, 10, 4));
  EXPECT_FALSE(is_legal({0b010, 1}, 10, 4));
  EXPECT_TRUE(is_legal({0b111, 5}, 10, 4));
  // Past the end, recent bits refer to j >= M and must be zero.
  EXPECT_FALSE(is_legal({0b001, 11}, 10, 4));
  EXPECT_TRUE(is_legal({0b110, 11}, 10, 4));
  EXPECT_TRUE(is_legal({0, 14}, 10, 4));
}

TEST(LocalCost, InactiveTapCostsNothing) {
  std::mt19937_64 rng(6);
  const auto inst = random_instance(6, 3, 0.7, rng);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::uint32_t s = 0; s < 4; ++s) EXPECT_EQ(local_cost(inst.q, i, 0, {s, i}), 0.0);
}

TEST(LocalCost, FirstStageHasNoNeighbours) {
  std::mt19937_64 rng(7);
  const auto inst = random_instance(6, 3, 0.7, rng);
  const auto& q = inst.q;
  EXPECT_DOUBLE_EQ(local_cost(q, 0, 1, {0, 0}), q.gram(0, 0) - 2.0 * q.correlation(0) + q.lambda);
  // Bits that would refer to j < 0 are ignored.
  EXPECT_DOUBLE_EQ(local_cost(q, 0, 1, {0b11, 0}), q.gram(0, 0) - 2.0 * q.correlation(0) + q.lambda);
}

TEST(LocalCost, SumEqualsQuadraticForm) {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(6, 3, 0.4, rng);
    SupportMask b(6);
    for (auto& bit : b) bit = coin(rng);
    double total = 0.0;
    TrellisState s{0, 0};
    for (std::size_t i = 0; i < 6; ++i) {
      total += local_cost(inst.q, i, b[i], s);
      s = advance(s, b[i], inst.q.bandwidth);
    }
    EXPECT_NEAR(total, quadratic_oracle(inst.q, b), 1e-10);
    EXPECT_NEAR(support_cost(inst.q, b), quadratic_oracle(inst.q, b), 1e-10);
  }
}

TEST(MapTrellis, ZeroCorrelationSelectsNothing) {
  std::mt19937_64 rng(9);
  auto inst = random_instance(10, 3, 0.5, rng);
  inst.q.correlation.setZero();
  const TrellisRun run = map_detect_trellis(inst.q);
  EXPECT_EQ(run.best_support, SupportMask(10, 0));
  EXPECT_EQ(run.best_cost, 0.0);
}

TEST(MapTrellis, SingleTapClosedForm) {
  Matrix x(1, 1);
  x << 2.0;
  Vector z(1);
  z << 1.5;
  // 2 - 3 + 0.5 < 0 -> active
  EXPECT_EQ(map_detect_trellis(manual_form(x, z, 0.5, 1)).best_support, SupportMask{1});
  // 2 - 3 + 1.5 > 0 -> inactive
  EXPECT_EQ(map_detect_trellis(manual_form(x, z, 1.5, 1)).best_support, SupportMask{0});
  const auto [b, cost] = map_detect_bruteforce(manual_form(x, z, 0.5, 1));
  EXPECT_EQ(b, SupportMask{1});
  EXPECT_DOUBLE_EQ(cost, -0.5);
}

TEST(MapBruteForce, HandEnumeratedInstance) {
  Vector z(3);
  z << 1.0, 0.0, 0.0;
  const QuadraticForm q = manual_form(Matrix::Identity(3, 3), z, 0.5, 2);
  const auto [b, cost] = map_detect_bruteforce(q);
  EXPECT_EQ(b, (SupportMask{1, 0, 0}));
  EXPECT_DOUBLE_EQ(cost, -0.5);
  const TrellisRun run = map_detect_trellis(q);
  EXPECT_EQ(run.best_support, b);
  EXPECT_DOUBLE_EQ(run.best_cost, -0.5);
}

TEST(MapBruteForce, RefusesLargeProblems) {
  const QuadraticForm q = manual_form(Matrix::Identity(21, 21), Vector::Zero(21), 1.0, 2);
  EXPECT_THROW(map_detect_bruteforce(q), std::invalid_argument);
}

TEST(MapTrellis, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::size_t> pick_m(6, 12), pick_l(2, 4);
  std::uniform_real_distribution<double> pick_sigma2(0.05, 2.0), pick_pa(0.02, 0.45);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = pick_m(rng), l = pick_l(rng);
    const auto inst = random_instance(m, l, lambda_from_prior(pick_sigma2(rng), pick_pa(rng)), rng);
    const TrellisRun run = map_detect_trellis(inst.q);
    const auto [b, cost] = map_detect_bruteforce(inst.q);
    EXPECT_TRUE(rel_close(run.best_cost, cost, 1e-9)) << run.best_cost << " vs " << cost;
    EXPECT_EQ(run.best_support, b);
    EXPECT_TRUE(rel_close(quadratic_oracle(inst.q, run.best_support), run.best_cost, 1e-9));
  }
}

TEST(MapTrellis, TrainingLengthOneIsSeparable) {
  std::mt19937_64 rng(11);
  const auto inst = random_instance(9, 1, 0.3, rng);
  const TrellisRun run = map_detect_trellis(inst.q);
  for (Eigen::Index i = 0; i < 9; ++i) {
    const double gain = inst.q.gram(i, i) - 2.0 * inst.q.correlation(i) + inst.q.lambda;
    EXPECT_EQ(run.best_support[static_cast<std::size_t>(i)], gain < 0.0 ? 1 : 0);
  }
}

TEST(MapTrellis, TiesResolveToColexSmallestSupport) {
  // Every support costs zero: the all-zero support must win.
  const QuadraticForm flat = manual_form(Matrix::Zero(7, 7), Vector::Zero(7), 0.0, 3);
  EXPECT_EQ(map_detect_trellis(flat).best_support, SupportMask(7, 0));
  EXPECT_EQ(map_detect_trellis(flat, TailMode::kShortcut).best_support, SupportMask(7, 0));

  // Zero taps with lambda = 0 make their bits free; trellis and search agree.
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    TrainingModel model(oracle::random_pm1(3, rng), 8);
    Vector h = oracle::random_vector(8, rng);
    h(2) = 0.0;
    h(5) = 0.0;
    const QuadraticForm q = compute_quadratics(model, h, oracle::random_vector(10, rng), 0.0);
    const TrellisRun run = map_detect_trellis(q);
    const auto [b, cost] = map_detect_bruteforce(q);
    EXPECT_EQ(run.best_support, b);
    EXPECT_EQ(run.best_cost, cost);
    EXPECT_EQ(run.best_support[2], 0);
    EXPECT_EQ(run.best_support[5], 0);
  }
}

TEST(MapTrellis, TailShortcutAgreesWithExplicitTail) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_instance(10, 1 + trial % 5, 0.2, rng);
    const TrellisRun full = map_detect_trellis(inst.q, TailMode::kExplicit);
    const TrellisRun quick = map_detect_trellis(inst.q, TailMode::kShortcut);
    EXPECT_EQ(full.best_cost, quick.best_cost);
    EXPECT_EQ(full.best_support, quick.best_support);
  }
}

TEST(MapTrellis, RunBookkeeping) {
  std::mt19937_64 rng(14);
  const auto inst = random_instance(9, 4, 0.2, rng);
  const TrellisRun run = map_detect_trellis(inst.q);
  ASSERT_EQ(run.alpha.size(), 9u + 4u + 1u);
  EXPECT_EQ(run.num_states(), 8u);
  EXPECT_EQ(run.additions, 9u * 8u * 2u);
  EXPECT_EQ(run.tail_merges, 4u * 8u);

  // Only the empty state is reachable at stage 0; boundary stages reach 2^i states.
  for (std::size_t i = 0; i <= 3; ++i) {
    std::size_t reachable = 0;
    for (std::uint32_t s = 0; s < 8; ++s) {
      const bool finite = std::isfinite(run.alpha[i][s]);
      reachable += finite;
      EXPECT_EQ(finite, is_legal({s, i}, 9, 4)) << "stage " << i << " state " << s;
    }
    EXPECT_EQ(reachable, std::size_t{1} << i);
  }
  // Tail stages merge back to the single empty state.
  for (std::uint32_t s = 1; s < 8; ++s) EXPECT_FALSE(std::isfinite(run.alpha[13][s]));

  for (std::size_t i = 0; i < run.alpha.size(); ++i)
    for (std::uint32_t s = 0; s < 8; ++s)
      if (std::isfinite(run.alpha[i][s])) {
        const SupportMask path = run.survivor(i, s);
        EXPECT_EQ(path.size(), std::min<std::size_t>(i, 9));
        EXPECT_DOUBLE_EQ(support_cost(inst.q, path), run.alpha[i][s]);
      }
  EXPECT_EQ(run.survivor(13, 0), run.best_support);
}

TEST(MapTrellis, CostReconcilesWithObservationObjective) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_instance(11, 3, 0.8, rng);
    const TrellisRun run = map_detect_trellis(inst.q);
    const Matrix uh = inst.model.matrix() * inst.h.asDiagonal();
    const double observed = (inst.y - uh * bits(run.best_support)).squaredNorm() +
                            inst.q.lambda * static_cast<double>(support_size(run.best_support));
    EXPECT_TRUE(rel_close(run.best_cost + inst.q.y_energy, observed, 1e-9));
  }
}

TEST(MapTrellis, SupportShrinksAsPenaltyGrows) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(12, 3, 0.0, rng);
    std::size_t prev = 13;
    for (double lam = 0.0; lam <= 20.0; lam += 0.5) {
      inst.q.lambda = lam;
      const std::size_t k = support_size(map_detect_trellis(inst.q).best_support);
      EXPECT_LE(k, prev);
      prev = k;
    }
  }
}

TEST(MapTrellis, OperationCountScaling) {
  std::mt19937_64 rng(17);
  for (std::size_t l = 1; l <= 6; ++l) {
    const auto a = random_instance(20, l, 0.1, rng);
    const auto b = random_instance(40, l, 0.1, rng);
    const auto ra = map_detect_trellis(a.q);
    EXPECT_EQ(ra.additions, 20u * (std::uint64_t{1} << l));
    EXPECT_EQ(map_detect_trellis(b.q).additions, 2 * ra.additions);
  }
}

}  // namespace
}  // namespace sparsechan

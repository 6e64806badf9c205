#pragma once

// Dense real linear algebra shared by the estimators: the Toeplitz training
// matrix, full and column-masked least squares, and Gram trace utilities.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sparsechan {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// 0/1 indicator over channel taps; entry i is 1 when tap i is active.
using SupportMask = std::vector<std::uint8_t>;

/// Raised when a least-squares system is (numerically) rank deficient.
class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ratio of smallest to largest |R_ii| below which a triangular factor is
/// treated as singular.
inline constexpr double kRankTolerance = 1e-10;

/// Training sequence u of length L and its (L+M-1) x M convolution matrix.
class TrainingModel {
 public:
  TrainingModel(std::span<const double> u, std::size_t memory) {
    if (u.empty()) throw std::invalid_argument("training sequence must be non-empty");
    if (memory < u.size())
      throw std::invalid_argument("channel memory M=" + std::to_string(memory) +
                                  " is shorter than training length L=" + std::to_string(u.size()));
    u_.assign(u.begin(), u.end());
    memory_ = memory;
    const std::size_t n = observation_length();
    conv_ = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(memory_));
    for (std::size_t c = 0; c < memory_; ++c)
      for (std::size_t k = 0; k < u_.size(); ++k)
        conv_(static_cast<Eigen::Index>(c + k), static_cast<Eigen::Index>(c)) = u_[k];
  }

  std::size_t training_length() const noexcept { return u_.size(); }
  std::size_t memory() const noexcept { return memory_; }
  std::size_t observation_length() const noexcept { return u_.size() + memory_ - 1; }
  const std::vector<double>& sequence() const noexcept { return u_; }
  const Matrix& matrix() const noexcept { return conv_; }

 private:
  std::vector<double> u_;
  std::size_t memory_ = 0;
  Matrix conv_;
};

inline TrainingModel build_training_matrix(std::span<const double> u, std::size_t memory) {
  return TrainingModel(u, memory);
}

namespace detail {

inline void check_triangular_rank(const Eigen::HouseholderQR<Matrix>& qr) {
  const auto diag = qr.matrixQR().diagonal().cwiseAbs();
  const double largest = diag.maxCoeff();
  const double smallest = diag.minCoeff();
  if (!(largest > 0.0) || smallest / largest < kRankTolerance)
    throw RankDeficientError("least squares: triangular factor ratio " +
                             std::to_string(largest > 0.0 ? smallest / largest : 0.0) +
                             " below tolerance");
}

}  // namespace detail

/// Minimizes ||y - A x||_2 via Householder QR. Throws RankDeficientError when
/// A is numerically rank deficient.
inline Vector least_squares(const Matrix& a, const Vector& y) {
  if (a.rows() != y.size()) throw std::invalid_argument("least squares: row count mismatch");
  if (a.cols() > a.rows()) throw std::invalid_argument("least squares: underdetermined system");
  if (a.cols() == 0) return Vector(0);
  Eigen::HouseholderQR<Matrix> qr(a);
  detail::check_triangular_rank(qr);
  return qr.solve(y);
}

/// Submatrix of the columns of `a` selected by `mask`, in index order.
inline Matrix select_columns(const Matrix& a, const SupportMask& mask) {
  std::vector<Eigen::Index> cols;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) cols.push_back(static_cast<Eigen::Index>(i));
  Matrix out(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
  return out;
}

/// Least squares restricted to the columns of U selected by `mask`; the
/// result is exactly zero off the mask. An empty mask yields the zero vector.
inline Vector masked_least_squares(const TrainingModel& model, const SupportMask& mask,
                                   const Vector& y) {
  const auto m = static_cast<Eigen::Index>(model.memory());
  if (mask.size() != model.memory()) throw std::invalid_argument("mask length must equal M");
  if (y.size() != static_cast<Eigen::Index>(model.observation_length()))
    throw std::invalid_argument("observation length must equal L+M-1");
  Vector h = Vector::Zero(m);
  const Matrix sub = select_columns(model.matrix(), mask);
  if (sub.cols() == 0) return h;
  const Vector coeffs = least_squares(sub, y);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    if (mask[static_cast<std::size_t>(i)]) h(i) = coeffs(k++);
  return h;
}

/// Tr{(A^T A)^{-1}}, computed from the QR factor as ||R^{-1}||_F^2.
inline double trace_inverse_gram(const Matrix& a) {
  if (a.cols() == 0) return 0.0;
  if (a.cols() > a.rows()) throw RankDeficientError("trace_inverse_gram: more columns than rows");
  Eigen::HouseholderQR<Matrix> qr(a);
  try {
    detail::check_triangular_rank(qr);
  } catch (const RankDeficientError&) {
    throw RankDeficientError("trace_inverse_gram: singular Gram matrix");
  }
  const auto p = a.cols();
  const Matrix r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  return r_inv.squaredNorm();
}

inline std::size_t support_size(const SupportMask& mask) {
  std::size_t n = 0;
  for (auto b : mask) n += b ? 1 : 0;
  return n;
}

}  // namespace sparsechan

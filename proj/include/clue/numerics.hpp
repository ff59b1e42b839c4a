#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace clue {

// Row-major so that one row is one instance, matching the on-disk and CSV layouts.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

// N x D penultimate-layer features and N x C class posteriors.
using EmbeddingMatrix = Matrix;
using ProbMatrix = Matrix;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_euclidean(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("squared_euclidean: length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  typename DerivedA::Scalar acc(0);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto d = a.derived().coeff(i) - b.derived().coeff(i);
    acc += d * d;
  }
  return acc;
}

/// result(i, j) = ||points.row(i) - centers.row(j)||^2.
///
/// Evaluated as an explicit difference rather than the |a|^2 - 2ab + |b|^2
/// expansion, so entries are exactly zero for coincident rows and agree bitwise
/// with squared_euclidean.
template <typename DerivedP, typename DerivedC>
MatrixX<typename DerivedP::Scalar> pairwise_sq_dists(const Eigen::MatrixBase<DerivedP>& points,
                                                     const Eigen::MatrixBase<DerivedC>& centers) {
  using Scalar = typename DerivedP::Scalar;
  if (points.cols() != centers.cols()) {
    throw DimensionError("pairwise_sq_dists: points have " + std::to_string(points.cols()) +
                         " columns, centers " + std::to_string(centers.cols()));
  }
  MatrixX<Scalar> out(points.rows(), centers.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < centers.rows(); ++j) {
      out(i, j) = squared_euclidean(points.row(i), centers.row(j));
    }
  }
  return out;
}

/// Row-wise softmax of logits / temperature with per-row max subtraction.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits,
                                               typename Derived::Scalar temperature = 1) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) {
    throw std::invalid_argument("softmax_rows: temperature must be positive");
  }
  MatrixX<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar row_max = logits.row(i).maxCoeff();
    Scalar total(0);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      out(i, c) = std::exp((logits(i, c) - row_max) / temperature);
      total += out(i, c);
    }
    out.row(i) /= total;
  }
  return out;
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::DenseBase<Derived>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c) {
    if (row.derived().coeff(c) > row.derived().coeff(best)) best = c;
  }
  return best;
}

}  // namespace clue

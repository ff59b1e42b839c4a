#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "clue/numerics.hpp"
#include "clue/rng.hpp"
#include "clue/uncertainty.hpp"

namespace clue {

struct ClusterConfig {
  Eigen::Index k = 1;
  int max_iters = 300;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  int restarts = 1;

  void validate() const;
};

struct ClusterState {
  Matrix centroids;                     // K x D
  std::vector<Eigen::Index> assignment;  // per point, in [0, K)
  // Sum over sets of (1/Z_k) sum h ||x - mu_k||^2, Z_k the set's total weight.
  double objective = 0.0;
  // sum h ||x - mu_k||^2 without the per-set normalizer; this is what the
  // assign/update alternation actually descends.
  double weighted_sse = 0.0;
  int iterations_run = 0;
  // weighted_sse after every iteration of the winning restart.
  std::vector<double> trace;
};

/// Indices of the KMeans++ seeds: the first drawn proportional to weight, each
/// next proportional to weight times squared distance to the nearest seed so far.
std::vector<Eigen::Index> kmeanspp_seed_indices(const Matrix& points, const Vector& weights,
                                                Eigen::Index k, Rng& rng);

Matrix kmeanspp_init(const Matrix& points, const UncertaintyWeights& weights,
                     const ClusterConfig& cfg);

/// Lloyd iterations with a weighted-mean update, seeded by kmeanspp_init.
/// Returns the restart with the lowest weighted_sse.
ClusterState weighted_kmeans(const Matrix& points, const UncertaintyWeights& weights,
                             const ClusterConfig& cfg);

/// Both objective values for a fixed partition with weighted-mean centroids.
struct PartitionObjective {
  double normalized = 0.0;
  double unnormalized = 0.0;
};
PartitionObjective partition_objective(const Matrix& points, const Vector& weights,
                                       std::span<const Eigen::Index> assignment,
                                       Eigen::Index k);

/// For each centroid in index order, the nearest eligible point not already
/// claimed by an earlier centroid. Returned values are row indices of `points`.
std::vector<Eigen::Index> nearest_to_centroids(const ClusterState& state, const Matrix& points,
                                               std::span<const Eigen::Index> eligible);

/// (1/|X|) sum ||x - mean||^2.
template <typename Derived>
typename Derived::Scalar set_variance(const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  if (points.rows() == 0) throw std::invalid_argument("set_variance: empty set");
  const VectorX<Scalar> mean = points.colwise().mean().transpose();
  Scalar acc(0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    acc += (points.row(i).transpose() - mean).squaredNorm();
  }
  return acc / Scalar(points.rows());
}

/// (1/sum h) sum h_i ||x_i - mu||^2 with mu the h-weighted mean.
template <typename DerivedP, typename DerivedW>
typename DerivedP::Scalar weighted_set_variance(const Eigen::MatrixBase<DerivedP>& points,
                                                const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedP::Scalar;
  if (weights.size() != points.rows()) {
    throw DimensionError("weighted_set_variance: weights/points length mismatch");
  }
  const Scalar total = weights.sum();
  if (!(total > Scalar(0))) throw std::invalid_argument("weighted_set_variance: zero total weight");
  VectorX<Scalar> mu = VectorX<Scalar>::Zero(points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) mu += weights(i) * points.row(i).transpose();
  mu /= total;
  Scalar acc(0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    acc += weights(i) * (points.row(i).transpose() - mu).squaredNorm();
  }
  return acc / total;
}

}  // namespace clue

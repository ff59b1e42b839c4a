#include "clue/clustering.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace clue {

void ClusterConfig::validate() const {
  if (k < 1) throw std::invalid_argument("cluster config: k must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("cluster config: max_iters must be >= 1");
  if (!(tol >= 0.0)) throw std::invalid_argument("cluster config: tol must be >= 0");
  if (restarts < 1) throw std::invalid_argument("cluster config: restarts must be >= 1");
}

namespace {

void check_inputs(const Matrix& points, const Vector& weights, Eigen::Index k) {
  if (weights.size() != points.rows()) {
    throw DimensionError("clustering: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(points.rows()) + " points");
  }
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("clustering: negative weight");
  const auto usable = (weights.array() > 0.0).count();
  if (usable == 0) throw std::invalid_argument("clustering: all weights are zero");
  if (k > points.rows()) {
    throw std::invalid_argument("clustering: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(points.rows()) + " points");
  }
  if (k > usable) {
    throw std::invalid_argument("clustering: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(usable) + " points with positive weight");
  }
}

std::vector<Eigen::Index> assign_nearest(const Matrix& points, const Matrix& centroids) {
  std::vector<Eigen::Index> a(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = squared_euclidean(points.row(i), centroids.row(0));
    for (Eigen::Index j = 1; j < centroids.rows(); ++j) {
      const double d = squared_euclidean(points.row(i), centroids.row(j));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    a[i] = best;
  }
  return a;
}

double min_sq_dist_to(const Matrix& centroids, const auto& row) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
    best = std::min(best, squared_euclidean(row, centroids.row(j)));
  }
  return best;
}

// Weighted means per set. A set with no weight is reseeded at the point with the
// largest weight x distance-to-nearest-centroid.
Matrix update_centroids(const Matrix& points, const Vector& weights,
                        const std::vector<Eigen::Index>& assignment, const Matrix& previous) {
  const Eigen::Index k = previous.rows();
  Matrix sums = Matrix::Zero(k, points.cols());
  Vector mass = Vector::Zero(k);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(assignment[i]) += weights(i) * points.row(i);
    mass(assignment[i]) += weights(i);
  }
  Matrix next = previous;
  std::vector<Eigen::Index> empty;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (mass(j) > 0.0) {
      next.row(j) = sums.row(j) / mass(j);
    } else {
      empty.push_back(j);
    }
  }
  for (const Eigen::Index j : empty) {
    Eigen::Index pick = -1;
    double best = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (!(weights(i) > 0.0)) continue;
      const double score = weights(i) * min_sq_dist_to(next, points.row(i));
      if (score > best) {
        best = score;
        pick = i;
      }
    }
    next.row(j) = points.row(pick);
  }
  return next;
}

double weighted_sse(const Matrix& points, const Vector& weights,
                    const std::vector<Eigen::Index>& assignment, const Matrix& centroids) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    acc += weights(i) * squared_euclidean(points.row(i), centroids.row(assignment[i]));
  }
  return acc;
}

double normalized_objective(const Matrix& points, const Vector& weights,
                            const std::vector<Eigen::Index>& assignment, const Matrix& centroids) {
  const Eigen::Index k = centroids.rows();
  Vector num = Vector::Zero(k), mass = Vector::Zero(k);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    num(assignment[i]) += weights(i) * squared_euclidean(points.row(i), centroids.row(assignment[i]));
    mass(assignment[i]) += weights(i);
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (mass(j) > 0.0) acc += num(j) / mass(j);
  }
  return acc;
}

ClusterState lloyd(const Matrix& points, const Vector& weights, Matrix centroids,
                   const ClusterConfig& cfg) {
  ClusterState state;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    state.assignment = assign_nearest(points, centroids);
    Matrix next = update_centroids(points, weights, state.assignment, centroids);
    const double shift = (next - centroids).norm();
    centroids = std::move(next);
    state.trace.push_back(weighted_sse(points, weights, state.assignment, centroids));
    state.iterations_run = it;
    if (shift <= cfg.tol) break;
  }
  state.weighted_sse = state.trace.back();
  state.objective = normalized_objective(points, weights, state.assignment, centroids);
  state.centroids = std::move(centroids);
  return state;
}

}  // namespace

std::vector<Eigen::Index> kmeanspp_seed_indices(const Matrix& points, const Vector& weights,
                                                Eigen::Index k, Rng& rng) {
  check_inputs(points, weights, k);
  const Eigen::Index n = points.rows();
  std::vector<Eigen::Index> chosen;
  chosen.reserve(k);
  std::vector<bool> taken(n, false);

  auto first = static_cast<Eigen::Index>(rng.categorical(weights));
  chosen.push_back(first);
  taken[first] = true;

  Vector nearest(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    nearest(i) = squared_euclidean(points.row(i), points.row(first));
  }
  Vector mass(n);
  while (static_cast<Eigen::Index>(chosen.size()) < k) {
    for (Eigen::Index i = 0; i < n; ++i) mass(i) = taken[i] ? 0.0 : weights(i) * nearest(i);
    auto next = static_cast<Eigen::Index>(rng.categorical(mass));
    if (next == n) {
      // Remaining positive-weight points coincide with existing seeds.
      next = 0;
      while (taken[next] || !(weights(next) > 0.0)) ++next;
    }
    chosen.push_back(next);
    taken[next] = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest(i) = std::min(nearest(i), squared_euclidean(points.row(i), points.row(next)));
    }
  }
  return chosen;
}

Matrix kmeanspp_init(const Matrix& points, const UncertaintyWeights& weights,
                     const ClusterConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto idx = kmeanspp_seed_indices(points, weights.values, cfg.k, rng);
  Matrix seeds(cfg.k, points.cols());
  for (Eigen::Index j = 0; j < cfg.k; ++j) seeds.row(j) = points.row(idx[j]);
  return seeds;
}

ClusterState weighted_kmeans(const Matrix& points, const UncertaintyWeights& weights,
                             const ClusterConfig& cfg) {
  cfg.validate();
  check_inputs(points, weights.values, cfg.k);
  Rng rng(cfg.seed);
  ClusterState best;
  for (int r = 0; r < cfg.restarts; ++r) {
    const auto idx = kmeanspp_seed_indices(points, weights.values, cfg.k, rng);
    Matrix seeds(cfg.k, points.cols());
    for (Eigen::Index j = 0; j < cfg.k; ++j) seeds.row(j) = points.row(idx[j]);
    ClusterState run = lloyd(points, weights.values, std::move(seeds), cfg);
    if (r == 0 || run.weighted_sse < best.weighted_sse) best = std::move(run);
  }
  return best;
}

PartitionObjective partition_objective(const Matrix& points, const Vector& weights,
                                       std::span<const Eigen::Index> assignment,
                                       Eigen::Index k) {
  if (static_cast<Eigen::Index>(assignment.size()) != points.rows() ||
      weights.size() != points.rows()) {
    throw DimensionError("partition_objective: length mismatch");
  }
  Matrix sums = Matrix::Zero(k, points.cols());
  Vector mass = Vector::Zero(k);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(assignment[i]) += weights(i) * points.row(i);
    mass(assignment[i]) += weights(i);
  }
  Vector num = Vector::Zero(k);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::Index j = assignment[i];
    if (!(mass(j) > 0.0)) continue;
    const Vector mu = sums.row(j).transpose() / mass(j);
    num(j) += weights(i) * squared_euclidean(points.row(i).transpose(), mu);
  }
  PartitionObjective out;
  for (Eigen::Index j = 0; j < k; ++j) {
    out.unnormalized += num(j);
    if (mass(j) > 0.0) out.normalized += num(j) / mass(j);
  }
  return out;
}

std::vector<Eigen::Index> nearest_to_centroids(const ClusterState& state, const Matrix& points,
                                               std::span<const Eigen::Index> eligible) {
  const Eigen::Index k = state.centroids.rows();
  if (eligible.empty()) throw std::invalid_argument("nearest_to_centroids: no eligible points");
  if (static_cast<Eigen::Index>(eligible.size()) < k) {
    throw std::invalid_argument("nearest_to_centroids: " + std::to_string(eligible.size()) +
                                " eligible points for " + std::to_string(k) + " centroids");
  }
  std::vector<Eigen::Index> sorted(eligible.begin(), eligible.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<bool> claimed(sorted.size(), false);
  std::vector<Eigen::Index> out;
  out.reserve(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::size_t best = sorted.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < sorted.size(); ++e) {
      if (claimed[e]) continue;
      const double d = squared_euclidean(points.row(sorted[e]), state.centroids.row(j));
      if (d < best_d) {
        best_d = d;
        best = e;
      }
    }
    claimed[best] = true;
    out.push_back(sorted[best]);
  }
  return out;
}

}  // namespace clue

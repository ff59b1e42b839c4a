#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "clue/numerics.hpp"

namespace clue {

enum class WeightKind { entropy, margin, uniform };

inline std::string_view to_string(WeightKind kind);
inline WeightKind weight_kind_from_string(std::string_view name);

// Per-instance weights h_i >= 0 consumed by the weighted clustering.
struct UncertaintyWeights {
  Vector values;
  WeightKind kind = WeightKind::uniform;
};

struct DomainnessConfig {
  double gamma = 0.0;
};

namespace detail {
template <typename Derived>
void require_normalized(const Eigen::MatrixBase<Derived>& probs, const char* who) {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const auto s = probs.row(i).sum();
    if (!(std::abs(s - 1) <= 1e-9)) {
      throw std::invalid_argument(std::string(who) + ": row " + std::to_string(i) +
                                  " sums to " + std::to_string(s));
    }
  }
}
}  // namespace detail

/// Predictive entropy per row, with 0 log 0 taken as 0.
template <typename Derived>
VectorX<typename Derived::Scalar> entropy_rows(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  detail::require_normalized(probs, "entropy_rows");
  VectorX<Scalar> h(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Scalar acc(0);
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const Scalar p = probs(i, c);
      if (p > Scalar(0)) acc -= p * std::log(p);
    }
    // Rounding can leave a hair below zero for one-hot rows.
    h(i) = acc < Scalar(0) ? Scalar(0) : acc;
  }
  return h;
}

/// Gap between the two largest posteriors of each row.
template <typename Derived>
VectorX<typename Derived::Scalar> margin_rows(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  if (probs.cols() < 2) throw std::invalid_argument("margin_rows: need at least 2 classes");
  VectorX<Scalar> m(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Scalar first = probs(i, 0), second = probs(i, 1);
    if (second > first) std::swap(first, second);
    for (Eigen::Index c = 2; c < probs.cols(); ++c) {
      const Scalar p = probs(i, c);
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    m(i) = first - second;
  }
  return m;
}

/// 1 - margin, so that larger means more uncertain.
template <typename Derived>
VectorX<typename Derived::Scalar> margin_weights(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  return (VectorX<Scalar>::Ones(probs.rows()) - margin_rows(probs)).eval();
}

/// Probability that an instance is target-like under the entropy-based implicit
/// domain classifier: H / log C.
template <typename Derived>
VectorX<typename Derived::Scalar> targetness(const Eigen::MatrixBase<Derived>& probs,
                                             Eigen::Index num_classes) {
  using Scalar = typename Derived::Scalar;
  if (num_classes != probs.cols()) {
    throw DimensionError("targetness: num_classes " + std::to_string(num_classes) +
                         " != probs.cols() " + std::to_string(probs.cols()));
  }
  if (num_classes < 2) throw std::invalid_argument("targetness: need at least 2 classes");
  VectorX<Scalar> t = entropy_rows(probs) / std::log(Scalar(num_classes));
  return t.cwiseMin(Scalar(1));
}

/// Hard domain label: 1 (target) where H >= gamma, else 0 (source).
template <typename Derived>
VectorX<typename Derived::Scalar> hard_domain_label(const Eigen::MatrixBase<Derived>& probs,
                                                    const DomainnessConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  const double max_gamma = std::log(static_cast<double>(probs.cols()));
  if (cfg.gamma < 0.0 || cfg.gamma > max_gamma + 1e-12) {
    throw std::invalid_argument("hard_domain_label: gamma outside [0, log C]");
  }
  const VectorX<Scalar> h = entropy_rows(probs);
  VectorX<Scalar> d(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    // A uniform row's entropy can land one ulp under log C.
    d(i) = (h(i) >= Scalar(cfg.gamma) - Scalar(1e-12)) ? Scalar(1) : Scalar(0);
  }
  return d;
}

inline UncertaintyWeights make_weights(const ProbMatrix& probs, WeightKind kind) {
  switch (kind) {
    case WeightKind::entropy:
      return {entropy_rows(probs), kind};
    case WeightKind::margin:
      return {margin_weights(probs), kind};
    case WeightKind::uniform:
      return {Vector::Ones(probs.rows()), kind};
  }
  throw std::invalid_argument("make_weights: unknown kind");
}

inline UncertaintyWeights uniform_weights(Eigen::Index n) {
  return {Vector::Ones(n), WeightKind::uniform};
}

inline std::string_view to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::entropy: return "entropy";
    case WeightKind::margin: return "margin";
    case WeightKind::uniform: return "uniform";
  }
  return "?";
}

inline WeightKind weight_kind_from_string(std::string_view name) {
  if (name == "entropy") return WeightKind::entropy;
  if (name == "margin") return WeightKind::margin;
  if (name == "uniform") return WeightKind::uniform;
  throw std::invalid_argument("unknown weight kind '" + std::string(name) +
                              "' (valid: entropy, margin, uniform)");
}

}  // namespace clue

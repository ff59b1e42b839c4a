#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "clue/clustering.hpp"
#include "clue/numerics.hpp"
#include "clue/uncertainty.hpp"

namespace clue {

enum class Strategy { clue, uniform, entropy, margin, coreset, badge, aada };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);
const std::vector<std::string_view>& strategy_names();

struct StrategyConfig {
  Strategy name = Strategy::clue;
  // Applied only to the posteriors handed to the strategy.
  double temperature = 1.0;
  WeightKind clue_weight_kind = WeightKind::entropy;
  double aada_top_fraction = 0.02;

  void validate() const;
};

// Rows of embeddings / probs / logits are aligned with unlabeled_indices, which
// are global pool indices. When logits are present the strategy recomputes the
// posteriors at its own temperature; otherwise probs are used as given.
struct AcquisitionRequest {
  Eigen::Index budget = 0;
  EmbeddingMatrix embeddings;
  ProbMatrix probs;
  Matrix logits;
  std::vector<Eigen::Index> unlabeled_indices;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct Selection {
  std::vector<Eigen::Index> indices;  // global
  // Set by the clue strategy only.
  std::optional<double> clue_objective;
  std::optional<double> clue_weighted_sse;
};

ProbMatrix strategy_probs(const AcquisitionRequest& req, const StrategyConfig& cfg);

Selection select_clue_detailed(const AcquisitionRequest& req, const StrategyConfig& cfg);
std::vector<Eigen::Index> select_clue(const AcquisitionRequest& req, const StrategyConfig& cfg);
std::vector<Eigen::Index> select_entropy(const AcquisitionRequest& req,
                                         const StrategyConfig& cfg = {});
std::vector<Eigen::Index> select_margin(const AcquisitionRequest& req,
                                        const StrategyConfig& cfg = {});
std::vector<Eigen::Index> select_uniform(const AcquisitionRequest& req);
std::vector<Eigen::Index> select_coreset(const AcquisitionRequest& req,
                                         const Matrix& labeled_embeddings);
std::vector<Eigen::Index> select_badge(const AcquisitionRequest& req,
                                       const StrategyConfig& cfg = {});
std::vector<Eigen::Index> select_aada(const AcquisitionRequest& req, const StrategyConfig& cfg);

/// (p - onehot(argmax p)) outer phi(x), flattened class-major: column c*D + d.
Matrix badge_gradient_embeddings(const ProbMatrix& probs, const EmbeddingMatrix& embeddings);

/// AADA importance score t/(1 - t + eps) * H with t the implicit targetness.
Vector aada_scores(const ProbMatrix& probs);

/// Dispatch on cfg.name. labeled_embeddings feeds the coreset strategy only.
Selection select(const AcquisitionRequest& req, const StrategyConfig& cfg,
                 const Matrix& labeled_embeddings);

}  // namespace clue

#include "clue/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "clue/rng.hpp"

namespace clue {

namespace {

constexpr double kAadaEps = 1e-8;

// Positions 0..n-1 ordered by key (descending when `largest`), ties by global index.
std::vector<Eigen::Index> rank_positions(const Vector& key, const std::vector<Eigen::Index>& global,
                                         bool largest) {
  std::vector<Eigen::Index> pos(key.size());
  std::iota(pos.begin(), pos.end(), Eigen::Index{0});
  std::stable_sort(pos.begin(), pos.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (key(a) != key(b)) return largest ? key(a) > key(b) : key(a) < key(b);
    return global[a] < global[b];
  });
  return pos;
}

std::vector<Eigen::Index> to_global(const std::vector<Eigen::Index>& positions,
                                    const std::vector<Eigen::Index>& global) {
  std::vector<Eigen::Index> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(global[p]);
  return out;
}

std::vector<Eigen::Index> top_by(const Vector& key, const AcquisitionRequest& req, bool largest) {
  auto pos = rank_positions(key, req.unlabeled_indices, largest);
  pos.resize(req.budget);
  return to_global(pos, req.unlabeled_indices);
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::clue: return "clue";
    case Strategy::uniform: return "uniform";
    case Strategy::entropy: return "entropy";
    case Strategy::margin: return "margin";
    case Strategy::coreset: return "coreset";
    case Strategy::badge: return "badge";
    case Strategy::aada: return "aada";
  }
  return "?";
}

const std::vector<std::string_view>& strategy_names() {
  static const std::vector<std::string_view> names{"clue",    "uniform", "entropy", "margin",
                                                   "coreset", "badge",   "aada"};
  return names;
}

Strategy strategy_from_string(std::string_view name) {
  static const Strategy all[] = {Strategy::clue,    Strategy::uniform, Strategy::entropy,
                                 Strategy::margin,  Strategy::coreset, Strategy::badge,
                                 Strategy::aada};
  for (auto s : all) {
    if (to_string(s) == name) return s;
  }
  std::string valid;
  for (auto n : strategy_names()) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "' (valid: " + valid + ")");
}

void StrategyConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("strategy: temperature must be > 0");
  if (!(aada_top_fraction > 0.0 && aada_top_fraction <= 1.0)) {
    throw std::invalid_argument("strategy: aada_top_fraction must be in (0, 1]");
  }
}

void AcquisitionRequest::validate() const {
  const auto n = static_cast<Eigen::Index>(unlabeled_indices.size());
  if (budget < 1) throw std::invalid_argument("acquisition: budget must be >= 1");
  if (budget > n) {
    throw std::invalid_argument("acquisition: budget " + std::to_string(budget) + " exceeds " +
                                std::to_string(n) + " unlabeled instances");
  }
  if (embeddings.rows() != n) throw DimensionError("acquisition: embeddings not row-aligned");
  if (logits.size() > 0 && logits.rows() != n) {
    throw DimensionError("acquisition: logits not row-aligned");
  }
  if (logits.size() == 0 && probs.rows() != n) {
    throw DimensionError("acquisition: probs not row-aligned");
  }
  std::vector<Eigen::Index> sorted(unlabeled_indices);
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("acquisition: duplicate unlabeled index");
  }
}

ProbMatrix strategy_probs(const AcquisitionRequest& req, const StrategyConfig& cfg) {
  if (req.logits.size() > 0) return softmax_rows(req.logits, cfg.temperature);
  return req.probs;
}

Selection select_clue_detailed(const AcquisitionRequest& req, const StrategyConfig& cfg) {
  req.validate();
  cfg.validate();
  const ProbMatrix probs = strategy_probs(req, cfg);
  const UncertaintyWeights w = make_weights(probs, cfg.clue_weight_kind);

  ClusterConfig cc;
  cc.k = req.budget;
  cc.seed = req.rng_seed;
  const ClusterState state = weighted_kmeans(req.embeddings, w, cc);

  std::vector<Eigen::Index> all(req.unlabeled_indices.size());
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const auto picked = nearest_to_centroids(state, req.embeddings, all);

  Selection sel;
  sel.indices = to_global(picked, req.unlabeled_indices);
  sel.clue_objective = state.objective;
  sel.clue_weighted_sse = state.weighted_sse;
  return sel;
}

std::vector<Eigen::Index> select_clue(const AcquisitionRequest& req, const StrategyConfig& cfg) {
  return select_clue_detailed(req, cfg).indices;
}

std::vector<Eigen::Index> select_entropy(const AcquisitionRequest& req, const StrategyConfig& cfg) {
  req.validate();
  return top_by(entropy_rows(strategy_probs(req, cfg)), req, true);
}

std::vector<Eigen::Index> select_margin(const AcquisitionRequest& req, const StrategyConfig& cfg) {
  req.validate();
  return top_by(margin_rows(strategy_probs(req, cfg)), req, false);
}

std::vector<Eigen::Index> select_uniform(const AcquisitionRequest& req) {
  req.validate();
  Rng rng(req.rng_seed);
  auto perm = rng.permutation(req.unlabeled_indices.size());
  std::vector<Eigen::Index> out;
  out.reserve(req.budget);
  for (Eigen::Index i = 0; i < req.budget; ++i) out.push_back(req.unlabeled_indices[perm[i]]);
  return out;
}

std::vector<Eigen::Index> select_coreset(const AcquisitionRequest& req,
                                         const Matrix& labeled_embeddings) {
  req.validate();
  const Matrix& pts = req.embeddings;
  const Eigen::Index n = pts.rows();
  if (labeled_embeddings.rows() > 0 && labeled_embeddings.cols() != pts.cols()) {
    throw DimensionError("coreset: labeled embeddings have a different width");
  }

  // Squared distance of each pool point to its nearest covered point.
  Vector cover = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < labeled_embeddings.rows(); ++j) {
      cover(i) = std::min(cover(i), squared_euclidean(pts.row(i), labeled_embeddings.row(j)));
    }
  }
  std::vector<bool> taken(n, false);
  std::vector<Eigen::Index> out;
  out.reserve(req.budget);

  auto pick_farthest = [&](const Vector& score) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best < 0 || score(i) > score(best) ||
          (score(i) == score(best) && req.unlabeled_indices[i] < req.unlabeled_indices[best])) {
        best = i;
      }
    }
    return best;
  };

  if (labeled_embeddings.rows() == 0) {
    const Eigen::RowVectorXd mean = pts.colwise().mean();
    Vector to_mean(n);
    for (Eigen::Index i = 0; i < n; ++i) to_mean(i) = squared_euclidean(pts.row(i), mean);
    const Eigen::Index first = pick_farthest(to_mean);
    taken[first] = true;
    out.push_back(first);
    for (Eigen::Index i = 0; i < n; ++i) {
      cover(i) = squared_euclidean(pts.row(i), pts.row(first));
    }
  }
  while (static_cast<Eigen::Index>(out.size()) < req.budget) {
    const Eigen::Index next = pick_farthest(cover);
    taken[next] = true;
    out.push_back(next);
    for (Eigen::Index i = 0; i < n; ++i) {
      cover(i) = std::min(cover(i), squared_euclidean(pts.row(i), pts.row(next)));
    }
  }
  return to_global(out, req.unlabeled_indices);
}

Matrix badge_gradient_embeddings(const ProbMatrix& probs, const EmbeddingMatrix& embeddings) {
  if (probs.rows() != embeddings.rows()) {
    throw DimensionError("badge_gradient_embeddings: probs/embeddings not row-aligned");
  }
  const Eigen::Index c_count = probs.cols(), d = embeddings.cols();
  Matrix g(probs.rows(), c_count * d);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const Eigen::Index yhat = argmax(probs.row(i));
    for (Eigen::Index c = 0; c < c_count; ++c) {
      const double coeff = probs(i, c) - (c == yhat ? 1.0 : 0.0);
      g.row(i).segment(c * d, d) = coeff * embeddings.row(i);
    }
  }
  return g;
}

std::vector<Eigen::Index> select_badge(const AcquisitionRequest& req, const StrategyConfig& cfg) {
  req.validate();
  const Matrix g = badge_gradient_embeddings(strategy_probs(req, cfg), req.embeddings);
  const Eigen::Index n = g.rows();
  Rng rng(req.rng_seed);
  std::vector<bool> taken(n, false);
  std::vector<Eigen::Index> chosen;
  chosen.reserve(req.budget);

  // The first seed is drawn proportional to ||g||^2, i.e. D^2 sampling from the origin.
  Vector mass = g.rowwise().squaredNorm();
  auto first = static_cast<Eigen::Index>(rng.categorical(mass));
  if (first == n) first = static_cast<Eigen::Index>(rng.below(n));
  chosen.push_back(first);
  taken[first] = true;

  Vector nearest(n);
  for (Eigen::Index i = 0; i < n; ++i) nearest(i) = squared_euclidean(g.row(i), g.row(first));
  while (static_cast<Eigen::Index>(chosen.size()) < req.budget) {
    for (Eigen::Index i = 0; i < n; ++i) mass(i) = taken[i] ? 0.0 : nearest(i);
    auto next = static_cast<Eigen::Index>(rng.categorical(mass));
    if (next == n) {
      next = 0;
      while (taken[next]) ++next;
    }
    chosen.push_back(next);
    taken[next] = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest(i) = std::min(nearest(i), squared_euclidean(g.row(i), g.row(next)));
    }
  }
  return to_global(chosen, req.unlabeled_indices);
}

Vector aada_scores(const ProbMatrix& probs) {
  const Vector h = entropy_rows(probs);
  const Vector t = targetness(probs, probs.cols());
  Vector s(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) s(i) = t(i) / (1.0 - t(i) + kAadaEps) * h(i);
  return s;
}

std::vector<Eigen::Index> select_aada(const AcquisitionRequest& req, const StrategyConfig& cfg) {
  req.validate();
  cfg.validate();
  const Vector score = aada_scores(strategy_probs(req, cfg));
  const auto n = static_cast<Eigen::Index>(req.unlabeled_indices.size());
  auto pool_size = static_cast<Eigen::Index>(
      std::ceil(std::max<double>(static_cast<double>(req.budget), cfg.aada_top_fraction * n)));
  pool_size = std::min(pool_size, n);

  auto ranked = rank_positions(score, req.unlabeled_indices, true);
  ranked.resize(pool_size);
  Rng rng(req.rng_seed);
  rng.shuffle(ranked);
  ranked.resize(req.budget);
  return to_global(ranked, req.unlabeled_indices);
}

Selection select(const AcquisitionRequest& req, const StrategyConfig& cfg,
                 const Matrix& labeled_embeddings) {
  cfg.validate();
  switch (cfg.name) {
    case Strategy::clue: return select_clue_detailed(req, cfg);
    case Strategy::uniform: return {select_uniform(req), {}, {}};
    case Strategy::entropy: return {select_entropy(req, cfg), {}, {}};
    case Strategy::margin: return {select_margin(req, cfg), {}, {}};
    case Strategy::coreset: return {select_coreset(req, labeled_embeddings), {}, {}};
    case Strategy::badge: return {select_badge(req, cfg), {}, {}};
    case Strategy::aada: return {select_aada(req, cfg), {}, {}};
  }
  throw std::invalid_argument("select: unknown strategy");
}

}  // namespace clue

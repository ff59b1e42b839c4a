#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clue/data.hpp"
#include "clue/model.hpp"
#include "clue/sampling.hpp"

namespace clue {

enum class TrainingMode { finetune, mme };

std::string_view to_string(TrainingMode m);
TrainingMode training_mode_from_string(std::string_view name);

struct PhaseSchedule {
  OptimizerMethod method = OptimizerMethod::adam;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  int epochs = 1;
  // Lower bound on optimizer steps per call, for phases whose epoch is tiny
  // (a pass over a handful of labeled points).
  int min_steps = 0;
};

struct ExperimentConfig {
  int rounds = 10;
  Eigen::Index budget = 20;
  StrategyConfig strategy;
  LossWeights loss;
  TrainingMode mode = TrainingMode::mme;
  std::vector<Eigen::Index> hidden{64, 64};
  Activation activation = Activation::tanh;
  PhaseSchedule source_phase{OptimizerMethod::adam, 1e-2, 1e-5, 20, 0};
  PhaseSchedule warmup_phase{OptimizerMethod::adam, 1e-3, 1e-5, 5, 0};
  PhaseSchedule round_phase{OptimizerMethod::adam, 1e-3, 1e-5, 20, 0};
  Eigen::Index batch_size = 64;
  std::vector<std::uint64_t> seeds{0};

  void validate() const;
};

struct RoundRecord {
  int round = 0;
  std::vector<Eigen::Index> selected;  // target rows acquired this round
  std::size_t cumulative_labels = 0;
  double accuracy = 0.0;      // on target_test
  double mean_entropy = 0.0;  // over target_train at temperature 1
  std::optional<double> clue_objective;
  std::optional<double> clue_weighted_sse;
  double wall_ms = 0.0;
};

struct RunTrace {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;  // round 0 first
  std::optional<std::string> error;
};

// Per-seed Active DA run. The state after round r is (params, pool); every
// random draw in round r derives from (seed, r), so a run resumed from a saved
// state replays exactly.
class SeedRun {
 public:
  SeedRun(const ExperimentConfig& cfg, const DomainPair& data, std::uint64_t seed);

  // Source training, then unsupervised adaptation in mme mode. Returns round 0.
  RoundRecord prepare();
  RoundRecord next_round();

  int round() const { return round_; }
  const NetworkParams& params() const { return params_; }
  const PoolState& pool() const { return pool_; }
  void restore(NetworkParams params, PoolState pool, int round);

 private:
  void train_source();
  void train_adaptation(const PhaseSchedule& phase, int round_tag);
  RoundRecord record(int round, double started_ms) const;
  void guard(std::span<const Eigen::Index> target_rows) const;

  const ExperimentConfig& cfg_;
  const DomainPair& data_;
  std::uint64_t seed_;
  NetworkParams params_;
  PoolState pool_;
  std::vector<Eigen::Index> target_train_;
  std::vector<Eigen::Index> target_test_;
  std::vector<bool> is_test_;
  int round_ = 0;
};

/// Runs every seed (up to `threads` at once). A seed that throws yields a trace
/// with `error` set; the others are unaffected.
std::vector<RunTrace> run_experiment(const ExperimentConfig& cfg, const DomainPair& data,
                                     int threads = 1);

struct RoundSummary {
  int round = 0;
  std::size_t labels = 0;
  double acc_mean = 0.0;
  double acc_std = 0.0;  // sample std (n - 1); 0 for a single trace
  std::size_t count = 0;
};

std::vector<RoundSummary> aggregate(const std::vector<RunTrace>& traces);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace clue

#include "clue/driver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "clue/rng.hpp"

namespace clue {

std::string_view to_string(TrainingMode m) { return m == TrainingMode::mme ? "mme" : "finetune"; }

TrainingMode training_mode_from_string(std::string_view name) {
  if (name == "mme") return TrainingMode::mme;
  if (name == "finetune") return TrainingMode::finetune;
  throw std::invalid_argument("unknown training mode '" + std::string(name) +
                              "' (valid: finetune, mme)");
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("experiment: rounds must be >= 1");
  if (budget < 1) throw std::invalid_argument("experiment: budget must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("experiment: seeds must be non-empty");
  if (batch_size < 1) throw std::invalid_argument("experiment: batch_size must be >= 1");
  strategy.validate();
  loss.validate();
  for (const auto* p : {&source_phase, &warmup_phase, &round_phase}) {
    if (!(p->learning_rate > 0.0)) throw std::invalid_argument("experiment: learning_rate must be > 0");
    if (p->epochs < 0 || p->min_steps < 0) {
      throw std::invalid_argument("experiment: epochs/min_steps must be >= 0");
    }
  }
  for (const auto h : hidden) {
    if (h < 1) throw std::invalid_argument("experiment: hidden widths must be >= 1");
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the three words.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

namespace {

enum Stream : std::uint64_t { kInit = 1, kSource = 2, kWarmup = 3, kRound = 4, kSelect = 5 };

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

LabeledBatch draw_batch(const Dataset& d, std::span<const Eigen::Index> pool,
                        std::span<const int> pool_labels, Eigen::Index size, Rng& rng) {
  LabeledBatch b;
  if (pool.empty()) return b;
  b.inputs.resize(size, d.features.cols());
  b.labels.resize(size);
  for (Eigen::Index r = 0; r < size; ++r) {
    const std::size_t k = rng.below(pool.size());
    b.inputs.row(r) = d.features.row(pool[k]);
    b.labels[r] = pool_labels.empty() ? d.labels[pool[k]] : pool_labels[k];
  }
  return b;
}

int steps_for(const PhaseSchedule& phase, std::size_t epoch_items, Eigen::Index batch) {
  const auto per_epoch = static_cast<long long>((epoch_items + batch - 1) / batch);
  return static_cast<int>(std::max<long long>(phase.epochs * per_epoch, phase.min_steps));
}

OptimizerState make_optimizer(const PhaseSchedule& phase) {
  OptimizerState opt;
  opt.method = phase.method;
  opt.learning_rate = phase.learning_rate;
  opt.weight_decay = phase.weight_decay;
  return opt;
}

}  // namespace

SeedRun::SeedRun(const ExperimentConfig& cfg, const DomainPair& data, std::uint64_t seed)
    : cfg_(cfg), data_(data), seed_(seed) {
  cfg_.validate();
  data_.source.validate();
  data_.target.validate();
  if (data_.source.num_classes != data_.target.num_classes ||
      data_.source.features.cols() != data_.target.features.cols()) {
    throw DataError("driver: source and target disagree on classes or width");
  }
  target_train_ = data_.target.indices_of(Split::target_train);
  target_test_ = data_.target.indices_of(Split::target_test);
  if (target_test_.empty()) throw DataError("driver: target has no test split");
  const auto needed = static_cast<std::size_t>(cfg_.rounds) * cfg_.budget;
  if (needed > target_train_.size()) {
    throw std::invalid_argument("driver: rounds x budget = " + std::to_string(needed) +
                                " exceeds the target-train pool of " +
                                std::to_string(target_train_.size()));
  }
  is_test_.assign(data_.target.size(), false);
  for (const auto i : target_test_) is_test_[i] = true;
  pool_ = PoolState(target_train_, needed);

  ArchitectureSpec arch;
  arch.input_dim = data_.source.features.cols();
  arch.hidden = cfg_.hidden;
  arch.activation = cfg_.activation;
  arch.num_classes = data_.source.num_classes;
  params_ = init_params(arch, derive_seed(seed_, kInit));
}

void SeedRun::guard(std::span<const Eigen::Index> target_rows) const {
  for (const auto i : target_rows) {
    if (i < 0 || i >= data_.target.size() || is_test_[i]) {
      throw std::logic_error("leakage guard: target row " + std::to_string(i) +
                             " is not target-train");
    }
  }
}

void SeedRun::train_source() {
  const PhaseSchedule& phase = cfg_.source_phase;
  const auto source_rows = data_.source.indices_of(Split::source_train);
  Rng rng(derive_seed(seed_, kSource));
  OptimizerState opt = make_optimizer(phase);
  // Plain source cross-entropy; lambda_s only balances source against target later.
  const LossWeights lw{1.0, 0.0, 0.0};
  const LabeledBatch none;
  const int steps = steps_for(phase, source_rows.size(), cfg_.batch_size);
  for (int s = 0; s < steps; ++s) {
    const LabeledBatch src = draw_batch(data_.source, source_rows, {}, cfg_.batch_size, rng);
    const auto g = supervised_loss_and_grads(params_, src, none, lw);
    optimizer_step(params_, g.grads, opt);
  }
}

// One adaptation phase. In mme mode every step combines a source batch, a
// labeled-target batch (when any labels exist) and an entropy batch drawn from
// all target-train rows. Finetune mode trains on labeled target only.
void SeedRun::train_adaptation(const PhaseSchedule& phase, int round_tag) {
  const auto source_rows = data_.source.indices_of(Split::source_train);
  const auto& labeled = pool_.labeled();
  const auto& labeled_y = pool_.labeled_labels();
  guard(labeled);
  guard(target_train_);

  Rng rng(derive_seed(seed_, round_tag == 0 ? kWarmup : kRound, round_tag));
  OptimizerState opt = make_optimizer(phase);
  // An epoch is one pass over labeled target data; before any labels exist,
  // one pass over the target-train pool.
  const std::size_t epoch_items = labeled.empty() ? target_train_.size() : labeled.size();
  const int steps = steps_for(phase, epoch_items, cfg_.batch_size);
  const LabeledBatch none;

  for (int s = 0; s < steps; ++s) {
    const LabeledBatch tgt = draw_batch(data_.target, labeled, labeled_y, cfg_.batch_size, rng);
    if (cfg_.mode == TrainingMode::finetune) {
      if (tgt.empty()) return;
      const auto g = supervised_loss_and_grads(params_, none, tgt, cfg_.loss);
      optimizer_step(params_, g.grads, opt);
      continue;
    }
    const LabeledBatch src = draw_batch(data_.source, source_rows, {}, cfg_.batch_size, rng);
    const LabeledBatch unl = draw_batch(data_.target, target_train_, {}, cfg_.batch_size, rng);
    const auto g = mme_loss_and_grads(params_, src, tgt, unl.inputs, cfg_.loss);
    optimizer_step(params_, g.grads, opt);
  }
}

RoundRecord SeedRun::record(int round, double started_ms) const {
  RoundRecord r;
  r.round = round;
  r.cumulative_labels = pool_.labeled_count();
  const Matrix test_x = data_.target.rows(target_test_);
  const auto test_y = data_.target.labels_of(target_test_);
  r.accuracy = evaluate_accuracy(params_, test_x, test_y);
  r.mean_entropy = mean_entropy(params_, data_.target.rows(target_train_));
  r.wall_ms = now_ms() - started_ms;
  return r;
}

RoundRecord SeedRun::prepare() {
  const double t0 = now_ms();
  train_source();
  if (cfg_.mode == TrainingMode::mme) train_adaptation(cfg_.warmup_phase, 0);
  round_ = 0;
  return record(0, t0);
}

RoundRecord SeedRun::next_round() {
  if (round_ >= cfg_.rounds) throw std::logic_error("driver: all rounds already run");
  const double t0 = now_ms();
  const int rho = round_ + 1;

  AcquisitionRequest req;
  req.budget = cfg_.budget;
  req.unlabeled_indices = pool_.unlabeled();
  guard(req.unlabeled_indices);
  const ForwardResult fr = forward(params_, data_.target.rows(req.unlabeled_indices));
  req.embeddings = fr.embeddings;
  req.logits = fr.logits;
  req.probs = softmax_rows(fr.logits, cfg_.strategy.temperature);
  req.rng_seed = derive_seed(seed_, kSelect, static_cast<std::uint64_t>(rho));

  Matrix labeled_emb(0, params_.embedding_dim());
  if (cfg_.strategy.name == Strategy::coreset && pool_.labeled_count() > 0) {
    labeled_emb = forward(params_, data_.target.rows(pool_.labeled())).embeddings;
  }
  const Selection sel = select(req, cfg_.strategy, labeled_emb);
  guard(sel.indices);
  oracle_label(pool_, data_.target, sel.indices);
  pool_.check_invariants();
  if (pool_.labeled_count() != static_cast<std::size_t>(rho) * cfg_.budget) {
    throw std::logic_error("driver: budget accounting broken");
  }

  train_adaptation(cfg_.round_phase, rho);
  round_ = rho;
  RoundRecord r = record(rho, t0);
  r.selected = sel.indices;
  r.clue_objective = sel.clue_objective;
  r.clue_weighted_sse = sel.clue_weighted_sse;
  return r;
}

void SeedRun::restore(NetworkParams params, PoolState pool, int round) {
  params.validate();
  pool.check_invariants();
  params_ = std::move(params);
  pool_ = std::move(pool);
  round_ = round;
}

std::vector<RunTrace> run_experiment(const ExperimentConfig& cfg, const DomainPair& data,
                                     int threads) {
  cfg.validate();
  std::vector<RunTrace> traces(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < traces.size(); k = next++) {
      RunTrace& t = traces[k];
      t.seed = cfg.seeds[k];
      try {
        SeedRun run(cfg, data, t.seed);
        t.rounds.push_back(run.prepare());
        for (int r = 0; r < cfg.rounds; ++r) t.rounds.push_back(run.next_round());
      } catch (const std::exception& e) {
        t.error = e.what();
      }
    }
  };
  const int n = std::clamp<int>(threads, 1, static_cast<int>(traces.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  return traces;
}

std::vector<RoundSummary> aggregate(const std::vector<RunTrace>& traces) {
  std::vector<RoundSummary> out;
  std::size_t max_rounds = 0;
  for (const auto& t : traces) {
    if (!t.error) max_rounds = std::max(max_rounds, t.rounds.size());
  }
  for (std::size_t r = 0; r < max_rounds; ++r) {
    RoundSummary s;
    s.round = static_cast<int>(r);
    // Deviations from the first value keep identical traces at exactly zero spread.
    std::optional<double> first;
    double sum = 0.0;
    for (const auto& t : traces) {
      if (t.error || r >= t.rounds.size()) continue;
      if (!first) first = t.rounds[r].accuracy;
      sum += t.rounds[r].accuracy - *first;
      s.labels = t.rounds[r].cumulative_labels;
      ++s.count;
    }
    if (s.count == 0) continue;
    s.acc_mean = *first + sum / static_cast<double>(s.count);
    if (s.count > 1) {
      double ss = 0.0;
      for (const auto& t : traces) {
        if (t.error || r >= t.rounds.size()) continue;
        const double d = t.rounds[r].accuracy - s.acc_mean;
        ss += d * d;
      }
      s.acc_std = std::sqrt(ss / static_cast<double>(s.count - 1));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace clue

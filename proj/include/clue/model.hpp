#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "clue/numerics.hpp"

namespace clue {

enum class Activation { relu, tanh, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::tanh;
};

// Feature extractor (a stack of dense layers) followed by a linear classifier.
// The same type carries gradients.
struct NetworkParams {
  std::vector<DenseLayer> extractor;
  Matrix classifier_weight;  // C x M
  Vector classifier_bias;    // C

  Eigen::Index input_dim() const;
  Eigen::Index embedding_dim() const;
  Eigen::Index num_classes() const { return classifier_weight.rows(); }

  void validate() const;
  NetworkParams zeros_like() const;
};

using ParamBlock = Eigen::Map<Eigen::VectorXd>;
using ConstParamBlock = Eigen::Map<const Eigen::VectorXd>;

/// Flat views over every parameter tensor, extractor layers first (weight then
/// bias), classifier weight, classifier bias last.
std::vector<ParamBlock> param_blocks(NetworkParams& p);
std::vector<ConstParamBlock> param_blocks(const NetworkParams& p);

/// Number of leading blocks that belong to the feature extractor.
std::size_t extractor_block_count(const NetworkParams& p);

struct ArchitectureSpec {
  Eigen::Index input_dim = 2;
  std::vector<Eigen::Index> hidden{64, 64};
  Activation activation = Activation::tanh;
  Eigen::Index num_classes = 2;
};

/// Scaled-normal weights (std 1/sqrt(fan_in)), zero biases.
NetworkParams init_params(const ArchitectureSpec& arch, std::uint64_t seed);

struct ForwardResult {
  EmbeddingMatrix embeddings;
  Matrix logits;
};

ForwardResult forward(const NetworkParams& params, const Matrix& inputs);

struct LabeledBatch {
  Matrix inputs;
  std::vector<int> labels;

  bool empty() const { return inputs.rows() == 0; }
};

struct LossWeights {
  double lambda_s = 0.1;
  double lambda_t = 1.0;
  double lambda_h = 0.1;

  void validate() const;
};

struct LossAndGrads {
  double loss = 0.0;
  NetworkParams grads;
};

/// lambda_s * mean CE(source) + lambda_t * mean CE(target labeled). An empty
/// batch contributes nothing.
LossAndGrads supervised_loss_and_grads(const NetworkParams& params, const LabeledBatch& source,
                                       const LabeledBatch& target_labeled, const LossWeights& lw);

struct MmeLoss {
  double tce = 0.0;
  double target_entropy = 0.0;  // mean over the unlabeled batch
};

struct MmeLossAndGrads {
  MmeLoss loss;
  NetworkParams grads;
};

/// Supervised gradients plus the mean target entropy gradient, added with
/// coefficient -lambda_h on the classifier (which ascends entropy) and
/// +lambda_h on the extractor (which descends it).
MmeLossAndGrads mme_loss_and_grads(const NetworkParams& params, const LabeledBatch& source,
                                   const LabeledBatch& target_labeled,
                                   const Matrix& target_unlabeled, const LossWeights& lw);

/// Mean cross-entropy and mean predictive entropy at temperature 1; used by
/// gradient checks and reporting.
double mean_cross_entropy(const NetworkParams& params, const LabeledBatch& batch);
double mean_entropy(const NetworkParams& params, const Matrix& inputs);

enum class OptimizerMethod { sgd, adam };

std::string_view to_string(OptimizerMethod m);
OptimizerMethod optimizer_from_string(std::string_view name);

struct OptimizerState {
  OptimizerMethod method = OptimizerMethod::adam;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Eigen::VectorXd> first_moment;
  std::vector<Eigen::VectorXd> second_moment;
  std::int64_t step = 0;
};

void optimizer_update(std::span<ParamBlock> params, std::span<const ConstParamBlock> grads,
                      OptimizerState& opt);
void optimizer_step(NetworkParams& params, const NetworkParams& grads, OptimizerState& opt);

Eigen::Index predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& logits);
std::vector<int> predict(const NetworkParams& params, const Matrix& inputs);
double evaluate_accuracy(const NetworkParams& params, const Matrix& inputs,
                         std::span<const int> labels);

// Checkpoint layout, all little-endian: "CLUEADA\0", u32 version, u32 layer
// count, then per extractor layer u32 rows, u32 cols, u32 activation, weight
// (row-major f64), bias (f64); then u32 C, u32 M, classifier weight, classifier bias.
void write_checkpoint(std::ostream& out, const NetworkParams& params);
NetworkParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace clue

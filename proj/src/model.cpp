#include "clue/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "clue/rng.hpp"

namespace clue {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) +
                              "' (valid: relu, tanh, identity)");
}

std::string_view to_string(OptimizerMethod m) {
  return m == OptimizerMethod::sgd ? "sgd" : "adam";
}

OptimizerMethod optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerMethod::sgd;
  if (name == "adam") return OptimizerMethod::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (valid: sgd, adam)");
}

Eigen::Index NetworkParams::input_dim() const {
  return extractor.empty() ? classifier_weight.cols() : extractor.front().weight.cols();
}

Eigen::Index NetworkParams::embedding_dim() const { return classifier_weight.cols(); }

void NetworkParams::validate() const {
  Eigen::Index width = input_dim();
  for (std::size_t l = 0; l < extractor.size(); ++l) {
    const auto& layer = extractor[l];
    if (layer.weight.cols() != width || layer.bias.size() != layer.weight.rows()) {
      throw DimensionError("network: extractor layer " + std::to_string(l) + " does not chain");
    }
    require_finite(layer.weight, "network weight");
    require_finite(layer.bias, "network bias");
    width = layer.weight.rows();
  }
  if (classifier_weight.cols() != width || classifier_bias.size() != classifier_weight.rows()) {
    throw DimensionError("network: classifier width " + std::to_string(classifier_weight.cols()) +
                         " != embedding width " + std::to_string(width));
  }
  if (classifier_weight.rows() < 2) throw std::invalid_argument("network: need >= 2 classes");
  require_finite(classifier_weight, "classifier weight");
  require_finite(classifier_bias, "classifier bias");
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z;
  z.extractor.reserve(extractor.size());
  for (const auto& layer : extractor) {
    z.extractor.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                           Vector::Zero(layer.bias.size()), layer.activation});
  }
  z.classifier_weight = Matrix::Zero(classifier_weight.rows(), classifier_weight.cols());
  z.classifier_bias = Vector::Zero(classifier_bias.size());
  return z;
}

std::vector<ParamBlock> param_blocks(NetworkParams& p) {
  std::vector<ParamBlock> out;
  for (auto& layer : p.extractor) {
    out.emplace_back(layer.weight.data(), layer.weight.size());
    out.emplace_back(layer.bias.data(), layer.bias.size());
  }
  out.emplace_back(p.classifier_weight.data(), p.classifier_weight.size());
  out.emplace_back(p.classifier_bias.data(), p.classifier_bias.size());
  return out;
}

std::vector<ConstParamBlock> param_blocks(const NetworkParams& p) {
  std::vector<ConstParamBlock> out;
  for (const auto& layer : p.extractor) {
    out.emplace_back(layer.weight.data(), layer.weight.size());
    out.emplace_back(layer.bias.data(), layer.bias.size());
  }
  out.emplace_back(p.classifier_weight.data(), p.classifier_weight.size());
  out.emplace_back(p.classifier_bias.data(), p.classifier_bias.size());
  return out;
}

std::size_t extractor_block_count(const NetworkParams& p) { return 2 * p.extractor.size(); }

NetworkParams init_params(const ArchitectureSpec& arch, std::uint64_t seed) {
  if (arch.input_dim < 1 || arch.num_classes < 2) {
    throw std::invalid_argument("architecture: need input_dim >= 1 and num_classes >= 2");
  }
  Rng rng(seed);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix w(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.normal();
    return w;
  };
  NetworkParams p;
  Eigen::Index width = arch.input_dim;
  for (const auto h : arch.hidden) {
    if (h < 1) throw std::invalid_argument("architecture: hidden width must be >= 1");
    p.extractor.push_back({draw(h, width), Vector::Zero(h), arch.activation});
    width = h;
  }
  p.classifier_weight = draw(arch.num_classes, width);
  p.classifier_bias = Vector::Zero(arch.num_classes);
  return p;
}

namespace {

void activate(Matrix& m, Activation a) {
  switch (a) {
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
    case Activation::identity: break;
  }
}

// Multiplies upstream gradient by the activation derivative, expressed through
// the layer output.
void activation_backward(Matrix& grad, const Matrix& output, Activation a) {
  switch (a) {
    case Activation::relu:
      grad = (output.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::tanh:
      grad = (grad.array() * (1.0 - output.array().square())).matrix();
      break;
    case Activation::identity: break;
  }
}

struct Cache {
  std::vector<Matrix> layer_inputs;  // layer_inputs[l] feeds extractor layer l; back() is the embedding
  Matrix logits;
};

Cache forward_cached(const NetworkParams& p, const Matrix& inputs) {
  if (inputs.cols() != p.input_dim()) {
    throw DimensionError("forward: input width " + std::to_string(inputs.cols()) +
                         " != network input " + std::to_string(p.input_dim()));
  }
  Cache c;
  c.layer_inputs.reserve(p.extractor.size() + 1);
  c.layer_inputs.push_back(inputs);
  for (const auto& layer : p.extractor) {
    Matrix z = c.layer_inputs.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    activate(z, layer.activation);
    c.layer_inputs.push_back(std::move(z));
  }
  c.logits = c.layer_inputs.back() * p.classifier_weight.transpose();
  c.logits.rowwise() += p.classifier_bias.transpose();
  return c;
}

// Accumulates dLoss/dparams given dLoss/dlogits. Classifier gradients are scaled
// by classifier_scale, and the gradient crossing into the extractor by
// extractor_scale; opposite signs realize gradient reversal.
void backward(const NetworkParams& p, const Cache& c, const Matrix& dlogits,
              double classifier_scale, double extractor_scale, NetworkParams& grads) {
  const Matrix& emb = c.layer_inputs.back();
  grads.classifier_weight.noalias() += classifier_scale * (dlogits.transpose() * emb);
  grads.classifier_bias += classifier_scale * dlogits.colwise().sum().transpose();
  if (p.extractor.empty() || extractor_scale == 0.0) return;

  Matrix upstream = extractor_scale * (dlogits * p.classifier_weight);
  for (std::size_t l = p.extractor.size(); l-- > 0;) {
    const auto& layer = p.extractor[l];
    activation_backward(upstream, c.layer_inputs[l + 1], layer.activation);
    grads.extractor[l].weight.noalias() += upstream.transpose() * c.layer_inputs[l];
    grads.extractor[l].bias += upstream.colwise().sum().transpose();
    if (l > 0) upstream = upstream * layer.weight;
  }
}

void check_labels(const LabeledBatch& b, Eigen::Index num_classes) {
  if (static_cast<Eigen::Index>(b.labels.size()) != b.inputs.rows()) {
    throw DimensionError("batch: labels/inputs length mismatch");
  }
  for (const int y : b.labels) {
    if (y < 0 || y >= num_classes) {
      throw std::out_of_range("batch: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    }
  }
}

// Mean CE over the batch, scaled by weight, with gradients accumulated.
double add_ce_term(const NetworkParams& p, const LabeledBatch& b, double weight,
                   NetworkParams& grads) {
  if (b.empty()) return 0.0;
  check_labels(b, p.num_classes());
  const Cache c = forward_cached(p, b.inputs);
  const Matrix probs = softmax_rows(c.logits);
  const double n = static_cast<double>(b.inputs.rows());
  double loss = 0.0;
  Matrix dlogits = probs;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int y = b.labels[i];
    const double row_max = c.logits.row(i).maxCoeff();
    const double lse = row_max + std::log((c.logits.row(i).array() - row_max).exp().sum());
    loss += lse - c.logits(i, y);
    dlogits(i, y) -= 1.0;
  }
  dlogits *= weight / n;
  if (weight != 0.0) backward(p, c, dlogits, 1.0, 1.0, grads);
  return weight * loss / n;
}

// dH/dlogit_j = -p_j (log p_j + H), zero where p_j underflows.
Matrix entropy_logit_grad(const Matrix& probs, Vector& entropy) {
  entropy.resize(probs.rows());
  Matrix g(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double h = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      if (probs(i, c) > 0.0) h -= probs(i, c) * std::log(probs(i, c));
    }
    entropy(i) = h;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double pc = probs(i, c);
      g(i, c) = pc > 0.0 ? -pc * (std::log(pc) + h) : 0.0;
    }
  }
  return g;
}

}  // namespace

ForwardResult forward(const NetworkParams& params, const Matrix& inputs) {
  Cache c = forward_cached(params, inputs);
  return {std::move(c.layer_inputs.back()), std::move(c.logits)};
}

void LossWeights::validate() const {
  if (lambda_s < 0 || lambda_t < 0 || lambda_h < 0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

LossAndGrads supervised_loss_and_grads(const NetworkParams& params, const LabeledBatch& source,
                                       const LabeledBatch& target_labeled, const LossWeights& lw) {
  lw.validate();
  LossAndGrads out{0.0, params.zeros_like()};
  out.loss += add_ce_term(params, source, lw.lambda_s, out.grads);
  out.loss += add_ce_term(params, target_labeled, lw.lambda_t, out.grads);
  return out;
}

MmeLossAndGrads mme_loss_and_grads(const NetworkParams& params, const LabeledBatch& source,
                                   const LabeledBatch& target_labeled,
                                   const Matrix& target_unlabeled, const LossWeights& lw) {
  if (target_unlabeled.rows() == 0) {
    throw std::invalid_argument("mme: empty unlabeled target batch");
  }
  LossAndGrads sup = supervised_loss_and_grads(params, source, target_labeled, lw);
  MmeLossAndGrads out{{sup.loss, 0.0}, std::move(sup.grads)};

  const Cache c = forward_cached(params, target_unlabeled);
  Vector h;
  Matrix dlogits = entropy_logit_grad(softmax_rows(c.logits), h);
  const double n = static_cast<double>(target_unlabeled.rows());
  out.loss.target_entropy = h.sum() / n;
  if (lw.lambda_h != 0.0) {
    dlogits /= n;
    backward(params, c, dlogits, -lw.lambda_h, lw.lambda_h, out.grads);
  }
  return out;
}

double mean_cross_entropy(const NetworkParams& params, const LabeledBatch& batch) {
  if (batch.empty()) return 0.0;
  check_labels(batch, params.num_classes());
  const Matrix logits = forward(params, batch.inputs).logits;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double row_max = logits.row(i).maxCoeff();
    loss += row_max + std::log((logits.row(i).array() - row_max).exp().sum()) -
            logits(i, batch.labels[i]);
  }
  return loss / static_cast<double>(logits.rows());
}

double mean_entropy(const NetworkParams& params, const Matrix& inputs) {
  if (inputs.rows() == 0) return 0.0;
  const Matrix probs = softmax_rows(forward(params, inputs).logits);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      if (probs(i, c) > 0.0) acc -= probs(i, c) * std::log(probs(i, c));
    }
  }
  return acc / static_cast<double>(inputs.rows());
}

void optimizer_update(std::span<ParamBlock> params, std::span<const ConstParamBlock> grads,
                      OptimizerState& opt) {
  if (params.size() != grads.size()) throw DimensionError("optimizer: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) throw DimensionError("optimizer: block shape mismatch");
  }
  if (!(opt.learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be > 0");

  ++opt.step;
  if (opt.method == OptimizerMethod::adam && opt.first_moment.size() != params.size()) {
    opt.first_moment.clear();
    opt.second_moment.clear();
    for (const auto& p : params) {
      opt.first_moment.push_back(Eigen::VectorXd::Zero(p.size()));
      opt.second_moment.push_back(Eigen::VectorXd::Zero(p.size()));
    }
  }
  const double lr = opt.learning_rate;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& p = params[b];
    const auto& g = grads[b];
    if (opt.weight_decay != 0.0) p *= (1.0 - lr * opt.weight_decay);
    if (opt.method == OptimizerMethod::sgd) {
      p -= lr * g;
      continue;
    }
    auto& m = opt.first_moment[b];
    auto& v = opt.second_moment[b];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opt.eps);
  }
}

void optimizer_step(NetworkParams& params, const NetworkParams& grads, OptimizerState& opt) {
  auto p = param_blocks(params);
  const auto g = param_blocks(grads);
  optimizer_update(p, g, opt);
}

Eigen::Index predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  return argmax(logits);
}

std::vector<int> predict(const NetworkParams& params, const Matrix& inputs) {
  const Matrix logits = forward(params, inputs).logits;
  std::vector<int> out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out[i] = static_cast<int>(argmax(logits.row(i)));
  }
  return out;
}

double evaluate_accuracy(const NetworkParams& params, const Matrix& inputs,
                         std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
    throw DimensionError("evaluate_accuracy: labels/inputs length mismatch");
  }
  if (labels.empty()) return 0.0;
  const auto pred = predict(params, inputs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// ---- checkpoint -----------------------------------------------------------

namespace {

constexpr std::array<char, 8> kMagic{'C', 'L', 'U', 'E', 'A', 'D', 'A', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64s(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(data[i]));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error("checkpoint: truncated header");
  }
  return to_little(v);
}

void get_f64s(std::istream& in, double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw std::runtime_error("checkpoint: truncated payload");
    }
    data[i] = std::bit_cast<double>(to_little(bits));
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const NetworkParams& params) {
  params.validate();
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.extractor.size()));
  for (const auto& layer : params.extractor) {
    put_u32(out, static_cast<std::uint32_t>(layer.weight.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.weight.cols()));
    put_u32(out, static_cast<std::uint32_t>(layer.activation));
    put_f64s(out, layer.weight.data(), layer.weight.size());
    put_f64s(out, layer.bias.data(), layer.bias.size());
  }
  put_u32(out, static_cast<std::uint32_t>(params.classifier_weight.rows()));
  put_u32(out, static_cast<std::uint32_t>(params.classifier_weight.cols()));
  put_f64s(out, params.classifier_weight.data(), params.classifier_weight.size());
  put_f64s(out, params.classifier_bias.data(), params.classifier_bias.size());
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

NetworkParams read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  if (const auto v = get_u32(in); v != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(v));
  }
  const std::uint32_t layers = get_u32(in);
  NetworkParams p;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const auto rows = get_u32(in), cols = get_u32(in), act = get_u32(in);
    if (act > static_cast<std::uint32_t>(Activation::identity)) {
      throw std::runtime_error("checkpoint: bad activation tag");
    }
    DenseLayer layer{Matrix(rows, cols), Vector(rows), static_cast<Activation>(act)};
    get_f64s(in, layer.weight.data(), layer.weight.size());
    get_f64s(in, layer.bias.data(), layer.bias.size());
    p.extractor.push_back(std::move(layer));
  }
  const auto c = get_u32(in), m = get_u32(in);
  p.classifier_weight.resize(c, m);
  p.classifier_bias.resize(c);
  get_f64s(in, p.classifier_weight.data(), p.classifier_weight.size());
  get_f64s(in, p.classifier_bias.data(), p.classifier_bias.size());
  p.validate();
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());
  write_checkpoint(out, params);
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace clue

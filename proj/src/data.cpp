#include "clue/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include "clue/rng.hpp"

namespace clue {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::source_train: return "source_train";
    case Split::target_train: return "target_train";
    case Split::target_test: return "target_test";
  }
  return "?";
}

std::string_view to_string(Generator g) {
  return g == Generator::gauss_mixture ? "gauss_mixture" : "two_moons";
}

Generator generator_from_string(std::string_view name) {
  if (name == "gauss_mixture") return Generator::gauss_mixture;
  if (name == "two_moons") return Generator::two_moons;
  throw std::invalid_argument("unknown generator '" + std::string(name) +
                              "' (valid: gauss_mixture, two_moons)");
}

std::vector<Eigen::Index> Dataset::indices_of(Split s) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

Matrix Dataset::rows(std::span<const Eigen::Index> idx) const {
  Matrix out(static_cast<Eigen::Index>(idx.size()), features.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(r) = features.row(idx[r]);
  return out;
}

std::vector<int> Dataset::labels_of(std::span<const Eigen::Index> idx) const {
  std::vector<int> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(labels[i]);
  return out;
}

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows() ||
      static_cast<Eigen::Index>(splits.size()) != features.rows()) {
    throw DataError("dataset: labels/splits/features length mismatch");
  }
  if (num_classes < 2) throw DataError("dataset: need at least 2 classes");
  for (const int y : labels) {
    if (y < 0 || y >= num_classes) throw DataError("dataset: label out of range");
  }
  if (!features.allFinite()) throw DataError("dataset: non-finite feature");
}

void ShiftSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("shift: num_classes must be >= 2");
  if (generator == Generator::two_moons && num_classes != 2) {
    throw std::invalid_argument("shift: two_moons requires num_classes == 2");
  }
  if (modes_per_class < 1) throw std::invalid_argument("shift: modes_per_class must be >= 1");
  if (dim < 2) throw std::invalid_argument("shift: dim must be >= 2");
  if (source_count < 1 || target_count < 1) throw std::invalid_argument("shift: counts must be > 0");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("shift: test_fraction must be in [0, 1)");
  }
  if (!(noise >= 0.0)) throw std::invalid_argument("shift: noise must be >= 0");
  if (!translation.empty() && static_cast<Eigen::Index>(translation.size()) != dim) {
    throw std::invalid_argument("shift: translation length must equal dim");
  }
}

namespace {

// Noise-free class-conditional location: a fixed mean for gauss_mixture, a
// random point on the class's arc for two_moons.
Vector class_location(const ShiftSpec& spec, int label, Rng& rng) {
  Vector x = Vector::Zero(spec.dim);
  if (spec.generator == Generator::gauss_mixture) {
    const int mode = spec.modes_per_class > 1 ? static_cast<int>(rng.below(spec.modes_per_class)) : 0;
    const double a = 2.0 * std::numbers::pi * (label + spec.num_classes * mode) /
                     (spec.num_classes * spec.modes_per_class);
    x(0) = spec.class_radius * std::cos(a);
    x(1) = spec.class_radius * std::sin(a);
  } else {
    const double t = std::numbers::pi * rng.uniform();
    // Centred so the pair of moons is symmetric about the origin.
    if (label == 0) {
      x(0) = std::cos(t) - 0.5;
      x(1) = std::sin(t) - 0.25;
    } else {
      x(0) = 0.5 - std::cos(t);
      x(1) = 0.25 - std::sin(t);
    }
    x *= spec.class_radius;
  }
  return x;
}

Dataset sample_domain(const ShiftSpec& spec, Eigen::Index count, const Matrix& class_offsets,
                      bool shifted, Split split, Rng& rng) {
  Dataset d;
  d.num_classes = spec.num_classes;
  d.features.resize(count, spec.dim);
  d.labels.resize(count);
  d.splits.assign(count, split);

  std::vector<int> labels(count);
  for (Eigen::Index i = 0; i < count; ++i) labels[i] = static_cast<int>(i % spec.num_classes);
  rng.shuffle(labels);

  const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
  for (Eigen::Index i = 0; i < count; ++i) {
    const int y = labels[i];
    Vector x = class_location(spec, y, rng);
    for (Eigen::Index j = 0; j < spec.dim; ++j) x(j) += spec.noise * rng.normal();
    if (shifted) {
      x += class_offsets.row(y).transpose();
      const double x0 = x(0), x1 = x(1);
      x(0) = c * x0 - s * x1;
      x(1) = s * x0 + c * x1;
      for (std::size_t j = 0; j < spec.translation.size(); ++j) x(j) += spec.translation[j];
    }
    d.features.row(i) = x.transpose();
    d.labels[i] = y;
  }
  return d;
}

}  // namespace

void assign_target_split(Dataset& target, double test_fraction, std::uint64_t seed) {
  Rng rng(seed);
  const auto perm = rng.permutation(static_cast<std::size_t>(target.size()));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * target.size()));
  target.splits.assign(target.size(), Split::target_train);
  for (std::size_t r = 0; r < n_test; ++r) target.splits[perm[r]] = Split::target_test;
}

DomainPair generate_shift(const ShiftSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Matrix offsets = Matrix::Zero(spec.num_classes, spec.dim);
  for (int k = 0; k < spec.num_classes; ++k) {
    Vector dir(spec.dim);
    for (Eigen::Index j = 0; j < spec.dim; ++j) dir(j) = rng.normal();
    if (dir.norm() > 0.0) offsets.row(k) = spec.mean_perturbation * dir.normalized().transpose();
  }
  DomainPair out;
  out.source = sample_domain(spec, spec.source_count, offsets, false, Split::source_train, rng);
  out.target = sample_domain(spec, spec.target_count, offsets, true, Split::target_train, rng);
  assign_target_split(out.target, spec.test_fraction, rng.next_u64());
  return out;
}

// ---- IDX --------------------------------------------------------------------

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(std::string("idx: truncated header in ") + what);
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset read_idx(std::istream& images, std::istream& labels, Split split) {
  if (const auto m = read_be32(images, "images"); m != kIdxImagesMagic) {
    throw DataError("idx: bad image magic " + std::to_string(m));
  }
  const std::uint32_t n = read_be32(images, "images");
  const std::uint32_t rows = read_be32(images, "images");
  const std::uint32_t cols = read_be32(images, "images");
  if (const auto m = read_be32(labels, "labels"); m != kIdxLabelsMagic) {
    throw DataError("idx: bad label magic " + std::to_string(m));
  }
  const std::uint32_t n_labels = read_be32(labels, "labels");
  if (n != n_labels) {
    throw DataError("idx: " + std::to_string(n) + " images but " + std::to_string(n_labels) +
                    " labels");
  }
  const std::size_t width = std::size_t{rows} * cols;
  std::vector<unsigned char> pixels(std::size_t{n} * width);
  if (!images.read(reinterpret_cast<char*>(pixels.data()),
                   static_cast<std::streamsize>(pixels.size()))) {
    throw DataError("idx: truncated image payload");
  }
  std::vector<unsigned char> raw_labels(n);
  if (!labels.read(reinterpret_cast<char*>(raw_labels.data()),
                   static_cast<std::streamsize>(raw_labels.size()))) {
    throw DataError("idx: truncated label payload");
  }

  Dataset d;
  d.features.resize(n, static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < pixels.size(); ++i) d.features.data()[i] = pixels[i] / 255.0;
  d.labels.assign(raw_labels.begin(), raw_labels.end());
  d.splits.assign(n, split);
  int max_label = 1;
  for (const int y : d.labels) max_label = std::max(max_label, y);
  d.num_classes = max_label + 1;
  return d;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw DataError("idx: cannot open " + images_path.string());
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw DataError("idx: cannot open " + labels_path.string());
  return read_idx(images, labels, split);
}

void write_idx(std::ostream& images, std::ostream& labels, const Dataset& data, std::uint32_t rows,
               std::uint32_t cols) {
  if (data.features.cols() != static_cast<Eigen::Index>(rows) * cols) {
    throw DataError("idx: feature width does not match rows x cols");
  }
  const auto n = static_cast<std::uint32_t>(data.size());
  write_be32(images, kIdxImagesMagic);
  write_be32(images, n);
  write_be32(images, rows);
  write_be32(images, cols);
  for (Eigen::Index i = 0; i < data.features.size(); ++i) {
    const double v = std::clamp(data.features.data()[i], 0.0, 1.0);
    images.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  write_be32(labels, kIdxLabelsMagic);
  write_be32(labels, n);
  for (const int y : data.labels) labels.put(static_cast<char>(static_cast<unsigned char>(y)));
}

void write_dataset_csv(std::ostream& out, std::span<const Dataset* const> parts) {
  if (parts.empty()) return;
  const Eigen::Index dim = parts.front()->features.cols();
  for (Eigen::Index j = 0; j < dim; ++j) out << "feature_" << j << ',';
  out << "label,split\n";
  char buf[32];
  for (const Dataset* d : parts) {
    if (d->features.cols() != dim) throw DataError("csv: parts differ in width");
    for (Eigen::Index i = 0; i < d->size(); ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        std::snprintf(buf, sizeof buf, "%.9g", d->features(i, j));
        out << buf << ',';
      }
      out << d->labels[i] << ',' << to_string(d->splits[i]) << '\n';
    }
  }
}

// ---- pool -------------------------------------------------------------------

PoolState::PoolState(std::vector<Eigen::Index> target_train, std::optional<std::size_t> label_cap)
    : all_(target_train.begin(), target_train.end()),
      unlabeled_(all_),
      cap_(label_cap) {
  if (all_.size() != target_train.size()) throw DataError("pool: duplicate target index");
}

bool PoolState::is_labeled(Eigen::Index i) const { return all_.contains(i) && !unlabeled_.contains(i); }

bool PoolState::in_pool(Eigen::Index i) const { return all_.contains(i); }

void PoolState::check_invariants() const {
  if (labeled_.size() + unlabeled_.size() != all_.size() ||
      labeled_.size() != labeled_labels_.size()) {
    throw std::logic_error("pool: labeled + unlabeled does not cover the target-train set");
  }
  for (const auto i : labeled_) {
    if (unlabeled_.contains(i) || !all_.contains(i)) {
      throw std::logic_error("pool: labeled index " + std::to_string(i) + " misplaced");
    }
  }
  if (cap_ && labeled_.size() > *cap_) throw std::logic_error("pool: label cap exceeded");
}

std::vector<int> oracle_label(PoolState& pool, const Dataset& target,
                              std::span<const Eigen::Index> indices) {
  std::set<Eigen::Index> seen;
  for (const auto i : indices) {
    if (i < 0 || i >= target.size() || target.splits[i] != Split::target_train ||
        !pool.all_.contains(i)) {
      throw DataError("oracle: index " + std::to_string(i) + " is not in the target-train pool");
    }
    if (!pool.unlabeled_.contains(i) || !seen.insert(i).second) {
      throw DataError("oracle: index " + std::to_string(i) + " is already labeled");
    }
  }
  if (pool.cap_ && pool.labeled_.size() + indices.size() > *pool.cap_) {
    throw DataError("oracle: request would exceed the label budget");
  }
  std::vector<int> revealed;
  revealed.reserve(indices.size());
  for (const auto i : indices) {
    pool.unlabeled_.erase(i);
    pool.labeled_.push_back(i);
    pool.labeled_labels_.push_back(target.labels[i]);
    revealed.push_back(target.labels[i]);
  }
  return revealed;
}

}  // namespace clue

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "clue/numerics.hpp"

namespace clue {

enum class Split { source_train, target_train, target_test };

std::string_view to_string(Split s);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Matrix features;  // N x D
  std::vector<int> labels;
  std::vector<Split> splits;
  int num_classes = 0;

  Eigen::Index size() const { return features.rows(); }
  std::vector<Eigen::Index> indices_of(Split s) const;
  Matrix rows(std::span<const Eigen::Index> idx) const;
  std::vector<int> labels_of(std::span<const Eigen::Index> idx) const;
  void validate() const;
};

enum class Generator { gauss_mixture, two_moons };

std::string_view to_string(Generator g);
Generator generator_from_string(std::string_view name);

// Source instances come from fixed class-conditional distributions; target
// instances from the same distributions with each class mean perturbed, then
// rotated (in the first two coordinates) and translated.
struct ShiftSpec {
  Generator generator = Generator::gauss_mixture;
  int num_classes = 4;
  Eigen::Index dim = 2;
  Eigen::Index source_count = 2000;
  Eigen::Index target_count = 2500;  // train + test
  double test_fraction = 0.2;
  double class_radius = 3.0;     // distance of gauss_mixture means from the origin
  // gauss_mixture only: each class is an equal mix of this many components,
  // interleaved with the other classes' components on the circle.
  int modes_per_class = 1;
  double noise = 1.0;            // isotropic std
  double rotation = 0.0;         // radians
  std::vector<double> translation;  // empty or length dim
  double mean_perturbation = 0.0;   // per-class random offset magnitude
  std::uint64_t seed = 0;

  void validate() const;
};

struct DomainPair {
  Dataset source;  // all rows source_train
  Dataset target;  // rows target_train or target_test
};

DomainPair generate_shift(const ShiftSpec& spec);

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0, 1]; every row is tagged `split`.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::target_train);
Dataset read_idx(std::istream& images, std::istream& labels, Split split = Split::target_train);

/// Inverse of read_idx for features already in [0, 1] with `rows * cols` columns.
void write_idx(std::ostream& images, std::ostream& labels, const Dataset& data,
               std::uint32_t rows, std::uint32_t cols);

/// Marks a seeded random test_fraction of the rows target_test, the rest target_train.
void assign_target_split(Dataset& target, double test_fraction, std::uint64_t seed);

/// CSV with header feature_0..feature_{D-1},label,split; values in %.9g.
void write_dataset_csv(std::ostream& out, std::span<const Dataset* const> parts);

// Labeled / unlabeled bookkeeping for the target-train pool. Indices are rows
// of the target dataset.
class PoolState {
 public:
  PoolState() = default;
  PoolState(std::vector<Eigen::Index> target_train, std::optional<std::size_t> label_cap = {});

  const std::vector<Eigen::Index>& labeled() const { return labeled_; }
  const std::vector<int>& labeled_labels() const { return labeled_labels_; }
  std::vector<Eigen::Index> unlabeled() const { return {unlabeled_.begin(), unlabeled_.end()}; }
  std::size_t labeled_count() const { return labeled_.size(); }
  std::size_t unlabeled_count() const { return unlabeled_.size(); }
  bool is_labeled(Eigen::Index i) const;
  bool in_pool(Eigen::Index i) const;

  // Throws if the partition invariant is broken.
  void check_invariants() const;

 private:
  friend std::vector<int> oracle_label(PoolState&, const Dataset&, std::span<const Eigen::Index>);

  std::set<Eigen::Index> all_;
  std::set<Eigen::Index> unlabeled_;
  std::vector<Eigen::Index> labeled_;  // acquisition order
  std::vector<int> labeled_labels_;
  std::optional<std::size_t> cap_;
};

/// Reveals labels for `indices`, moving them from unlabeled to labeled. The
/// request is validated in full before any state changes.
std::vector<int> oracle_label(PoolState& pool, const Dataset& target,
                              std::span<const Eigen::Index> indices);

}  // namespace clue

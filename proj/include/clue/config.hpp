#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "clue/data.hpp"
#include "clue/driver.hpp"

namespace clue {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataSource { synthetic, idx };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  ShiftSpec shift;
  std::filesystem::path source_images, source_labels, target_images, target_labels;
  double test_fraction = 0.2;  // idx only; synthetic uses shift.test_fraction
  std::uint64_t split_seed = 0;
};

struct RunConfig {
  ExperimentConfig experiment;
  DataConfig data;
};

// Flat "section.key" -> value view of an INI-style file:
//
//   [experiment]
//   rounds = 10
//   # comment
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& path);

/// Every recognised key with its default value.
const KeyValues& default_key_values();

/// Builds a config, rejecting unknown keys and malformed values (ConfigError
/// naming the key), then validates cross-field invariants.
RunConfig build_config(const KeyValues& kv);

/// Canonical key/value form: all keys, defaults filled, numbers normalized.
KeyValues normalize(const RunConfig& cfg);
std::string to_text(const KeyValues& kv);

/// FNV-1a over the canonical form; independent of key order in the source file.
std::string config_hash(const RunConfig& cfg);

/// Size of the target-train pool the config will produce, without loading data
/// for synthetic sources.
Eigen::Index expected_pool_size(const RunConfig& cfg);

/// Checks every invariant, including budget against pool size. Throws ConfigError.
void validate_config(const RunConfig& cfg);

/// Generates or loads the datasets. Throws DataError.
DomainPair load_data(const DataConfig& cfg);

}  // namespace clue

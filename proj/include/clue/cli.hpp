#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace clue::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kRuntimeError = 3 };

struct Options {
  std::optional<std::vector<std::uint64_t>> seed_override;
  int threads = 1;
};

/// --threads if given (> 0), else CLUE_ADA_THREADS, else 1.
int resolve_threads(std::optional<int> flag);

int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
            const Options& opts, std::ostream& log);

/// grid_spec is "section.key=v1,v2,...". Writes one results file per value plus
/// sweep.csv (grid_param,value,seed,round,accuracy) into out_dir.
int cmd_sweep(const std::filesystem::path& config_path, const std::string& grid_spec,
              const std::filesystem::path& out_dir, const Options& opts, std::ostream& log);

/// Prints the normalized config to `out`.
int cmd_validate(const std::filesystem::path& config_path, const Options& opts, std::ostream& out,
                 std::ostream& log);

}  // namespace clue::cli

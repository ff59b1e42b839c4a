#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "clue/driver.hpp"

namespace clue {

struct ResultsMeta {
  std::string config_hash;
  std::string strategy;
  std::vector<std::uint64_t> seeds;
};

// Deterministic: '#'-prefixed metadata lines, then
// seed,round,labels_used,accuracy,mean_entropy sorted by (seed, round), reals in %.9g.
void write_results_csv(std::ostream& out, const ResultsMeta& meta,
                       const std::vector<RunTrace>& traces);

// seed,round,wall_ms. Kept apart from the results so those stay byte-stable.
void write_timing_csv(std::ostream& out, const std::vector<RunTrace>& traces);

// {config_hash, strategy, timestamp, rounds: [{round, labels, acc_mean, acc_std}], failed_seeds}
void write_summary_json(std::ostream& out, const ResultsMeta& meta,
                        const std::vector<RoundSummary>& summary,
                        const std::vector<RunTrace>& traces, const std::string& timestamp);

std::string format_real(double v);

}  // namespace clue

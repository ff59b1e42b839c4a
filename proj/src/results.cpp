#include "clue/results.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include <json.hpp>

namespace clue {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

std::vector<const RunTrace*> sorted_by_seed(const std::vector<RunTrace>& traces) {
  std::vector<const RunTrace*> out;
  for (const auto& t : traces) out.push_back(&t);
  std::stable_sort(out.begin(), out.end(),
                   [](const RunTrace* a, const RunTrace* b) { return a->seed < b->seed; });
  return out;
}

}  // namespace

void write_results_csv(std::ostream& out, const ResultsMeta& meta,
                       const std::vector<RunTrace>& traces) {
  out << "# config_hash=" << meta.config_hash << '\n';
  out << "# strategy=" << meta.strategy << '\n';
  out << "# seeds=";
  for (std::size_t i = 0; i < meta.seeds.size(); ++i) out << (i ? "," : "") << meta.seeds[i];
  out << '\n';
  out << "seed,round,labels_used,accuracy,mean_entropy\n";
  for (const RunTrace* t : sorted_by_seed(traces)) {
    for (const auto& r : t->rounds) {
      out << t->seed << ',' << r.round << ',' << r.cumulative_labels << ','
          << format_real(r.accuracy) << ',' << format_real(r.mean_entropy) << '\n';
    }
  }
}

void write_timing_csv(std::ostream& out, const std::vector<RunTrace>& traces) {
  out << "seed,round,wall_ms\n";
  for (const RunTrace* t : sorted_by_seed(traces)) {
    for (const auto& r : t->rounds) {
      out << t->seed << ',' << r.round << ',' << format_real(r.wall_ms) << '\n';
    }
  }
}

void write_summary_json(std::ostream& out, const ResultsMeta& meta,
                        const std::vector<RoundSummary>& summary,
                        const std::vector<RunTrace>& traces, const std::string& timestamp) {
  nlohmann::ordered_json j;
  j["config_hash"] = meta.config_hash;
  j["strategy"] = meta.strategy;
  j["seeds"] = meta.seeds;
  j["timestamp"] = timestamp;
  j["rounds"] = nlohmann::ordered_json::array();
  for (const auto& s : summary) {
    j["rounds"].push_back({{"round", s.round},
                           {"labels", s.labels},
                           {"acc_mean", s.acc_mean},
                           {"acc_std", s.acc_std}});
  }
  auto failed = nlohmann::ordered_json::array();
  for (const auto& t : traces) {
    if (t.error) failed.push_back({{"seed", t.seed}, {"error", *t.error}});
  }
  j["failed_seeds"] = failed;
  out << j.dump(2) << '\n';
}

}  // namespace clue

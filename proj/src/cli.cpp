#include "clue/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

#include "clue/config.hpp"
#include "clue/driver.hpp"
#include "clue/results.hpp"

namespace clue::cli {

namespace {

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunConfig load_config(const std::filesystem::path& path, const Options& opts,
                      const KeyValues& overrides = {}) {
  KeyValues kv = read_key_values(path);
  for (const auto& [k, v] : overrides) kv[k] = v;
  if (opts.seed_override) {
    std::string seeds;
    for (const auto s : *opts.seed_override) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
    kv["experiment.seeds"] = seeds;
  }
  return build_config(kv);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

struct RunOutput {
  std::vector<RunTrace> traces;
  ResultsMeta meta;
};

RunOutput execute(const RunConfig& cfg, const Options& opts) {
  DomainPair data = load_data(cfg.data);
  if (static_cast<std::size_t>(cfg.experiment.rounds) * cfg.experiment.budget >
      data.target.indices_of(Split::target_train).size()) {
    throw ConfigError("experiment.rounds x experiment.budget exceeds the target-train pool");
  }
  RunOutput out;
  out.traces = run_experiment(cfg.experiment, data, opts.threads);
  out.meta = {config_hash(cfg), std::string(to_string(cfg.experiment.strategy.name)),
              cfg.experiment.seeds};
  return out;
}

void write_outputs(const RunOutput& r, const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  {
    auto out = open_out(csv_path);
    write_results_csv(out, r.meta, r.traces);
  }
  auto json_path = csv_path;
  json_path.replace_extension(".json");
  {
    auto out = open_out(json_path);
    write_summary_json(out, r.meta, aggregate(r.traces), r.traces, utc_timestamp());
  }
  auto timing_path = csv_path;
  timing_path.replace_extension(".timing.csv");
  auto out = open_out(timing_path);
  write_timing_csv(out, r.traces);
}

bool all_failed(const std::vector<RunTrace>& traces, std::ostream& log) {
  bool any_ok = false;
  for (const auto& t : traces) {
    if (t.error) {
      log << "seed " << t.seed << " failed: " << *t.error << '\n';
    } else {
      any_ok = true;
    }
  }
  return !any_ok;
}

template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    log << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    log << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace

int resolve_threads(std::optional<int> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("CLUE_ADA_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
            const Options& opts, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = load_config(config_path, opts);
    const RunOutput r = execute(cfg, opts);
    write_outputs(r, out_path);
    return all_failed(r.traces, log) ? kRuntimeError : kOk;
  });
}

int cmd_sweep(const std::filesystem::path& config_path, const std::string& grid_spec,
              const std::filesystem::path& out_dir, const Options& opts, std::ostream& log) {
  return guarded(log, [&] {
    const auto eq = grid_spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("grid must look like section.key=v1,v2,...");
    }
    const std::string key = grid_spec.substr(0, eq);
    std::vector<std::string> values;
    std::istringstream in(grid_spec.substr(eq + 1));
    for (std::string v; std::getline(in, v, ',');) {
      if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw ConfigError("grid for '" + key + "' is empty");
    if (!default_key_values().contains(key)) throw ConfigError("unknown config key '" + key + "'");

    // Validate every grid point before running any of them.
    std::vector<RunConfig> configs;
    for (const auto& v : values) configs.push_back(load_config(config_path, opts, {{key, v}}));

    std::filesystem::create_directories(out_dir);
    auto combined = open_out(out_dir / "sweep.csv");
    combined << "grid_param,value,seed,round,accuracy\n";
    bool failed = false;
    for (std::size_t g = 0; g < values.size(); ++g) {
      const RunOutput r = execute(configs[g], opts);
      write_outputs(r, out_dir / (key + "=" + values[g] + ".csv"));
      failed |= all_failed(r.traces, log);
      std::vector<const RunTrace*> sorted;
      for (const auto& t : r.traces) sorted.push_back(&t);
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](auto* a, auto* b) { return a->seed < b->seed; });
      for (const RunTrace* t : sorted) {
        for (const auto& rec : t->rounds) {
          combined << key << ',' << values[g] << ',' << t->seed << ',' << rec.round << ','
                   << format_real(rec.accuracy) << '\n';
        }
      }
    }
    return failed ? kRuntimeError : kOk;
  });
}

int cmd_validate(const std::filesystem::path& config_path, const Options& opts, std::ostream& out,
                 std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = load_config(config_path, opts);
    if (cfg.data.source == DataSource::idx) {
      const Eigen::Index pool = expected_pool_size(cfg);
      const auto& e = cfg.experiment;
      if (static_cast<Eigen::Index>(e.rounds) * e.budget > pool) {
        throw ConfigError("experiment.rounds x experiment.budget exceeds the target-train pool size " +
                          std::to_string(pool));
      }
    }
    out << "# config_hash=" << config_hash(cfg) << '\n' << to_text(normalize(cfg));
    return kOk;
  });
}

}  // namespace clue::cli

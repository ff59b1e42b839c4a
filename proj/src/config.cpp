#include "clue/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>

namespace clue {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

template <typename F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::string join(const auto& items, auto&& fmt) {
  std::string out;
  for (const auto& x : items) out += (out.empty() ? "" : ",") + fmt(x);
  return out;
}

void phase_defaults(KeyValues& kv, const std::string& prefix, const PhaseSchedule& p) {
  kv[prefix + ".method"] = std::string(to_string(p.method));
  kv[prefix + ".lr"] = fmt_double(p.learning_rate);
  kv[prefix + ".weight_decay"] = fmt_double(p.weight_decay);
  kv[prefix + ".epochs"] = std::to_string(p.epochs);
  kv[prefix + ".min_steps"] = std::to_string(p.min_steps);
}

PhaseSchedule read_phase(const KeyValues& kv, const std::string& prefix) {
  PhaseSchedule p;
  const auto k = [&](const char* name) { return prefix + "." + name; };
  p.method = wrap(k("method"), [&] { return optimizer_from_string(kv.at(k("method"))); });
  p.learning_rate = parse_double(k("lr"), kv.at(k("lr")));
  p.weight_decay = parse_double(k("weight_decay"), kv.at(k("weight_decay")));
  p.epochs = static_cast<int>(parse_int(k("epochs"), kv.at(k("epochs"))));
  p.min_steps = static_cast<int>(parse_int(k("min_steps"), kv.at(k("min_steps"))));
  return p;
}

KeyValues make_defaults() {
  const RunConfig d;
  return normalize(d);
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // '#' or ';' after whitespace starts a trailing comment.
    for (std::size_t i = 1; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.resize(i);
        break;
      }
    }
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": bad section");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    if (!kv.emplace(key, trim(std::string_view(t).substr(eq + 1))).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_key_values(in);
}

const KeyValues& default_key_values() {
  static const KeyValues d = make_defaults();
  return d;
}

KeyValues normalize(const RunConfig& cfg) {
  const auto& e = cfg.experiment;
  const auto& d = cfg.data;
  KeyValues kv;
  kv["experiment.rounds"] = std::to_string(e.rounds);
  kv["experiment.budget"] = std::to_string(e.budget);
  kv["experiment.mode"] = std::string(to_string(e.mode));
  kv["experiment.seeds"] = join(e.seeds, [](auto s) { return std::to_string(s); });

  kv["strategy.name"] = std::string(to_string(e.strategy.name));
  kv["strategy.temperature"] = fmt_double(e.strategy.temperature);
  kv["strategy.clue_weight_kind"] = std::string(to_string(e.strategy.clue_weight_kind));
  kv["strategy.aada_top_fraction"] = fmt_double(e.strategy.aada_top_fraction);

  kv["model.hidden"] = join(e.hidden, [](auto h) { return std::to_string(h); });
  kv["model.activation"] = std::string(to_string(e.activation));
  kv["model.lambda_s"] = fmt_double(e.loss.lambda_s);
  kv["model.lambda_t"] = fmt_double(e.loss.lambda_t);
  kv["model.lambda_h"] = fmt_double(e.loss.lambda_h);

  kv["optimizer.batch_size"] = std::to_string(e.batch_size);
  phase_defaults(kv, "optimizer.source", e.source_phase);
  phase_defaults(kv, "optimizer.warmup", e.warmup_phase);
  phase_defaults(kv, "optimizer.round", e.round_phase);

  kv["data.source"] = d.source == DataSource::synthetic ? "synthetic" : "idx";
  const auto& s = d.shift;
  kv["data.generator"] = std::string(to_string(s.generator));
  kv["data.num_classes"] = std::to_string(s.num_classes);
  kv["data.dim"] = std::to_string(s.dim);
  kv["data.source_count"] = std::to_string(s.source_count);
  kv["data.target_count"] = std::to_string(s.target_count);
  kv["data.test_fraction"] = fmt_double(d.source == DataSource::synthetic ? s.test_fraction
                                                                          : d.test_fraction);
  kv["data.class_radius"] = fmt_double(s.class_radius);
  kv["data.noise"] = fmt_double(s.noise);
  // Degrees go through radians and back; 15 digits hides the round-off.
  char deg[32];
  std::snprintf(deg, sizeof deg, "%.15g", s.rotation * 180.0 / std::numbers::pi);
  kv["data.rotation_deg"] = deg;
  kv["data.translation"] = join(s.translation, fmt_double);
  kv["data.mean_perturbation"] = fmt_double(s.mean_perturbation);
  kv["data.modes_per_class"] = std::to_string(s.modes_per_class);
  kv["data.seed"] = std::to_string(d.source == DataSource::synthetic ? s.seed : d.split_seed);
  kv["data.source_images"] = d.source_images.string();
  kv["data.source_labels"] = d.source_labels.string();
  kv["data.target_images"] = d.target_images.string();
  kv["data.target_labels"] = d.target_labels.string();
  return kv;
}

RunConfig build_config(const KeyValues& given) {
  const KeyValues& defaults = default_key_values();
  KeyValues kv = defaults;
  for (const auto& [k, v] : given) {
    if (!defaults.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    kv[k] = v;
  }

  RunConfig cfg;
  auto& e = cfg.experiment;
  e.rounds = static_cast<int>(parse_int("experiment.rounds", kv["experiment.rounds"]));
  e.budget = parse_int("experiment.budget", kv["experiment.budget"]);
  e.mode = wrap("experiment.mode", [&] { return training_mode_from_string(kv["experiment.mode"]); });
  e.seeds.clear();
  for (const auto& s : split_list(kv["experiment.seeds"])) {
    e.seeds.push_back(parse_u64("experiment.seeds", s));
  }

  e.strategy.name = wrap("strategy.name", [&] { return strategy_from_string(kv["strategy.name"]); });
  e.strategy.temperature = parse_double("strategy.temperature", kv["strategy.temperature"]);
  e.strategy.clue_weight_kind = wrap("strategy.clue_weight_kind", [&] {
    return weight_kind_from_string(kv["strategy.clue_weight_kind"]);
  });
  e.strategy.aada_top_fraction =
      parse_double("strategy.aada_top_fraction", kv["strategy.aada_top_fraction"]);

  e.hidden.clear();
  for (const auto& h : split_list(kv["model.hidden"])) e.hidden.push_back(parse_int("model.hidden", h));
  e.activation = wrap("model.activation", [&] { return activation_from_string(kv["model.activation"]); });
  e.loss.lambda_s = parse_double("model.lambda_s", kv["model.lambda_s"]);
  e.loss.lambda_t = parse_double("model.lambda_t", kv["model.lambda_t"]);
  e.loss.lambda_h = parse_double("model.lambda_h", kv["model.lambda_h"]);

  e.batch_size = parse_int("optimizer.batch_size", kv["optimizer.batch_size"]);
  e.source_phase = read_phase(kv, "optimizer.source");
  e.warmup_phase = read_phase(kv, "optimizer.warmup");
  e.round_phase = read_phase(kv, "optimizer.round");

  auto& d = cfg.data;
  const std::string src = kv["data.source"];
  if (src == "synthetic") {
    d.source = DataSource::synthetic;
  } else if (src == "idx") {
    d.source = DataSource::idx;
  } else {
    throw ConfigError("config key 'data.source': expected synthetic or idx, got '" + src + "'");
  }
  auto& s = d.shift;
  s.generator = wrap("data.generator", [&] { return generator_from_string(kv["data.generator"]); });
  s.num_classes = static_cast<int>(parse_int("data.num_classes", kv["data.num_classes"]));
  s.dim = parse_int("data.dim", kv["data.dim"]);
  s.source_count = parse_int("data.source_count", kv["data.source_count"]);
  s.target_count = parse_int("data.target_count", kv["data.target_count"]);
  s.test_fraction = parse_double("data.test_fraction", kv["data.test_fraction"]);
  d.test_fraction = s.test_fraction;
  s.class_radius = parse_double("data.class_radius", kv["data.class_radius"]);
  s.noise = parse_double("data.noise", kv["data.noise"]);
  s.rotation = parse_double("data.rotation_deg", kv["data.rotation_deg"]) * std::numbers::pi / 180.0;
  s.translation.clear();
  for (const auto& t : split_list(kv["data.translation"])) {
    s.translation.push_back(parse_double("data.translation", t));
  }
  s.mean_perturbation = parse_double("data.mean_perturbation", kv["data.mean_perturbation"]);
  s.modes_per_class = static_cast<int>(parse_int("data.modes_per_class", kv["data.modes_per_class"]));
  s.seed = parse_u64("data.seed", kv["data.seed"]);
  d.split_seed = s.seed;
  d.source_images = kv["data.source_images"];
  d.source_labels = kv["data.source_labels"];
  d.target_images = kv["data.target_images"];
  d.target_labels = kv["data.target_labels"];

  validate_config(cfg);
  return cfg;
}

std::string to_text(const KeyValues& kv) {
  std::string out, section;
  for (const auto& [k, v] : kv) {
    const auto dot = k.find('.');
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + ("[" + sec + "]\n");
      section = sec;
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : normalize(cfg)) {
    for (const char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Eigen::Index expected_pool_size(const RunConfig& cfg) {
  if (cfg.data.source == DataSource::synthetic) {
    const auto& s = cfg.data.shift;
    return s.target_count - static_cast<Eigen::Index>(std::llround(s.test_fraction * s.target_count));
  }
  const Dataset t = load_idx(cfg.data.target_images, cfg.data.target_labels);
  return t.size() - static_cast<Eigen::Index>(std::llround(cfg.data.test_fraction * t.size()));
}

void validate_config(const RunConfig& cfg) {
  try {
    cfg.experiment.validate();
    if (cfg.data.source == DataSource::synthetic) {
      cfg.data.shift.validate();
      if (cfg.experiment.hidden.empty()) {
        throw std::invalid_argument("model.hidden must list at least one width");
      }
    } else if (cfg.data.source_images.empty() || cfg.data.target_images.empty() ||
               cfg.data.source_labels.empty() || cfg.data.target_labels.empty()) {
      throw std::invalid_argument("idx data needs source/target image and label paths");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.data.source == DataSource::synthetic) {
    const Eigen::Index pool = expected_pool_size(cfg);
    const auto& e = cfg.experiment;
    if (e.budget > pool) {
      throw ConfigError("experiment.budget " + std::to_string(e.budget) +
                        " exceeds the target-train pool size " + std::to_string(pool));
    }
    if (static_cast<Eigen::Index>(e.rounds) * e.budget > pool) {
      throw ConfigError("experiment.rounds x experiment.budget = " +
                        std::to_string(e.rounds * e.budget) +
                        " exceeds the target-train pool size " + std::to_string(pool));
    }
  }
}

DomainPair load_data(const DataConfig& cfg) {
  if (cfg.source == DataSource::synthetic) return generate_shift(cfg.shift);
  DomainPair out;
  out.source = load_idx(cfg.source_images, cfg.source_labels, Split::source_train);
  out.target = load_idx(cfg.target_images, cfg.target_labels, Split::target_train);
  const int c = std::max(out.source.num_classes, out.target.num_classes);
  out.source.num_classes = out.target.num_classes = c;
  assign_target_split(out.target, cfg.test_fraction, cfg.split_seed);
  return out;
}

}  // namespace clue

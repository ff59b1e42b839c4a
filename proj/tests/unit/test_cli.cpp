#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <numbers>
#include <sys/wait.h>
#include <unistd.h>

#include "clue/cli.hpp"
#include "clue/config.hpp"

using namespace clue;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(# tiny run
[experiment]
rounds = 2
budget = 4
seeds = 0,1
mode = mme

[strategy]
name = clue
temperature = 0.5

[model]
hidden = 8

[optimizer]
batch_size = 16
source.epochs = 2
warmup.epochs = 1
round.epochs = 1
round.min_steps = 5

[data]
num_classes = 3
source_count = 120
target_count = 100
rotation_deg = 30
seed = 4
)";

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("clue_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(const std::string& args, const TempDir& dir) {
  const auto out = dir.path / "stdout.txt", err = dir.path / "stderr.txt";
  const std::string cmd = std::string("\"") + CLUE_ADA_BIN + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out), read_file(err)};
}

std::string with(const std::string& base, const std::string& section, const std::string& line) {
  std::string s = base;
  // Replace an existing "key = ..." line, else insert under the section header.
  const std::string key = line.substr(0, line.find(' '));
  const auto at = s.find("\n" + key + " = ");
  if (at != std::string::npos && line.find('\n') == std::string::npos) {
    const auto end = s.find('\n', at + 1);
    s.replace(at + 1, end - at - 1, line);
    return s;
  }
  const auto pos = s.find("[" + section + "]\n");
  REQUIRE(pos != std::string::npos);
  s.insert(pos + section.size() + 3, line + "\n");
  return s;
}

}  // namespace

TEST_CASE("key/value parsing") {
  std::istringstream in("top = 1\n[a]\n x = 2 ; note\n# skip\n\n[b]\ny=hello world\n");
  const auto kv = parse_key_values(in);
  CHECK(kv.at("top") == "1");
  CHECK(kv.at("a.x") == "2");
  CHECK(kv.at("b.y") == "hello world");
  std::istringstream bad("[a]\nno equals here\n");
  CHECK_THROWS_AS(parse_key_values(bad), ConfigError);
  std::istringstream dup("[a]\nx = 1\nx = 2\n");
  CHECK_THROWS_WITH_AS(parse_key_values(dup), doctest::Contains("a.x"), ConfigError);
  CHECK_THROWS_AS(read_key_values("/nonexistent/cfg.ini"), ConfigError);
}

TEST_CASE("config building and hashing") {
  std::istringstream in(kTiny);
  const auto kv = parse_key_values(in);
  const RunConfig cfg = build_config(kv);
  CHECK(cfg.experiment.rounds == 2);
  CHECK(cfg.experiment.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(cfg.experiment.strategy.temperature == 0.5);
  CHECK(cfg.data.shift.rotation == doctest::Approx(std::numbers::pi / 6));

  // Defaults fill every recognised key; normalize round-trips.
  const auto norm = normalize(cfg);
  CHECK(norm.size() == default_key_values().size());
  CHECK(config_hash(build_config(norm)) == config_hash(cfg));
  CHECK(config_hash(cfg).size() == 16);

  // Order and spelling of equivalent values do not matter.
  KeyValues reordered;
  for (auto it = kv.rbegin(); it != kv.rend(); ++it) reordered[it->first] = it->second;
  reordered["strategy.temperature"] = "0.50";
  CHECK(config_hash(build_config(reordered)) == config_hash(cfg));

  // Any semantic change moves the hash.
  for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"experiment.rounds", "3"}, {"strategy.name", "badge"}, {"data.seed", "5"},
           {"model.lambda_h", "0.2"}, {"optimizer.round.lr", "0.002"}}) {
    KeyValues changed = kv;
    changed[key] = value;
    CHECK(config_hash(build_config(changed)) != config_hash(cfg));
  }

  KeyValues unknown = kv;
  unknown["strategy.temprature"] = "1";
  CHECK_THROWS_WITH_AS(build_config(unknown), doctest::Contains("strategy.temprature"), ConfigError);
  KeyValues malformed = kv;
  malformed["experiment.budget"] = "four";
  CHECK_THROWS_WITH_AS(build_config(malformed), doctest::Contains("experiment.budget"), ConfigError);
  KeyValues too_big = kv;
  too_big["experiment.budget"] = "60";
  CHECK_THROWS_AS(build_config(too_big), ConfigError);
}

TEST_CASE("resolve_threads") {
  CHECK(cli::resolve_threads(3) == 3);
  ::setenv("CLUE_ADA_THREADS", "5", 1);
  CHECK(cli::resolve_threads(std::nullopt) == 5);
  CHECK(cli::resolve_threads(2) == 2);
  ::unsetenv("CLUE_ADA_THREADS");
  CHECK(cli::resolve_threads(std::nullopt) == 1);
}

TEST_CASE("run writes byte-stable results") {
  TempDir dir;
  const auto cfg = dir.path / "tiny.ini";
  write_file(cfg, kTiny);
  const auto csv = dir.path / "out" / "run.csv";
  const auto r = run_cli("run --config \"" + cfg.string() + "\" --out \"" + csv.string() + "\"", dir);
  REQUIRE(r.code == 0);
  const auto first = read_file(csv);
  const auto lines = lines_of(first);
  REQUIRE(lines.size() == 4 + 2 * 3);
  CHECK(lines[0].rfind("# config_hash=", 0) == 0);
  CHECK(lines[1] == "# strategy=clue");
  CHECK(lines[2] == "# seeds=0,1");
  CHECK(lines[3] == "seed,round,labels_used,accuracy,mean_entropy");
  CHECK(lines[4].rfind("0,0,0,", 0) == 0);
  CHECK(lines[6].rfind("0,2,8,", 0) == 0);
  CHECK(lines[7].rfind("1,0,0,", 0) == 0);
  CHECK(fs::exists(dir.path / "out" / "run.json"));
  CHECK(fs::exists(dir.path / "out" / "run.timing.csv"));
  const auto json = read_file(dir.path / "out" / "run.json");
  CHECK(json.find("\"acc_std\"") != std::string::npos);
  CHECK(json.find("\"timestamp\"") != std::string::npos);

  REQUIRE(run_cli("run --config \"" + cfg.string() + "\" --out \"" + csv.string() + "\"", dir).code == 0);
  CHECK(read_file(csv) == first);

  REQUIRE(run_cli("--threads 2 run --config \"" + cfg.string() + "\" --out \"" + csv.string() + "\"", dir)
              .code == 0);
  CHECK(read_file(csv) == first);

  SUBCASE("seed override replaces the seed list") {
    REQUIRE(run_cli("--seed-override 7 run --config \"" + cfg.string() + "\" --out \"" +
                        csv.string() + "\"",
                    dir)
                .code == 0);
    const auto l = lines_of(read_file(csv));
    CHECK(l[2] == "# seeds=7");
    CHECK(l.size() == 4 + 3);
  }
}

TEST_CASE("run error codes") {
  TempDir dir;
  const auto cfg = dir.path / "cfg.ini";
  const auto out = (dir.path / "r.csv").string();

  write_file(cfg, with(kTiny, "strategy", "temprature = 1"));
  auto r = run_cli("run --config \"" + cfg.string() + "\" --out \"" + out + "\"", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("strategy.temprature") != std::string::npos);

  write_file(cfg, with(kTiny, "data",
                       "source = idx\nsource_images = /missing/a\nsource_labels = /missing/b\n"
                       "target_images = /missing/c\ntarget_labels = /missing/d"));
  r = run_cli("run --config \"" + cfg.string() + "\" --out \"" + out + "\"", dir);
  CHECK(r.code == 2);
  CHECK(lines_of(r.err).size() == 1);

  CHECK(run_cli("run --config \"" + (dir.path / "nope.ini").string() + "\" --out x.csv", dir).code == 1);
  CHECK(run_cli("run --config", dir).code == 1);
}

TEST_CASE("sweep") {
  TempDir dir;
  const auto cfg = dir.path / "tiny.ini";
  write_file(cfg, kTiny);
  const auto out = dir.path / "sweep";
  const auto base = "sweep --config \"" + cfg.string() + "\" --out \"" + out.string() + "\" ";

  auto r = run_cli("--seed-override 0,1,2 " + base + "--grid strategy.temperature=0.1,0.5,1.0,2.0", dir);
  REQUIRE(r.code == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    const auto name = e.path().filename().string();
    files += name.rfind("strategy.temperature=", 0) == 0 && e.path().extension() == ".csv" &&
             name.find(".timing") == std::string::npos;
  }
  CHECK(files == 4);
  const auto combined = lines_of(read_file(out / "sweep.csv"));
  CHECK(combined[0] == "grid_param,value,seed,round,accuracy");
  CHECK(combined.size() == 1 + 4 * 3 * 3);

  r = run_cli(base + "--grid strategy.clue_weight_kind=entropy,margin,uniform", dir);
  CHECK(r.code == 0);
  CHECK(lines_of(read_file(out / "sweep.csv")).size() == 1 + 3 * 2 * 3);

  CHECK(run_cli(base + "--grid strategy.temperature=", dir).code == 1);
  CHECK(run_cli(base + "--grid strategy.warmth=1,2", dir).code == 1);
  CHECK(run_cli(base + "--grid strategy.temperature=1,-1", dir).code == 1);
}

TEST_CASE("validate") {
  TempDir dir;
  const auto cfg = dir.path / "tiny.ini";
  write_file(cfg, kTiny);
  auto r = run_cli("validate --config \"" + cfg.string() + "\"", dir);
  CHECK(r.code == 0);
  CHECK(r.out.rfind("# config_hash=", 0) == 0);
  CHECK(r.out.find("[strategy]") != std::string::npos);
  CHECK(r.out.find("temperature = 0.5") != std::string::npos);

  write_file(cfg, with(kTiny, "experiment", "rounds = 30"));
  r = run_cli("validate --config \"" + cfg.string() + "\"", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("pool") != std::string::npos);

  write_file(cfg, with(kTiny, "strategy", "name = random"));
  r = run_cli("validate --config \"" + cfg.string() + "\"", dir);
  CHECK(r.code == 1);
  for (const char* name : {"clue", "uniform", "entropy", "margin", "coreset", "badge", "aada"}) {
    CHECK(r.err.find(name) != std::string::npos);
  }
}

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clue/clustering.hpp"
#include "clue/config.hpp"
#include "clue/data.hpp"
#include "clue/driver.hpp"
#include "clue/model.hpp"
#include "clue/results.hpp"
#include "clue/sampling.hpp"
#include "clue/uncertainty.hpp"
#include "oracles.hpp"

using namespace clue;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// ---- 1 ----------------------------------------------------------------------

Outcome entropy_suite() {
  Rng rng(1);
  int bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index c = 2 + trial % 19;
    const double log_c = std::log(static_cast<double>(c));
    Matrix p = oracle::random_probs(rng, 3, c);
    p.row(1).setZero();
    p(1, rng.below(c)) = 1.0;
    p.row(2).setConstant(1.0 / static_cast<double>(c));
    const Vector h = entropy_rows(p);
    const Vector t = targetness(p, c);
    std::vector<double> row0(p.cols());
    for (Eigen::Index j = 0; j < c; ++j) row0[j] = p(0, j);
    const double err0 = std::abs(h(0) - oracle::entropy(row0));
    worst = std::max({worst, err0, std::abs(h(1)), std::abs(h(2) - log_c)});
    bad += err0 > 1e-9;
    bad += h(0) < -1e-9 || h(0) > log_c + 1e-9;
    bad += std::abs(h(1)) > 1e-9;
    bad += std::abs(h(2) - log_c) > 1e-9;
    for (Eigen::Index i = 0; i < 3; ++i) bad += std::abs(t(i) - h(i) / log_c) > 1e-9;
  }
  return {bad == 0, fmt("1000 distributions, %d violations, max abs err %.2e", bad, worst)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome variance_identity() {
  Rng rng(2);
  double worst = 0.0, worst_w = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix x = oracle::random_matrix(rng, 2 + trial % 30, 1 + trial % 6, 1.0 + trial % 5);
    const double v = set_variance(x);
    worst = std::max(worst, rel_err(v, oracle::pairwise_variance(x)));
    const Vector w = Vector::Constant(x.rows(), 0.1 + rng.uniform());
    worst_w = std::max(worst_w, rel_err(weighted_set_variance(x, w), v));
  }
  return {worst <= 1e-9 && worst_w <= 1e-9,
          fmt("200 sets, max rel err %.2e (pairwise), %.2e (uniform weights)", worst, worst_w)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome kmeans_oracle() {
  Rng rng(3);
  int matched = 0, matched_normalized = 0, monotone = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = oracle::random_matrix(rng, 8, 2);
    const Matrix probs = oracle::random_probs(rng, 8, 4);
    const UncertaintyWeights w = make_weights(probs, WeightKind::entropy);
    const auto best = oracle::brute_force_partition(x, w.values, 3);
    ClusterConfig cfg;
    cfg.k = 3;
    cfg.restarts = 10;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto st = weighted_kmeans(x, w, cfg);
    std::vector<int> assign(st.assignment.begin(), st.assignment.end());
    const auto got = oracle::partition_value(x, w.values, assign, 3);
    matched += std::abs(got.unnormalized - best.unnormalized) <= 1e-9;
    matched_normalized += std::abs(got.normalized - best.normalized) <= 1e-9;
    bool mono = true;
    for (std::size_t i = 1; i < st.trace.size(); ++i) mono &= st.trace[i] <= st.trace[i - 1];
    monotone += mono;
  }
  return {matched >= 95 && monotone == 100,
          fmt("weighted SSE optimal on %d/100, trace monotone on %d/100 "
              "(normalized objective optimal on %d/100, informational)",
              matched, monotone, matched_normalized)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome uniform_reduction() {
  Rng rng(4);
  int identical = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 20 + trial, k = 2 + trial % 6;
    const Matrix x = oracle::random_matrix(rng, n, 1 + trial % 4);
    ClusterConfig cfg;
    cfg.k = k;
    cfg.seed = 1000 + static_cast<std::uint64_t>(trial);
    const UncertaintyWeights w = uniform_weights(n);
    const auto st = weighted_kmeans(x, w, cfg);
    const auto ref = oracle::unweighted_lloyd(x, kmeanspp_init(x, w, cfg), cfg.max_iters, cfg.tol);
    bool same = true;
    for (Eigen::Index i = 0; i < n; ++i) same &= st.assignment[i] == ref.assign[i];
    const double diff = (st.centroids - ref.centroids).cwiseAbs().maxCoeff();
    worst = std::max(worst, diff);
    identical += same && diff <= 1e-10;
  }
  return {identical == 50, fmt("%d/50 identical, max centroid diff %.2e", identical, worst)};
}

// ---- 5 ----------------------------------------------------------------------

NetworkParams random_net(std::uint64_t seed, Eigen::Index in, Eigen::Index classes,
                         Activation act) {
  ArchitectureSpec a;
  a.input_dim = in;
  a.hidden = {6, 5};
  a.activation = act;
  a.num_classes = classes;
  return init_params(a, seed);
}

Outcome gradient_suite() {
  Rng rng(5);
  double worst_sup = 0.0, worst_mme = 0.0, worst_badge = 0.0, worst_abs = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto act = trial % 2 ? Activation::tanh : Activation::identity;
    const Eigen::Index c = 2 + trial % 4;
    const auto p = random_net(500 + trial, 3, c, act);
    const auto s = oracle::random_batch(rng, 5, 3, static_cast<int>(c));
    const auto t = oracle::random_batch(rng, 4, 3, static_cast<int>(c));
    const Matrix u = oracle::random_matrix(rng, 6, 3);
    const LossWeights lw{0.1 + rng.uniform(), 0.5 + rng.uniform(), 0.05 + rng.uniform()};

    const auto sup = supervised_loss_and_grads(p, s, t, lw);
    const auto fd_sup = oracle::finite_difference(p, [&](const NetworkParams& q) {
      return lw.lambda_s * oracle::scalar_mean_ce(q, s.inputs, s.labels) +
             lw.lambda_t * oracle::scalar_mean_ce(q, t.inputs, t.labels);
    });
    worst_sup = std::max(worst_sup, oracle::max_rel_error(sup.grads, fd_sup));
    worst_abs = std::max(worst_abs, oracle::max_abs_error(sup.grads, fd_sup));

    const auto mme = mme_loss_and_grads(p, s, t, u, lw);
    const auto fd_mme = oracle::mme_finite_difference(p, s, t, u, lw);
    worst_mme = std::max(worst_mme, oracle::max_rel_error(mme.grads, fd_mme));
    worst_abs = std::max(worst_abs, oracle::max_abs_error(mme.grads, fd_mme));

    // Gradient embedding against d CE(softmax(W z), yhat) / dW by central differences.
    const Eigen::Index d = 1 + trial % 5;
    const Matrix w = oracle::random_matrix(rng, c, d);
    const Matrix z = oracle::random_matrix(rng, 1, d);
    const Matrix probs = softmax_rows(Matrix(z * w.transpose()));
    const Eigen::Index yhat = argmax(probs.row(0));
    const Matrix g = badge_gradient_embeddings(probs, z);
    auto ce = [&](const Matrix& wm) {
      const Matrix lz = z * wm.transpose();
      const double m = lz.maxCoeff();
      return m + std::log((lz.array() - m).exp().sum()) - lz(0, yhat);
    };
    for (Eigen::Index cc = 0; cc < c; ++cc) {
      for (Eigen::Index dd = 0; dd < d; ++dd) {
        Matrix up = w, down = w;
        up(cc, dd) += 1e-5;
        down(cc, dd) -= 1e-5;
        const double fd = (ce(up) - ce(down)) / 2e-5;
        const double an = g(0, cc * d + dd);
        worst_abs = std::max(worst_abs, std::abs(fd - an));
        if (std::abs(fd - an) > 1e-8) {
          worst_badge = std::max(worst_badge, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
        }
      }
    }
  }
  return {worst_sup < 1e-4 && worst_mme < 1e-4 && worst_badge < 1e-4,
          fmt("20 instances each, max rel err %.2e (supervised), %.2e (minimax, reversed), "
              "%.2e (gradient embedding); entries within the 1e-8 floor skipped, max abs diff %.2e",
              worst_sup, worst_mme, worst_badge, worst_abs)};
}

// ---- 6 ----------------------------------------------------------------------

Outcome mme_sign_check() {
  Rng rng(6);
  int up = 0, down = 0;
  const int n = 20;
  for (int trial = 0; trial < n; ++trial) {
    const auto p = random_net(600 + trial, 4, 3 + trial % 3, Activation::tanh);
    const Matrix u = oracle::random_matrix(rng, 32, 4);
    // The entropy player in isolation: lambda_s = lambda_t = 0.
    const LossWeights lw{0.0, 0.0, 0.1};
    const LabeledBatch none{Matrix(0, 4), {}};
    const auto g = mme_loss_and_grads(p, none, none, u, lw).grads;
    const double before = mean_entropy(p, u);
    const std::size_t split = extractor_block_count(p);
    for (bool classifier : {true, false}) {
      NetworkParams q = p;
      auto qb = param_blocks(q);
      const auto gb = param_blocks(g);
      for (std::size_t b = 0; b < qb.size(); ++b) {
        if ((b >= split) == classifier) qb[b] -= 1e-3 * gb[b];
      }
      const double after = mean_entropy(q, u);
      if (classifier) {
        up += after > before;
      } else {
        down += after < before;
      }
    }
  }
  return {up == n && down == n,
          fmt("classifier step raised entropy %d/%d, extractor step lowered it %d/%d (lr 1e-3)", up,
              n, down, n)};
}

// ---- 7 ----------------------------------------------------------------------

Outcome strategy_contracts(bool& leak_free) {
  Rng rng(7);
  int violations = 0, agree = 0, binary = 0, trials = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 4 + trial % 60, c = 2 + trial % 5, d = 1 + trial % 4;
    // Global ids with gaps; the held-out ids play the role of labeled/test rows.
    std::vector<Eigen::Index> ids(n);
    for (Eigen::Index i = 0; i < n; ++i) ids[i] = 2 * i + 1;
    rng.shuffle(ids);
    const std::set<Eigen::Index> allowed(ids.begin(), ids.end());
    AcquisitionRequest req;
    req.budget = 1 + static_cast<Eigen::Index>(rng.below(std::min<std::size_t>(n, 12)));
    req.embeddings = oracle::random_matrix(rng, n, d);
    req.logits = oracle::random_matrix(rng, n, c, 3.0);
    req.probs = softmax_rows(req.logits);
    req.unlabeled_indices = ids;
    req.rng_seed = rng.next_u64();
    const Matrix labeled = oracle::random_matrix(rng, trial % 5, d);
    for (auto name : strategy_names()) {
      StrategyConfig cfg;
      cfg.name = strategy_from_string(name);
      cfg.temperature = 0.25 + rng.uniform();
      const auto a = select(req, cfg, labeled).indices;
      const auto b = select(req, cfg, labeled).indices;
      const std::set<Eigen::Index> distinct(a.begin(), a.end());
      bool ok = static_cast<Eigen::Index>(a.size()) == req.budget && distinct.size() == a.size() && a == b;
      for (auto i : a) {
        if (!allowed.count(i)) {
          ok = false;
          leak_free = false;
        }
      }
      violations += !ok;
      ++trials;
    }
    if (c == 2) {
      ++binary;
      agree += select_entropy(req) == select_margin(req);
    }
  }
  return {violations == 0 && agree == binary,
          fmt("500 trials x 7 strategies: %d contract violations; entropy == margin on %d/%d "
              "binary trials",
              violations, agree, binary)};
}

// ---- 8 ----------------------------------------------------------------------

struct TrendRuns {
  DomainPair data;
  RunConfig base;
  std::vector<RunTrace> clue_mme, uniform_finetune, uniform_mme;
};

const char* kTrendConfig = R"(
[experiment]
rounds = 10
budget = 20
seeds = 0,1,2,3,4

[data]
num_classes = 4
source_count = 2000
target_count = 2500
test_fraction = 0.2
rotation_deg = 60
seed = 0
)";

double final_mean(const std::vector<RunTrace>& traces) {
  const auto s = aggregate(traces);
  return s.empty() ? 0.0 : s.back().acc_mean;
}

Outcome trend(TrendRuns& runs) {
  std::istringstream in(kTrendConfig);
  runs.base = build_config(parse_key_values(in));
  runs.data = load_data(runs.base.data);
  auto arm = [&](Strategy s, TrainingMode m) {
    ExperimentConfig e = runs.base.experiment;
    e.strategy.name = s;
    e.mode = m;
    return run_experiment(e, runs.data);
  };
  runs.clue_mme = arm(Strategy::clue, TrainingMode::mme);
  runs.uniform_finetune = arm(Strategy::uniform, TrainingMode::finetune);
  runs.uniform_mme = arm(Strategy::uniform, TrainingMode::mme);
  const double cm = final_mean(runs.clue_mme), uf = final_mean(runs.uniform_finetune),
               um = final_mean(runs.uniform_mme);
  const double gap_a = 100.0 * (cm - uf), gap_b = 100.0 * (um - uf);
  return {gap_a >= 2.0 && gap_b >= 1.0,
          fmt("final acc clue+mme %.2f%%, uniform+finetune %.2f%%, uniform+mme %.2f%%; "
              "(a) %+.2f pts (need >= 2), (b) %+.2f pts (need >= 1)",
              100 * cm, 100 * uf, 100 * um, gap_a, gap_b)};
}

// ---- 9 ----------------------------------------------------------------------

std::string trace_bytes(const std::vector<RunTrace>& traces) {
  std::ostringstream out;
  write_results_csv(out, {"-", "-", {}}, traces);
  for (const auto& t : traces) {
    for (const auto& r : t.rounds) {
      for (auto i : r.selected) out << i << ' ';
      out << fmt("%a %a", r.accuracy, r.mean_entropy) << '\n';
    }
  }
  return out.str();
}

Outcome determinism_and_leakage(const TrendRuns& runs, bool leak_free_selection) {
  ExperimentConfig e = runs.base.experiment;
  e.strategy.name = Strategy::clue;
  e.mode = TrainingMode::mme;
  const auto again = run_experiment(e, runs.data);
  const bool identical = trace_bytes(again) == trace_bytes(runs.clue_mme);

  const auto test = runs.data.target.indices_of(Split::target_test);
  const std::set<Eigen::Index> test_set(test.begin(), test.end());
  int errors = 0, leaked = 0;
  for (const auto* arm : {&runs.clue_mme, &runs.uniform_finetune, &runs.uniform_mme, &again}) {
    for (const auto& t : *arm) {
      errors += t.error.has_value();
      for (const auto& r : t.rounds) {
        for (auto i : r.selected) leaked += test_set.count(i) > 0;
      }
    }
  }
  return {identical && errors == 0 && leaked == 0 && leak_free_selection,
          fmt("repeat run %s; %d failed seeds (guard trips); %d test rows selected; "
              "strategy suite %s",
              identical ? "bit-identical" : "DIFFERS", errors, leaked,
              leak_free_selection ? "stayed in the pool" : "LEFT the pool")};
}

// ---- 10 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome idx_loader() {
  const fs::path dir = fs::temp_directory_path() / "clue_ada_idx_acceptance";
  fs::create_directories(dir);
  Dataset d;
  d.features.resize(3, 4 * 5);
  for (Eigen::Index i = 0; i < d.features.size(); ++i) {
    d.features.data()[i] = static_cast<double>((i * 37) % 256) / 255.0;
  }
  d.labels = {9, 0, 4};
  d.splits.assign(3, Split::target_train);
  d.num_classes = 10;
  {
    std::ofstream img(dir / "img", std::ios::binary), lab(dir / "lab", std::ios::binary);
    write_idx(img, lab, d, 4, 5);
  }
  const Dataset back = load_idx(dir / "img", dir / "lab");
  bool ok = back.features == d.features && back.labels == d.labels;
  const std::string img_bytes = slurp(dir / "img"), lab_bytes = slurp(dir / "lab");
  {
    std::ofstream img(dir / "img2", std::ios::binary), lab(dir / "lab2", std::ios::binary);
    write_idx(img, lab, back, 4, 5);
  }
  ok &= slurp(dir / "img2") == img_bytes && slurp(dir / "lab2") == lab_bytes;

  auto rejects = [&](const std::string& img, const std::string& lab) {
    std::ofstream(dir / "bad_img", std::ios::binary) << img;
    std::ofstream(dir / "bad_lab", std::ios::binary) << lab;
    try {
      load_idx(dir / "bad_img", dir / "bad_lab");
    } catch (const DataError&) {
      return true;
    }
    return false;
  };
  std::string bad_magic = img_bytes;
  bad_magic[2] = 0x09;
  const bool rejected = rejects(bad_magic, lab_bytes) &&
                        rejects(img_bytes.substr(0, img_bytes.size() - 3), lab_bytes) &&
                        rejects(img_bytes, lab_bytes.substr(0, lab_bytes.size() - 1)) &&
                        rejects(img_bytes.substr(0, 10), lab_bytes);
  fs::remove_all(dir);

  std::string mnist = "official MNIST files not found locally (set CLUE_ADA_MNIST_DIR); skipped";
  fs::path mdir = "data/mnist";
  if (const char* env = std::getenv("CLUE_ADA_MNIST_DIR")) mdir = env;
  if (fs::exists(mdir / "train-images-idx3-ubyte") && fs::exists(mdir / "t10k-images-idx3-ubyte")) {
    const Dataset train = load_idx(mdir / "train-images-idx3-ubyte", mdir / "train-labels-idx1-ubyte");
    const Dataset test = load_idx(mdir / "t10k-images-idx3-ubyte", mdir / "t10k-labels-idx1-ubyte");
    const bool m_ok = train.size() == 60000 && test.size() == 10000 &&
                      train.features.cols() == 784 && train.num_classes == 10;
    ok &= m_ok;
    mnist = fmt("MNIST N=%lld/%lld, D=%lld, C=%d", static_cast<long long>(train.size()),
                static_cast<long long>(test.size()), static_cast<long long>(train.features.cols()),
                train.num_classes);
  }
  return {ok && rejected, fmt("fixture round-trip %s, corruption %s; %s", ok ? "bit-exact" : "MISMATCH",
                              rejected ? "rejected" : "ACCEPTED", mnist.c_str())};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s  %2d  %-28s %8.2fs (limit %gs)  %s%s\n", pass ? "PASS" : "FAIL", id, name, secs,
                limit_s, o.detail.c_str(), in_time ? "" : " [over time limit]");
    std::fflush(stdout);
  };

  bool leak_free = true;
  TrendRuns runs;
  report(1, "entropy/uncertainty", 1, entropy_suite);
  report(2, "variance identity", 1, variance_identity);
  report(3, "weighted k-means oracle", 60, kmeans_oracle);
  report(4, "uniform-weight reduction", 10, uniform_reduction);
  report(5, "gradient suite", 30, gradient_suite);
  report(6, "minimax sign check", 10, mme_sign_check);
  report(7, "strategy contracts", 10, [&] { return strategy_contracts(leak_free); });
  report(8, "trend reproduction", 600, [&] { return trend(runs); });
  report(9, "determinism & leakage", 600, [&] { return determinism_and_leakage(runs, leak_free); });
  report(10, "idx loader", 5, idx_loader);
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}

// Acceptance suite: one PASS/FAIL line per criterion.
//
//   bprnn_acceptance            run everything
//   bprnn_acceptance NAME...    run the named criteria only

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "bprnn/activation.hpp"
#include "bprnn/adam.hpp"
#include "bprnn/checkpoint.hpp"
#include "bprnn/corpus.hpp"
#include "bprnn/dynamics.hpp"
#include "bprnn/gradflow.hpp"
#include "bprnn/lsuv.hpp"
#include "bprnn/rnn.hpp"
#include "bprnn/trainer.hpp"
#include "cli.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace bprnn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // 0 = none
  std::function<Outcome()> run;
};

const std::vector<ActivationSpec>& all_specs() {
  static const std::vector<ActivationSpec> specs = {
      ActivationSpec::relu(false),       ActivationSpec::relu(true),
      ActivationSpec::leaky_relu(0.01, false), ActivationSpec::leaky_relu(0.01, true),
      ActivationSpec::elu(1.0, false),   ActivationSpec::elu(1.0, true),
      ActivationSpec::selu(false),       ActivationSpec::selu(true)};
  return specs;
}

// ---------------------------------------------------------------- theorems

Outcome theorem1() {
  const double mus[] = {-2.0, 0.0, 1.0};
  int passing = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    bool ok = true;
    for (double mu : mus) {
      Rng rng(seed);
      const double m = mean_shift_probe(ActivationSpec::relu(true), mu, 1000000, rng);
      const double dev = std::abs(m - 0.5 * mu);
      worst = std::max(worst, dev);
      ok = ok && dev <= 0.004;
    }
    passing += ok ? 1 : 0;
  }
  return {passing >= 99, fmt::format("{}/100 seeds within 0.5*mu +- 0.004, worst |dev| {:.5f}",
                                     passing, worst)};
}

Outcome theorem2() {
  const double mus[] = {-3.0, 0.0, 3.0};
  double worst = 0.0;
  std::string parts;
  for (double mu : mus) {
    Rng rng(42);
    const double m = mean_shift_probe(ActivationSpec::elu(1.0, true), mu, 1000000, rng);
    const double d = std::abs(2.0 * m - mu);
    worst = std::max(worst, d);
    parts += fmt::format(" mu={}:{:.4f}", mu, d);
  }
  return {worst <= 1.01, fmt::format("|2m-mu| <= 1.01;{}", parts)};
}

// ---------------------------------------------------------- gradient oracle

bool kinked(const ActivationSpec& s) {
  // ELU with alpha = 1 is continuously differentiable at 0; the rest are not.
  return !(s.base == ActivationBase::ELU && s.elu_alpha == 1.0);
}

struct GradStats {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kink = 0;
  std::size_t skipped_zero = 0;
  double max_forward_diff = 0.0;
  std::size_t over = 0;
  std::string worst;
};

void gradient_case(std::size_t depth, std::size_t width, std::size_t steps,
                   const ActivationSpec& spec, std::uint64_t seed, double step, GradStats& st) {
  constexpr std::size_t kBatch = 3;
  StackConfig cfg;
  cfg.depth = depth;
  cfg.width = width;
  cfg.embedding_dim = width;
  cfg.vocab_size = 5;
  cfg.activation = spec;
  Rng rng(seed);
  Model model = make_model(cfg, rng);
  for (auto& l : model.layers) l.b = sample_gaussian(rng, width, 1, 0.0, 0.1);
  model.head.V = sample_gaussian(rng, cfg.vocab_size, width, 0.0, 0.5);
  model.head.c = sample_gaussian(rng, cfg.vocab_size, 1, 0.0, 0.1);

  DropoutConfig dc;
  dc.p_between = 0.25;
  dc.p_recurrent = 0.25;
  dc.p_block = 0.3;
  const DropoutMasks masks = sample_masks(dc, cfg, steps, kBatch, rng);

  StackState init;
  for (std::size_t i = 0; i < depth; ++i) init.h.push_back(sample_gaussian(rng, width, kBatch, 0.0, 0.5));
  TokenGrid in(steps, kBatch), tgt(steps, kBatch);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < kBatch; ++b) {
      in.at(t, b) = static_cast<int>(rng.below(cfg.vocab_size));
      tgt.at(t, b) = static_cast<int>(rng.below(cfg.vocab_size));
    }
  }

  const SequenceResult fwd = forward_sequence(model, init, in, tgt, masks);
  const Gradients g = backward(fwd.cache, model, masks);
  const oracle::Pass base = oracle::loss(model, init, in, tgt, masks);
  st.max_forward_diff =
      std::max(st.max_forward_diff, static_cast<double>(std::abs(base.loss - fwd.loss)));

  std::vector<std::pair<std::string, std::pair<Tensor2D*, const Tensor2D*>>> params;
  for (std::size_t i = 1; i <= depth; ++i) {
    params.push_back({fmt::format("W{}", i), {&model.layer(i).W, &g.layers[i - 1].W}});
    params.push_back({fmt::format("U{}", i), {&model.layer(i).U, &g.layers[i - 1].U}});
    params.push_back({fmt::format("b{}", i), {&model.layer(i).b, &g.layers[i - 1].b}});
  }
  params.push_back({"V", {&model.head.V, &g.V}});
  params.push_back({"c", {&model.head.c, &g.c}});

  for (auto& [name, pg] : params) {
    auto theta = pg.first->values();
    const auto grad = pg.second->values();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double orig = theta[k];
      const double up = orig + step;
      const double down = orig - step;
      theta[k] = up;
      const oracle::Pass plus = oracle::loss(model, init, in, tgt, masks);
      theta[k] = down;
      const oracle::Pass minus = oracle::loss(model, init, in, tgt, masks);
      theta[k] = orig;
      if (kinked(spec) && (plus.signs != base.signs || minus.signs != base.signs)) {
        ++st.skipped_kink;
        continue;
      }
      // divide by the step actually taken after rounding the perturbed values
      const double numeric = static_cast<double>((plus.loss - minus.loss) / (up - down));
      const double analytic = grad[k];
      if (std::abs(numeric) < 1e-9 && std::abs(analytic) < 1e-9) {
        ++st.skipped_zero;
        continue;
      }
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      ++st.checked;
      if (rel > 1e-5) ++st.over;
      if (rel > st.max_rel) {
        st.max_rel = rel;
        st.worst = fmt::format("{} {}x{} T={} {}[{}] a={:.6e} n={:.6e}", spec.name(), depth, width,
                               steps, name, k, analytic, numeric);
      }
    }
  }
}

GradStats gradient_sweep(double step) {
  GradStats st;
  std::uint64_t seed = 100;
  for (auto [depth, width] : {std::pair<std::size_t, std::size_t>{2, 8}, {4, 16}}) {
    for (std::size_t steps : {3u, 5u}) {
      for (const auto& spec : all_specs()) gradient_case(depth, width, steps, spec, ++seed, step, st);
    }
  }
  return st;
}

Outcome gradient_oracle() {
  const GradStats st = gradient_sweep(1e-5);
  const bool pass = st.max_rel <= 1e-5 && st.max_forward_diff <= 1e-12 && st.checked > 0;
  std::string detail = fmt::format(
      "h=1e-5: max rel err {:.3e}, {} of {} entries over 1e-5 ({} skipped at kinks, {} both ~0); "
      "forward vs oracle {:.1e}; worst: {}",
      st.max_rel, st.over, st.checked, st.skipped_kink, st.skipped_zero, st.max_forward_diff,
      st.worst);
  if (!pass) {
    // Not part of the verdict: separates truncation error of the difference
    // quotient from a wrong analytic gradient.
    const GradStats fine = gradient_sweep(1e-7);
    detail += fmt::format("; cross-check h=1e-7: max rel err {:.3e}", fine.max_rel);
  }
  return {pass, detail};
}

// -------------------------------------------------------------------- LSUV

Outcome lsuv_36x64() {
  double lo = 1e9, hi = -1e9, worst_sync = 0.0;
  std::size_t max_iters = 0;
  for (const auto& spec : all_specs()) {
    StackConfig cfg;
    cfg.depth = 36;
    cfg.width = 64;
    cfg.embedding_dim = 64;
    cfg.vocab_size = 27;
    cfg.activation = spec;
    Rng rng(7);
    Model model = make_model(cfg, rng);
    const Model before = model;
    const auto reports = lsuv_init_stack(model, LsuvConfig{}, rng);
    for (const auto& r : reports) {
      lo = std::min(lo, r.final_variance);
      hi = std::max(hi, r.final_variance);
      max_iters = std::max(max_iters, r.iterations);
    }
    for (std::size_t i = 1; i <= cfg.depth; ++i) {
      const double rw = frobenius_norm(model.layer(i).W) / frobenius_norm(before.layer(i).W);
      const double ru = frobenius_norm(model.layer(i).U) / frobenius_norm(before.layer(i).U);
      worst_sync = std::max(worst_sync, std::abs(rw / ru - 1.0));
    }
  }
  const bool pass = lo >= 0.98 && hi <= 1.02 && worst_sync <= 1e-9;
  return {pass, fmt::format("8 specs: variances in [{:.5f}, {:.5f}], max iterations {}, "
                            "|W ratio / U ratio - 1| <= {:.1e}",
                            lo, hi, max_iters, worst_sync)};
}

// ---------------------------------------------------------------- dynamics

Outcome dynamics_ordering() {
  auto final_stats = [](const ActivationSpec& spec) {
    DynamicsConfig cfg;
    cfg.width = 128;
    cfg.iterations = 48;
    cfg.runs = 50;
    cfg.activation = spec;
    cfg.seed = 42;
    const DynamicsResult r = run_dynamics(cfg);
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (r.rows.size() < 48) return std::pair{inf, inf};
    return std::pair{std::abs(r.rows.back().mean_avg), r.rows.back().var_avg};
  };
  const auto relu = final_stats(ActivationSpec::relu(false));
  const auto brelu = final_stats(ActivationSpec::relu(true));
  const auto elu = final_stats(ActivationSpec::elu(1.0, false));
  const auto belu = final_stats(ActivationSpec::elu(1.0, true));
  const bool pass = brelu.first <= relu.first && brelu.second <= relu.second &&
                    belu.first <= elu.first && belu.second <= elu.second;
  return {pass, fmt::format("iteration 48 |mean|/var: relu {:.4g}/{:.4g} brelu {:.4g}/{:.4g} "
                            "elu {:.4g}/{:.4g} belu {:.4g}/{:.4g}",
                            relu.first, relu.second, brelu.first, brelu.second, elu.first,
                            elu.second, belu.first, belu.second)};
}

// ---------------------------------------------------------- gradient smear

Outcome gradient_smear() {
  const Corpus corpus = make_corpus(synthetic_text(100000, 5), SplitSpec::text8());
  auto lag = [&](bool skips) {
    StackConfig cfg;
    cfg.depth = 12;
    cfg.width = 64;
    cfg.embedding_dim = 64;
    cfg.activation = ActivationSpec::elu(1.0, true);
    cfg.skip_connections = skips;
    cfg.vocab_size = corpus.vocab_size();
    Rng rng = Rng(42).split(0);
    const Model model = initialize_model(cfg, InitConfig{}, rng);
    const GradientFlow flow = probe_gradient_flow(model, corpus.train(), 32, 50, 10);
    return flow.peak_lag(1);
  };
  const std::size_t without = lag(false);
  const std::size_t with = lag(true);
  return {without >= 6 && with <= 2,
          fmt::format("layer-1 peak lag: {} without skips (need >= 6), {} with skips (need <= 2)",
                      without, with)};
}

// ---------------------------------------------------------------- training

struct TrainedRun {
  Model model;
  Corpus corpus;
  TrainProgress progress;
};
std::optional<TrainedRun> g_trained;

Outcome desk_training() {
  const Corpus corpus = make_corpus(synthetic_text(500000, 42), SplitSpec::text8());
  TrainConfig cfg;
  cfg.stack.depth = 8;
  cfg.stack.width = 64;
  cfg.stack.embedding_dim = 64;
  cfg.stack.activation = ActivationSpec::elu(1.0, true);
  cfg.max_epochs = 5;
  const TrainResult r = train(cfg, corpus);
  std::string curve;
  bool decreasing = !r.diverged && r.log.size() == 5;
  for (std::size_t e = 0; e < r.log.size(); ++e) {
    const auto& row = r.log[e];
    curve += row.train_bpc ? fmt::format(" {:.4f}", *row.train_bpc) : " DNC";
    if (e > 0 && (!row.train_bpc || !r.log[e - 1].train_bpc ||
                  !(*row.train_bpc < *r.log[e - 1].train_bpc))) {
      decreasing = false;
    }
  }
  const bool low = !r.log.empty() && r.log.back().train_bpc && *r.log.back().train_bpc < 4.0;
  g_trained = TrainedRun{r.model, corpus, r.progress};
  return {decreasing && low,
          fmt::format("vocab {} (uniform {:.4f} bpc); train bpc per epoch:{}", corpus.vocab_size(),
                      std::log2(double(corpus.vocab_size())), curve)};
}

// ------------------------------------------------------------- determinism

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  if (!fs::exists(dir)) return files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] =
        std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  }
  return files;
}

struct CliRun {
  int code;
  std::string out;
  std::map<std::string, std::string> files;
};

CliRun run_cli(const std::vector<std::string>& args, const fs::path& out_dir) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), snapshot(out_dir)};
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / fmt::format("bprnn-accept-{}", getpid());
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string data = (root / "corpus.txt").string();
  {
    std::ofstream f(data, std::ios::binary);
    f << synthetic_text(60000, 9);
  }
  const std::string config = (root / "config.json").string();
  {
    std::ofstream f(config);
    f << R"({"model": {"depth": 4, "width": 16, "activation": "belu"},
             "dropout": {"p_between": 0.1, "p_recurrent": 0.1, "p_block": 0.2},
             "train": {"max_epochs": 2, "val_every_epochs": 1, "batch_size": 8, "seq_len": 20},
             "dynamics": {"width": 32, "iterations": 12, "runs": 6},
             "probe": {"batch_size": 4, "seq_len": 10, "batches": 2}})";
  }
  const fs::path out = root / "out";
  const std::string ckpt = (out / "best.ckpt").string();
  const std::string probe_out = (root / "probe").string();

  struct Command {
    std::string label;
    std::vector<std::string> a, b;  // b may vary a setting that must not matter
    fs::path dir;
  };
  const std::vector<Command> commands = {
      {"train", {"--seed", "5", "train", "--config", config, "--data", data, "--out", out.string()}, {}, out},
      {"dynamics", {"--seed", "5", "dynamics", "--config", config, "--out", (root / "dyn").string()},
       {"--seed", "5", "--threads", "3", "dynamics", "--config", config, "--out", (root / "dyn").string()},
       root / "dyn"},
      {"lsuv-check", {"--seed", "5", "lsuv-check", "--config", config}, {}, {}},
      {"theorem-check", {"--seed", "5", "theorem-check", "--activation", "belu", "--mu", "2", "--n", "20000"}, {}, {}},
  };
  const std::vector<Command> after_train = {
      {"eval", {"eval", "--ckpt", ckpt, "--data", data, "--split", "validation"}, {}, {}},
      {"probe", {"probe", "--ckpt", ckpt, "--data", data, "--out", probe_out}, {}, probe_out},
  };

  std::vector<std::string> failures;
  std::size_t files_compared = 0;
  auto check = [&](const Command& c) {
    CliRun first{}, second{};
    for (int round = 0; round < 2; ++round) {
      if (!c.dir.empty()) fs::remove_all(c.dir);
      const auto& args = (round == 1 && !c.b.empty()) ? c.b : c.a;
      (round == 0 ? first : second) = run_cli(args, c.dir);
    }
    if (first.code != 0 || second.code != 0) {
      failures.push_back(fmt::format("{} exit {} / {}", c.label, first.code, second.code));
    } else if (first.out != second.out || first.files != second.files) {
      failures.push_back(c.label + " output differs");
    } else if (!c.dir.empty() && first.files.empty()) {
      failures.push_back(c.label + " wrote no files");
    }
    files_compared += first.files.size();
  };
  for (const auto& c : commands) check(c);
  // eval and probe read the checkpoint of the (identical) second train run.
  for (const auto& c : after_train) check(c);
  fs::remove_all(root);
  return {failures.empty(),
          failures.empty()
              ? fmt::format("train, dynamics (1 vs 3 threads), lsuv-check, theorem-check, eval, "
                            "probe: stdout and {} files byte-identical",
                            files_compared)
              : fmt::format("{}", fmt::join(failures, "; "))};
}

// ------------------------------------------------------- checkpoint round trip

Outcome checkpoint_roundtrip() {
  if (!g_trained) {
    // Stand-alone run: a short training run is enough.
    const Corpus corpus = make_corpus(synthetic_text(50000, 3), SplitSpec::text8());
    TrainConfig cfg;
    cfg.stack.depth = 4;
    cfg.stack.width = 16;
    cfg.stack.embedding_dim = 16;
    cfg.batch_size = 16;
    cfg.seq_len = 25;
    cfg.max_epochs = 1;
    const TrainResult r = train(cfg, corpus);
    g_trained = TrainedRun{r.model, corpus, r.progress};
  }
  const auto& run = *g_trained;
  const fs::path path = fs::temp_directory_path() / fmt::format("bprnn-accept-{}.ckpt", getpid());
  save_checkpoint(Checkpoint{run.model, run.corpus.vocab, std::nullopt, run.progress}, path);
  const Checkpoint loaded = load_checkpoint(path);
  std::ifstream f(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  fs::remove(path);

  const double a = evaluate(run.model, run.corpus.test());
  const double b = evaluate(loaded.model, run.corpus.test());
  const bool same_bits = std::memcmp(&a, &b, sizeof a) == 0;
  const bool same_model = loaded.model == run.model;
  const bool same_bytes = serialize_checkpoint(loaded) == bytes;
  return {same_bits && same_model && same_bytes,
          fmt::format("test bpc {} vs {} (bit-identical: {}), tensors equal: {}, re-serialized "
                      "bytes equal: {}",
                      a, b, same_bits, same_model, same_bytes)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"theorem1_bipolar_relu_mean", 10.0, theorem1},
      {"theorem2_bipolar_elu_mean", 10.0, theorem2},
      {"gradient_oracle", 300.0, gradient_oracle},
      {"lsuv_36x64", 60.0, lsuv_36x64},
      {"dynamics_ordering", 60.0, dynamics_ordering},
      {"gradient_smear", 300.0, gradient_smear},
      {"desk_training", 1800.0, desk_training},
      {"cli_determinism", 0.0, cli_determinism},
      {"checkpoint_roundtrip", 0.0, checkpoint_roundtrip},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt::format("{:.1f}s", secs);
    if (c.time_limit_s > 0) {
      timing += fmt::format(" of {:.0f}s", c.time_limit_s);
      if (secs > c.time_limit_s) {
        o.pass = false;
        o.detail += " [over time limit]";
      }
    }
    fmt::print("{} {} ({}): {}\n", o.pass ? "PASS" : "FAIL", c.name, timing, o.detail);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

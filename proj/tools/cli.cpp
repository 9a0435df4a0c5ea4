#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "bprnn/activation.hpp"
#include "bprnn/checkpoint.hpp"
#include "bprnn/config.hpp"
#include "bprnn/corpus.hpp"
#include "bprnn/dynamics.hpp"
#include "bprnn/errors.hpp"
#include "bprnn/gradflow.hpp"
#include "bprnn/lsuv.hpp"
#include "bprnn/random.hpp"
#include "bprnn/trainer.hpp"

namespace bprnn::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::uint64_t seed = 42;
  bool seed_given = false;
  std::size_t threads = 1;

  std::string config;
  std::string out_dir;
  std::string data;
  std::string resume;
  std::string ckpt;
  std::string split = "test";

  std::string activation;
  double mu = 0.0;
  std::size_t n = 1000000;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed_given || !cfg.seed_given) cfg.set_seed(o.seed);
  return cfg;
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir, ec.message()));
  return fs::path(dir);
}

template <class Writer>
void write_text_file(const fs::path& path, Writer&& writer) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  writer(f);
  if (!f) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

int cmd_dynamics(const Options& o, std::ostream& out) {
  const RunConfig run = resolve_config(o);
  DynamicsConfig cfg = run.dynamics_config();
  cfg.threads = o.threads;
  const DynamicsResult result = run_dynamics(cfg);
  const fs::path dir = prepare_out_dir(o.out_dir);
  const fs::path csv = dir / "dynamics.csv";
  write_text_file(csv, [&](std::ostream& f) { write_dynamics_csv(f, result); });
  fmt::print(out, "dynamics activation={} runs={} rows={} diverged_runs={}\n",
             cfg.activation.name(), cfg.runs, result.rows.size(), result.diverged_runs);
  if (!result.rows.empty()) {
    const auto& last = result.rows.back();
    fmt::print(out, "final iteration={} mean_avg={} var_avg={}\n", last.iteration, last.mean_avg,
               last.var_avg);
  }
  fmt::print(out, "wrote {}\n", csv.string());
  return result.truncated ? kDiverged : kOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  RunConfig run = resolve_config(o);
  std::optional<ResumeState> resume;
  std::optional<std::vector<std::uint8_t>> vocab;
  if (!o.resume.empty()) {
    Checkpoint ck = load_checkpoint(o.resume);
    if (!ck.progress) throw ConfigError("resume checkpoint carries no training state");
    vocab = ck.vocab;
    resume = ResumeState{std::move(ck.model), std::move(*ck.progress)};
  }
  const Corpus corpus =
      vocab ? ingest(o.data, run.split, std::span<const std::uint8_t>(*vocab)) : ingest(o.data, run.split);
  run.train.stack.vocab_size = corpus.vocab_size();

  const fs::path dir = prepare_out_dir(o.out_dir);
  write_text_file(dir / "config.json", [&](std::ostream& f) { f << dump_config(run) << '\n'; });

  TrainHooks hooks;
  hooks.on_new_best = [&](const Model& model, const TrainProgress& progress) {
    save_checkpoint(Checkpoint{model, corpus.vocab, run, progress}, dir / "best.ckpt");
  };
  hooks.on_epoch = [&](const TrainLogRow& r) {
    if (r.dnc) {
      fmt::print(out, "epoch={} step={} DNC lr={}\n", r.epoch, r.step, r.lr);
      return;
    }
    fmt::print(out, "epoch={} step={} train_bpc={} val_bpc={} lr={}\n", r.epoch, r.step,
               r.train_bpc ? fmt::format("{}", *r.train_bpc) : "",
               r.val_bpc ? fmt::format("{}", *r.val_bpc) : "", r.lr);
  };

  const TrainResult result = train(run.train, corpus, hooks, std::move(resume));
  write_text_file(dir / "train.csv", [&](std::ostream& f) { write_train_csv(f, result.log); });
  if (!result.lsuv.empty()) {
    write_text_file(dir / "lsuv.csv",
                    [&](std::ostream& f) { write_lsuv_report_csv(f, result.lsuv); });
  }
  if (result.diverged) {
    throw DivergenceError(fmt::format("did not converge: {}", result.divergence_reason), 0, 0);
  }
  if (!result.log.empty()) {
    save_checkpoint(Checkpoint{result.model, corpus.vocab, run, result.progress},
                    dir / "last.ckpt");
  }
  fmt::print(out, "epochs={} steps={} best_val_bpc={}\n", result.progress.epoch,
             result.progress.step,
             result.progress.best_val_bpc ? fmt::format("{}", *result.progress.best_val_bpc) : "");
  return kOk;
}

Corpus corpus_for_checkpoint(const Checkpoint& ck, const std::string& data) {
  const SplitSpec split = ck.config ? ck.config->split : SplitSpec::text8();
  return ingest(data, split, std::span<const std::uint8_t>(ck.vocab));
}

int cmd_eval(const Options& o, std::ostream& out) {
  const SplitName which = parse_split_name(o.split);
  const Checkpoint ck = load_checkpoint(o.ckpt);
  const Corpus corpus = corpus_for_checkpoint(ck, o.data);
  const auto stream = select_split(corpus, which);
  if (stream.size() < 2) {
    throw ConfigError(fmt::format("{} split holds {} symbols, need at least 2", split_name(which),
                                  stream.size()));
  }
  const double bpc = evaluate(ck.model, stream);
  fmt::print(out, "split={} symbols={} bpc={}\n", split_name(which), stream.size(), bpc);
  return kOk;
}

int cmd_probe(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.ckpt);
  ProbeConfig probe = ck.config ? ck.config->probe : ProbeConfig{};
  if (!o.config.empty()) probe = load_config(o.config).probe;
  const Corpus corpus = corpus_for_checkpoint(ck, o.data);
  const GradientFlow flow = probe_gradient_flow(ck.model, select_split(corpus, probe.split),
                                                probe.batch_size, probe.seq_len, probe.batches,
                                                probe.learning_rate);
  const fs::path dir = prepare_out_dir(o.out_dir);
  const fs::path csv = dir / "gradflow.csv";
  write_text_file(csv, [&](std::ostream& f) { write_gradflow_csv(f, flow); });
  for (std::size_t i = 1; i <= flow.layers; ++i) {
    fmt::print(out, "layer={} peak_timestep={} peak_lag={}\n", i, flow.peak_timestep(i),
               flow.peak_lag(i));
  }
  fmt::print(out, "wrote {}\n", csv.string());
  return kOk;
}

int cmd_lsuv_check(const Options& o, std::ostream& out) {
  const RunConfig run = resolve_config(o);
  Rng rng = Rng(run.train.seed).split(0);
  std::vector<LsuvLayerReport> reports;
  initialize_model(run.train.stack, run.train.init, rng, &reports);
  write_lsuv_report_csv(out, reports);
  return kOk;
}

int cmd_theorem_check(const Options& o, std::ostream& out) {
  ActivationSpec spec;
  try {
    spec = ActivationSpec::parse(o.activation);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  if (o.n < 2 || o.n % 2 != 0) throw UsageError("--n must be even and at least 2");
  Rng rng(o.seed);
  const double m = mean_shift_probe(spec, o.mu, o.n, rng);
  // Output entries have standard deviation at most about one, so 4/sqrt(n)
  // is a four-sigma band on the sample mean.
  const double band = 4.0 / std::sqrt(static_cast<double>(o.n));
  std::string claim = "none";
  std::string holds = "n/a";
  std::string expected;
  if (spec.bipolar && (spec.base == ActivationBase::ReLU || spec.base == ActivationBase::LeakyReLU)) {
    const double slope = spec.base == ActivationBase::ReLU ? 0.0 : spec.leaky_slope;
    const double e = 0.5 * (1.0 + slope) * o.mu;
    claim = "mean=0.5*(1+slope)*mu";
    expected = fmt::format(" expected={}", e);
    holds = std::abs(m - e) <= band ? "true" : "false";
  } else if (spec.bipolar) {
    const double bound =
        spec.base == ActivationBase::SELU ? spec.selu_lambda * spec.elu_alpha : spec.elu_alpha;
    claim = "|2*mean-mu|<=alpha";
    expected = fmt::format(" bound={}", bound);
    holds = std::abs(2.0 * m - o.mu) <= bound + 2.0 * band ? "true" : "false";
  }
  fmt::print(out, "activation={} mu={} n={} seed={} mean={}{} claim={} holds={}\n", spec.name(),
             o.mu, o.n, o.seed, m, expected, claim, holds);
  return kOk;
}

struct Failure {
  int code;
  std::string_view kind;
};

Failure classify(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return {kUsage, "usage"};
  if (dynamic_cast<const ConfigError*>(&e)) return {kUsage, "config"};
  if (dynamic_cast<const ParameterError*>(&e)) return {kUsage, "config"};
  if (dynamic_cast<const ShapeError*>(&e)) return {kUsage, "config"};
  if (dynamic_cast<const DivergenceError*>(&e)) return {kDiverged, "divergence"};
  if (dynamic_cast<const NumericError*>(&e)) return {kDiverged, "divergence"};
  if (dynamic_cast<const InitializationError*>(&e)) return {kDiverged, "initialization"};
  if (dynamic_cast<const IngestionError*>(&e)) return {kIo, "ingestion"};
  if (dynamic_cast<const VocabularyError*>(&e)) return {kIo, "vocabulary"};
  if (dynamic_cast<const BadMagicError*>(&e)) return {kIo, "bad-magic"};
  if (dynamic_cast<const UnsupportedVersionError*>(&e)) return {kIo, "unsupported-version"};
  if (dynamic_cast<const PayloadLengthError*>(&e)) return {kIo, "payload-length"};
  if (dynamic_cast<const FormatError*>(&e)) return {kIo, "format"};
  if (dynamic_cast<const IoError*>(&e)) return {kIo, "io"};
  return {kIo, "internal"};
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"bprnn: bipolar activations, recurrent LSUV and deep stacked RNNs", "bprnn"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--seed", o.seed, "Random seed (unsigned 64-bit)")->default_val(42);
  app.add_option("--threads", o.threads, "Worker threads for parallel experiments")
      ->check(CLI::PositiveNumber);

  auto* dyn = app.add_subcommand("dynamics", "Iterate x <- f(W x) and record mean and variance");
  dyn->add_option("--config", o.config)->required();
  dyn->add_option("--out", o.out_dir)->required();

  auto* tr = app.add_subcommand("train", "Train a character-level language model");
  tr->add_option("--config", o.config)->required();
  tr->add_option("--data", o.data)->required();
  tr->add_option("--out", o.out_dir)->required();
  tr->add_option("--resume", o.resume, "Continue from a training checkpoint");

  auto* ev = app.add_subcommand("eval", "Bits per character of a checkpoint on one split");
  ev->add_option("--ckpt", o.ckpt)->required();
  ev->add_option("--data", o.data)->required();
  ev->add_option("--split", o.split, "train, validation or test");

  auto* pr = app.add_subcommand("probe", "Gradient-flow probe of a checkpoint");
  pr->add_option("--ckpt", o.ckpt)->required();
  pr->add_option("--data", o.data)->required();
  pr->add_option("--out", o.out_dir)->required();
  pr->add_option("--config", o.config, "Override the probe section");

  auto* ls = app.add_subcommand("lsuv-check", "Initialize a stack and print per-layer variances");
  ls->add_option("--config", o.config)->required();

  auto* th = app.add_subcommand("theorem-check", "Measure the output mean shift of an activation");
  th->add_option("--activation", o.activation)->required();
  th->add_option("--mu", o.mu)->required();
  th->add_option("--n", o.n)->default_val(1000000);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "error: usage: {}\n", one_line(e.what()));
    return kUsage;
  }
  o.seed_given = app.count("--seed") > 0;

  try {
    if (dyn->parsed()) return cmd_dynamics(o, out);
    if (tr->parsed()) return cmd_train(o, out);
    if (ev->parsed()) return cmd_eval(o, out);
    if (pr->parsed()) return cmd_probe(o, out);
    if (ls->parsed()) return cmd_lsuv_check(o, out);
    if (th->parsed()) return cmd_theorem_check(o, out);
  } catch (const std::exception& e) {
    const Failure f = classify(e);
    fmt::print(err, "error: {}: {}\n", f.kind, one_line(e.what()));
    return f.code;
  }
  fmt::print(err, "error: usage: no subcommand\n");
  return kUsage;
}

}  // namespace bprnn::cli

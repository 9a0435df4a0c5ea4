#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "bprnn/batching.hpp"
#include "bprnn/corpus.hpp"
#include "bprnn/dynamics.hpp"
#include "bprnn/errors.hpp"
#include "bprnn/gradflow.hpp"
#include "bprnn/trainer.hpp"

using namespace bprnn;

namespace {

TrainConfig tiny_train(std::size_t epochs) {
  TrainConfig cfg;
  cfg.stack.depth = 2;
  cfg.stack.width = 16;
  cfg.stack.embedding_dim = 16;
  cfg.batch_size = 8;
  cfg.seq_len = 20;
  cfg.val_every_epochs = 1;
  cfg.max_epochs = epochs;
  cfg.lr = 3e-3;
  return cfg;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("zero weights pin the map at f(0)") {
  Rng rng(1);
  const Tensor2D x1 = sample_gaussian(rng, 2, 1, 0, 1);
  for (ActivationSpec s : {ActivationSpec::relu(true), ActivationSpec::elu(1.0), ActivationSpec::selu(true)}) {
    const MapTrace tr = iterate_map(s, Tensor2D(2, 2, 0.0), x1, 6);
    REQUIRE(tr.means.size() == 6);
    for (std::size_t k = 1; k < 6; ++k) {
      CHECK(tr.means[k] == 0.0);
      CHECK(tr.variances[k] == 0.0);
    }
    CHECK_FALSE(tr.diverged);
  }
}

TEST_CASE("first iterate is the raw gaussian draw") {
  for (ActivationSpec s : {ActivationSpec::relu(), ActivationSpec::relu(true), ActivationSpec::elu(),
                           ActivationSpec::elu(1.0, true)}) {
    DynamicsConfig cfg;
    cfg.activation = s;
    cfg.runs = 1;
    cfg.iterations = 1;
    const DynamicsResult r = run_dynamics(cfg);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].iteration == 1);
    CHECK(std::abs(r.rows[0].var_avg - 1.0) <= 0.3);
    std::ostringstream csv;
    write_dynamics_csv(csv, r);
    CHECK(count_lines(csv.str()) == 2);
    CHECK(csv.str().rfind("iteration,mean_avg,var_avg\n", 0) == 0);
  }
}

TEST_CASE("bipolar relu keeps the mean from running away") {
  DynamicsConfig cfg;
  cfg.activation = ActivationSpec::relu(true);
  const DynamicsResult bipolar = run_dynamics(cfg);
  cfg.activation = ActivationSpec::relu(false);
  const DynamicsResult plain = run_dynamics(cfg);
  REQUIRE(bipolar.rows.size() == 48);
  CHECK(std::abs(bipolar.rows.back().mean_avg) < std::abs(plain.rows.back().mean_avg));
}

TEST_CASE("dynamics results do not depend on the thread count") {
  DynamicsConfig cfg;
  cfg.runs = 6;
  cfg.iterations = 10;
  cfg.width = 32;
  const DynamicsResult one = run_dynamics(cfg);
  cfg.threads = 3;
  const DynamicsResult three = run_dynamics(cfg);
  REQUIRE(one.rows.size() == three.rows.size());
  for (std::size_t k = 0; k < one.rows.size(); ++k) {
    CHECK(one.rows[k].mean_avg == three.rows[k].mean_avg);
    CHECK(one.rows[k].var_avg == three.rows[k].var_avg);
  }
}

TEST_CASE("dynamics config is validated") {
  DynamicsConfig cfg;
  cfg.width = 7;
  CHECK_THROWS_AS(run_dynamics(cfg), ParameterError);
  cfg = DynamicsConfig{};
  cfg.runs = 0;
  CHECK_THROWS_AS(run_dynamics(cfg), ParameterError);
}

TEST_CASE("probe: the final step of the top layer carries the loss") {
  const Corpus corpus = make_corpus(synthetic_text(20000, 3), SplitSpec::text8());
  StackConfig cfg;
  cfg.depth = 4;
  cfg.width = 16;
  cfg.embedding_dim = 16;
  cfg.vocab_size = corpus.vocab_size();
  Rng rng(4);
  const Model m = initialize_model(cfg, InitConfig{}, rng);

  const GradientFlow frozen = probe_gradient_flow(m, corpus.train(), 4, 10, 3, 0.0);
  for (double v : frozen.norms) CHECK(v == 0.0);  // zero head, nothing flows

  const GradientFlow flow = probe_gradient_flow(m, corpus.train(), 4, 10, 3);
  CHECK(flow.at(4, 10) > 0.0);
  CHECK(flow.peak_lag(4) == 0);
  std::ostringstream csv;
  write_gradflow_csv(csv, flow);
  CHECK(count_lines(csv.str()) == 1 + 4 * 10);

  CHECK_THROWS_AS(probe_gradient_flow(m, corpus.train(), 4, 10, 0), ParameterError);
  CHECK_THROWS_AS(probe_gradient_flow(m, corpus.train(), 4, 10, 100000), ConfigError);
}

TEST_CASE("skips pull the layer-1 gradient peak toward the present") {
  const Corpus corpus = make_corpus(synthetic_text(100000, 5), SplitSpec::text8());
  auto lag = [&](bool skips) {
    StackConfig cfg;
    cfg.depth = 12;
    cfg.width = 64;
    cfg.embedding_dim = 64;
    cfg.skip_connections = skips;
    cfg.vocab_size = corpus.vocab_size();
    Rng rng(17);
    const Model m = initialize_model(cfg, InitConfig{}, rng);
    return static_cast<long>(probe_gradient_flow(m, corpus.train(), 32, 50, 10).peak_lag(1));
  };
  CHECK(lag(false) - lag(true) >= 4);
}

TEST_CASE("learning-rate schedule halves per failed validation") {
  TrainConfig cfg;
  cfg.lr = 2e-4;
  CHECK(scheduled_learning_rate(cfg, 0) == 2e-4);
  CHECK(scheduled_learning_rate(cfg, 2) == 2e-4 * 0.25);
  double prev = scheduled_learning_rate(cfg, 0);
  for (std::size_t k = 1; k < 20; ++k) {
    const double lr = scheduled_learning_rate(cfg, k);
    CHECK(lr <= prev);
    CHECK(lr == cfg.lr * std::pow(0.5, double(k)));
    prev = lr;
  }
}

TEST_CASE("train config is validated") {
  TrainConfig cfg = tiny_train(1);
  cfg.lr = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_train(1);
  cfg.lr_decay_factor = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("random crops cover every offset") {
  const std::size_t n = 8 * 20 + 1 + 7;
  const std::size_t slack = crop_slack(n, 8, 20);
  REQUIRE(slack > 1);
  std::set<std::size_t> seen;
  const Rng root(42);
  for (std::size_t e = 1; e <= 100; ++e) {
    Rng rng = root.split(e);
    const std::size_t off = choose_crop_offset(n, 8, 20, rng);
    CHECK(off <= slack);
    seen.insert(off);
  }
  CHECK(seen.size() == slack + 1);
}

TEST_CASE("batches tile the crop without overlap") {
  std::vector<int> text(1000);
  std::iota(text.begin(), text.end(), 0);
  const SequenceBatches b(text, 3, 4, 10);
  CHECK(b.count() > 0);
  std::set<int> inputs;
  for (std::size_t k = 0; k < b.count(); ++k) {
    const auto [in, tgt] = b.get(k);
    for (std::size_t t = 0; t < 10; ++t)
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(tgt.at(t, j) == in.at(t, j) + 1);
        CHECK(inputs.insert(in.at(t, j)).second);
        CHECK(in.at(t, j) >= 3);
      }
  }
}

TEST_CASE("zero epochs: empty log, no checkpoint") {
  const Corpus corpus = make_corpus(synthetic_text(5000, 1), SplitSpec::text8());
  int bests = 0;
  TrainHooks hooks;
  hooks.on_new_best = [&](const Model&, const TrainProgress&) { ++bests; };
  const TrainResult r = train(tiny_train(0), corpus, hooks);
  CHECK(r.log.empty());
  CHECK(bests == 0);
  CHECK_FALSE(r.diverged);
  std::ostringstream csv;
  write_train_csv(csv, r.log);
  CHECK(csv.str() == "epoch,step,train_bpc,val_bpc,lr\n");
}

TEST_CASE("untrained model scores log2 of the vocabulary") {
  std::string text;
  for (int k = 0; k < 40; ++k) text += "the quick brown fox jumps over a lazy dog ";
  const Corpus corpus = make_corpus(text, SplitSpec::text8());
  REQUIRE(corpus.vocab_size() == 27);
  StackConfig cfg;
  cfg.depth = 2;
  cfg.width = 16;
  cfg.embedding_dim = 16;
  cfg.vocab_size = 27;
  Rng rng(3);
  const Model m = initialize_model(cfg, InitConfig{}, rng);
  const double bpc = evaluate(m, corpus.test());
  CHECK(bpc == doctest::Approx(4.7549).epsilon(1e-5));
  CHECK(bpc == evaluate(m, corpus.test()));
  std::vector<int> bad{0, 1, 30};
  CHECK_THROWS_AS(evaluate(m, bad), VocabularyError);
}

TEST_CASE("training lowers the loss and fits its own text best") {
  // tiny training text, held-out text from a different generator seed
  const std::string train_text = synthetic_text(3000, 7);
  const std::string held = synthetic_text(3000, 8);
  const Corpus corpus = make_corpus(train_text + held + held,
                                    SplitSpec::from_counts(train_text.size(), held.size(), held.size()));
  const TrainResult r = train(tiny_train(30), corpus);
  REQUIRE_FALSE(r.diverged);
  REQUIRE(r.log.size() == 30);
  CHECK(*r.log.back().train_bpc < *r.log.front().train_bpc);
  CHECK(evaluate(r.model, corpus.train()) <= evaluate(r.model, corpus.test()));
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  const Corpus corpus = make_corpus(synthetic_text(8000, 2), SplitSpec::text8());
  TrainConfig cfg = tiny_train(4);
  cfg.dropout.p_between = 0.1;
  cfg.dropout.p_recurrent = 0.1;
  cfg.val_every_epochs = 2;
  const TrainResult full = train(cfg, corpus);

  TrainConfig half = cfg;
  half.max_epochs = 2;
  const TrainResult first = train(half, corpus);
  const TrainResult rest = train(cfg, corpus, {}, ResumeState{first.model, first.progress});
  CHECK(rest.model == full.model);
  CHECK(rest.progress.step == full.progress.step);
  CHECK(rest.progress.best_val_bpc == full.progress.best_val_bpc);
  REQUIRE(rest.log.size() == 2);
  CHECK(rest.log.back().train_bpc == full.log.back().train_bpc);
}

TEST_CASE("evaluation ignores the dropout seed") {
  const Corpus corpus = make_corpus(synthetic_text(6000, 3), SplitSpec::text8());
  TrainConfig cfg = tiny_train(1);
  cfg.dropout.p_between = 0.5;
  cfg.dropout.p_recurrent = 0.5;
  cfg.dropout.p_block = 0.5;
  cfg.val_every_epochs = 1;
  // Same init, same training, different dropout streams: validation BPC of
  // each model must not depend on which dropout seed is live at eval time.
  const TrainResult r = train(cfg, corpus);
  REQUIRE_FALSE(r.diverged);
  const double a = evaluate(r.model, corpus.validation());
  Rng other(99);
  (void)sample_masks(cfg.dropout, r.model.config, 10, 2, other);
  CHECK(evaluate(r.model, corpus.validation()) == a);
  REQUIRE(r.log.size() == 1);
  CHECK(*r.log[0].val_bpc == a);
}

TEST_CASE("a run that blows up ends with a DNC record") {
  const Corpus corpus = make_corpus(synthetic_text(8000, 4), SplitSpec::text8());
  TrainConfig cfg = tiny_train(3);
  cfg.stack.activation = ActivationSpec::elu(1.0, false);
  cfg.lr = 1e150;
  const TrainResult r = train(cfg, corpus);
  CHECK(r.diverged);
  REQUIRE_FALSE(r.log.empty());
  CHECK(r.log.back().dnc);
  CHECK_FALSE(r.divergence_reason.empty());
  std::ostringstream csv;
  write_train_csv(csv, r.log);
  CHECK(csv.str().find("DNC") != std::string::npos);
}

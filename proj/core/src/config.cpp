#include "bprnn/config.hpp"

#include <cmath>
#include <set>
#include <type_traits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bprnn/errors.hpp"

namespace bprnn {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object and complains about anything left over.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(fmt::format("'{}' must be an object", path_));
  }

  [[nodiscard]] bool has(const char* key) const { return node_.contains(key); }

  const json* get(const char* key) {
    auto it = node_.find(key);
    if (it == node_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  template <class T>
  void read(const char* key, T& out) {
    const json* v = get(key);
    if (v == nullptr) return;
    const std::string where = path_.empty() ? key : path_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) throw ConfigError(fmt::format("'{}' must be a boolean", where));
      out = v->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_unsigned()) {
        throw ConfigError(fmt::format("'{}' must be a non-negative integer", where));
      }
      out = v->get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) throw ConfigError(fmt::format("'{}' must be a number", where));
      out = v->get<T>();
    } else {
      if (!v->is_string()) throw ConfigError(fmt::format("'{}' must be a string", where));
      out = v->get<std::string>();
    }
  }

  [[nodiscard]] std::string child(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ConfigError(fmt::format("unknown key '{}'", child(it.key().c_str())));
      }
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string base_name(ActivationBase b) {
  switch (b) {
    case ActivationBase::ReLU: return "relu";
    case ActivationBase::LeakyReLU: return "lrelu";
    case ActivationBase::ELU: return "elu";
    case ActivationBase::SELU: return "selu";
  }
  return "relu";
}

ActivationSpec parse_activation(const json& node, const std::string& where) {
  if (node.is_string()) {
    try {
      return ActivationSpec::parse(node.get<std::string>());
    } catch (const ParameterError& e) {
      throw ConfigError(fmt::format("'{}': {}", where, e.what()));
    }
  }
  Section s(node, where);
  std::string base = "relu";
  s.read("base", base);
  ActivationSpec spec;
  if (base == "relu") {
    spec = ActivationSpec::relu();
  } else if (base == "lrelu") {
    spec = ActivationSpec::leaky_relu();
  } else if (base == "elu") {
    spec = ActivationSpec::elu();
  } else if (base == "selu") {
    spec = ActivationSpec::selu();
  } else {
    throw ConfigError(fmt::format("'{}.base': unknown activation '{}'", where, base));
  }
  s.read("bipolar", spec.bipolar);
  s.read("alpha", spec.elu_alpha);
  s.read("slope", spec.leaky_slope);
  s.read("lambda", spec.selu_lambda);
  s.finish();
  return spec;
}

json activation_json(const ActivationSpec& a) {
  return json{{"base", base_name(a.base)},
              {"bipolar", a.bipolar},
              {"alpha", a.elu_alpha},
              {"slope", a.leaky_slope},
              {"lambda", a.selu_lambda}};
}

StackConfig parse_stack(const json& node, const std::string& where) {
  StackConfig st;
  st.vocab_size = kDefaultVocabSize;
  Section s(node, where);
  s.read("depth", st.depth);
  s.read("width", st.width);
  st.embedding_dim = st.width;
  if (const json* a = s.get("activation")) st.activation = parse_activation(*a, s.child("activation"));
  s.read("skip_connections", st.skip_connections);
  s.read("skip_period", st.skip_period);
  s.read("skip_scale", st.skip_scale);
  s.read("embedding_dim", st.embedding_dim);
  s.read("vocab_size", st.vocab_size);
  s.finish();
  return st;
}

json stack_json(const StackConfig& st) {
  return json{{"depth", st.depth},
              {"width", st.width},
              {"activation", activation_json(st.activation)},
              {"skip_connections", st.skip_connections},
              {"skip_period", st.skip_period},
              {"skip_scale", st.skip_scale},
              {"embedding_dim", st.embedding_dim},
              {"vocab_size", st.vocab_size}};
}

void parse_init(const json& node, InitConfig& init) {
  Section s(node, "init");
  s.read("target_variance", init.lsuv.target_variance);
  s.read("tolerance", init.lsuv.tolerance);
  s.read("max_iterations", init.lsuv.max_iterations);
  s.read("probe_batch", init.lsuv.probe_batch);
  s.read("measure_before_skip", init.lsuv.measure_before_skip);
  std::string update;
  s.read("update", update);
  if (update == "standard") {
    init.lsuv.update = LsuvConfig::Update::Standard;
  } else if (update == "skip_compensated") {
    init.lsuv.update = LsuvConfig::Update::SkipCompensated;
  } else if (!update.empty()) {
    throw ConfigError(fmt::format("'init.update': unknown value '{}'", update));
  }
  s.read("gamma", init.gamma);
  std::string pre;
  s.read("pre_init", pre);
  if (pre == "gaussian") {
    init.pre_init = PreInit::Gaussian;
  } else if (pre == "orthonormal") {
    init.pre_init = PreInit::Orthonormal;
  } else if (!pre.empty()) {
    throw ConfigError(fmt::format("'init.pre_init': unknown value '{}'", pre));
  }
  s.finish();
}

json init_json(const InitConfig& init) {
  return json{
      {"target_variance", init.lsuv.target_variance},
      {"tolerance", init.lsuv.tolerance},
      {"max_iterations", init.lsuv.max_iterations},
      {"probe_batch", init.lsuv.probe_batch},
      {"measure_before_skip", init.lsuv.measure_before_skip},
      {"update",
       init.lsuv.update == LsuvConfig::Update::Standard ? "standard" : "skip_compensated"},
      {"gamma", init.gamma},
      {"pre_init", init.pre_init == PreInit::Gaussian ? "gaussian" : "orthonormal"}};
}

void parse_dropout(const json& node, DropoutConfig& d) {
  Section s(node, "dropout");
  s.read("p_between", d.p_between);
  s.read("p_recurrent", d.p_recurrent);
  s.read("p_block", d.p_block);
  s.read("block_identity", d.block_identity);
  s.read("block_freeze", d.block_freeze);
  s.finish();
}

json dropout_json(const DropoutConfig& d) {
  return json{{"p_between", d.p_between},
              {"p_recurrent", d.p_recurrent},
              {"p_block", d.p_block},
              {"block_identity", d.block_identity},
              {"block_freeze", d.block_freeze}};
}

void parse_train(const json& node, TrainConfig& t) {
  Section s(node, "train");
  s.read("lr", t.lr);
  s.read("batch_size", t.batch_size);
  s.read("seq_len", t.seq_len);
  s.read("val_every_epochs", t.val_every_epochs);
  s.read("lr_decay_factor", t.lr_decay_factor);
  s.read("max_epochs", t.max_epochs);
  s.read("improvement_tolerance", t.improvement_tolerance);
  s.finish();
}

json train_json(const TrainConfig& t) {
  return json{{"lr", t.lr},
              {"batch_size", t.batch_size},
              {"seq_len", t.seq_len},
              {"val_every_epochs", t.val_every_epochs},
              {"lr_decay_factor", t.lr_decay_factor},
              {"max_epochs", t.max_epochs},
              {"improvement_tolerance", t.improvement_tolerance}};
}

template <class T>
std::array<T, 3> read_triple(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(fmt::format("'{}' must be an array of three values", where));
  }
  std::array<T, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    const json& e = v[i];
    if constexpr (std::is_same_v<T, double>) {
      if (!e.is_number()) throw ConfigError(fmt::format("'{}' entries must be numbers", where));
      out[i] = e.get<double>();
    } else if constexpr (std::is_same_v<T, std::size_t>) {
      if (!e.is_number_unsigned()) {
        throw ConfigError(fmt::format("'{}' entries must be non-negative integers", where));
      }
      out[i] = e.get<std::size_t>();
    } else {
      if (!e.is_string()) throw ConfigError(fmt::format("'{}' entries must be strings", where));
      out[i] = e.get<std::string>();
    }
  }
  return out;
}

SplitSpec parse_data(const json& node) {
  Section s(node, "data");
  const int kinds = int(s.has("fractions")) + int(s.has("counts")) + int(s.has("files"));
  if (kinds > 1) throw ConfigError("'data' takes only one of fractions, counts, files");
  SplitSpec split = SplitSpec::text8();
  if (const json* v = s.get("fractions")) {
    split.kind = SplitSpec::Kind::Fractions;
    split.fractions = read_triple<double>(*v, "data.fractions");
  } else if (const json* v = s.get("counts")) {
    split.kind = SplitSpec::Kind::Counts;
    split.counts = read_triple<std::size_t>(*v, "data.counts");
  } else if (const json* v = s.get("files")) {
    const auto names = read_triple<std::string>(*v, "data.files");
    split = SplitSpec::from_files(names[0], names[1], names[2]);
  }
  s.finish();
  split.validate();
  return split;
}

json data_json(const SplitSpec& split) {
  switch (split.kind) {
    case SplitSpec::Kind::Fractions:
      return json{{"fractions", split.fractions}};
    case SplitSpec::Kind::Counts:
      return json{{"counts", split.counts}};
    case SplitSpec::Kind::Files:
      return json{{"files",
                   {split.files[0].string(), split.files[1].string(), split.files[2].string()}}};
  }
  return json::object();
}

void parse_dynamics(const json& node, DynamicsConfig& d) {
  Section s(node, "dynamics");
  s.read("width", d.width);
  s.read("iterations", d.iterations);
  s.read("runs", d.runs);
  if (const json* a = s.get("activation")) d.activation = parse_activation(*a, "dynamics.activation");
  s.finish();
}

json dynamics_json(const DynamicsConfig& d) {
  return json{{"width", d.width},
              {"iterations", d.iterations},
              {"runs", d.runs},
              {"activation", activation_json(d.activation)}};
}

void parse_probe(const json& node, ProbeConfig& p) {
  Section s(node, "probe");
  s.read("batch_size", p.batch_size);
  s.read("seq_len", p.seq_len);
  s.read("batches", p.batches);
  s.read("learning_rate", p.learning_rate);
  std::string split;
  s.read("split", split);
  if (!split.empty()) {
    try {
      p.split = parse_split_name(split);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("'probe.split': {}", e.what()));
    }
  }
  s.finish();
  if (p.batch_size == 0 || p.seq_len == 0 || p.batches == 0) {
    throw ConfigError("probe batch_size, seq_len and batches must be positive");
  }
  if (!(p.learning_rate >= 0.0) || !std::isfinite(p.learning_rate)) {
    throw ConfigError(fmt::format("'probe.learning_rate' must be >= 0, got {}", p.learning_rate));
  }
}

json probe_json(const ProbeConfig& p) {
  return json{{"batch_size", p.batch_size},
              {"seq_len", p.seq_len},
              {"batches", p.batches},
              {"learning_rate", p.learning_rate},
              {"split", std::string(split_name(p.split))}};
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("invalid JSON: {}", e.what()));
  }
}

// Numeric range problems found by the typed validators are configuration errors here.
template <class F>
void as_config_error(F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

SplitName parse_split_name(std::string_view name) {
  if (name == "train") return SplitName::Train;
  if (name == "validation" || name == "val") return SplitName::Validation;
  if (name == "test") return SplitName::Test;
  throw ConfigError(fmt::format("unknown split '{}' (train, validation, test)", name));
}

std::string_view split_name(SplitName s) noexcept {
  switch (s) {
    case SplitName::Train: return "train";
    case SplitName::Validation: return "validation";
    case SplitName::Test: return "test";
  }
  return "test";
}

std::span<const int> select_split(const Corpus& corpus, SplitName s) {
  switch (s) {
    case SplitName::Train: return corpus.train();
    case SplitName::Validation: return corpus.validation();
    case SplitName::Test: return corpus.test();
  }
  return corpus.test();
}

DynamicsConfig RunConfig::dynamics_config() const {
  DynamicsConfig d = dynamics;
  d.lsuv = train.init.lsuv;
  d.seed = train.seed;
  return d;
}

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  dynamics.seed = seed;
  seed_given = true;
}

RunConfig parse_config(std::string_view json_text) {
  const json doc = parse_document(json_text);
  RunConfig cfg;
  cfg.train.stack.vocab_size = kDefaultVocabSize;
  as_config_error([&] {
    Section s(doc, "");
    if (const json* v = s.get("model")) cfg.train.stack = parse_stack(*v, "model");
    if (const json* v = s.get("init")) parse_init(*v, cfg.train.init);
    if (const json* v = s.get("dropout")) parse_dropout(*v, cfg.train.dropout);
    if (const json* v = s.get("train")) parse_train(*v, cfg.train);
    if (const json* v = s.get("data")) cfg.split = parse_data(*v);
    if (const json* v = s.get("dynamics")) parse_dynamics(*v, cfg.dynamics);
    if (const json* v = s.get("probe")) parse_probe(*v, cfg.probe);
    if (s.has("seed")) {
      std::uint64_t seed = 0;
      s.read("seed", seed);
      cfg.set_seed(seed);
    }
    s.finish();
    cfg.train.validate();
    cfg.dynamics_config().validate();
  });
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IngestionError& e) {
    throw IoError(fmt::format("cannot read config: {}", e.what()));
  }
  return parse_config(text);
}

std::string dump_config(const RunConfig& cfg, int indent) {
  json doc{{"seed", cfg.train.seed},
           {"model", stack_json(cfg.train.stack)},
           {"init", init_json(cfg.train.init)},
           {"dropout", dropout_json(cfg.train.dropout)},
           {"train", train_json(cfg.train)},
           {"data", data_json(cfg.split)},
           {"dynamics", dynamics_json(cfg.dynamics)},
           {"probe", probe_json(cfg.probe)}};
  return doc.dump(indent);
}

std::string dump_stack_config(const StackConfig& stack) { return stack_json(stack).dump(); }

StackConfig parse_stack_config(std::string_view json_text) {
  StackConfig st;
  as_config_error([&] {
    st = parse_stack(parse_document(json_text), "model");
    st.validate();
  });
  return st;
}

}  // namespace bprnn

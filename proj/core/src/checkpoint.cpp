#include "bprnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bprnn/errors.hpp"

namespace bprnn {

using nlohmann::json;

namespace {

constexpr std::size_t kHeaderBytes = 4 + 4 + 8;

template <class U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <class U>
U get_le(std::string_view in, std::size_t at) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return value;
}

struct NamedTensor {
  std::string name;
  const Tensor2D* tensor;
};

std::vector<NamedTensor> model_tensors(const Model& m) {
  std::vector<NamedTensor> out;
  for (std::size_t i = 1; i <= m.layers.size(); ++i) {
    const auto& l = m.layer(i);
    out.push_back({fmt::format("layer{}.W", i), &l.W});
    out.push_back({fmt::format("layer{}.U", i), &l.U});
    out.push_back({fmt::format("layer{}.b", i), &l.b});
  }
  out.push_back({"head.V", &m.head.V});
  out.push_back({"head.c", &m.head.c});
  out.push_back({"head.embedding", &m.head.embedding});
  return out;
}

json progress_json(const TrainProgress& p) {
  return json{{"epoch", p.epoch},
              {"step", p.step},
              {"lr_decays", p.lr_decays},
              {"best_val_bpc", p.best_val_bpc ? json(*p.best_val_bpc) : json(nullptr)},
              {"adam",
               {{"beta1", p.adam.beta1},
                {"beta2", p.adam.beta2},
                {"epsilon", p.adam.epsilon},
                {"step", p.adam.step}}}};
}

template <class T>
T field(const json& obj, const char* key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw MetadataError(fmt::format("metadata field '{}': {}", key, e.what()));
  }
}

TrainProgress parse_progress(const json& j) {
  TrainProgress p;
  p.epoch = field<std::size_t>(j, "epoch");
  p.step = field<std::size_t>(j, "step");
  p.lr_decays = field<std::size_t>(j, "lr_decays");
  const json& best = j.at("best_val_bpc");
  if (!best.is_null()) p.best_val_bpc = best.get<double>();
  const json& a = j.at("adam");
  p.adam.beta1 = field<double>(a, "beta1");
  p.adam.beta2 = field<double>(a, "beta2");
  p.adam.epsilon = field<double>(a, "epsilon");
  p.adam.step = field<std::uint64_t>(a, "step");
  return p;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  ckpt.model.validate();
  std::vector<NamedTensor> tensors = model_tensors(ckpt.model);
  if (ckpt.progress) {
    const auto& adam = ckpt.progress->adam;
    for (std::size_t k = 0; k < adam.m.size(); ++k) {
      tensors.push_back({fmt::format("adam.m.{}", k), &adam.m[k]});
    }
    for (std::size_t k = 0; k < adam.v.size(); ++k) {
      tensors.push_back({fmt::format("adam.v.{}", k), &adam.v[k]});
    }
  }

  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    manifest.push_back(
        {{"name", t.name}, {"rows", t.tensor->rows()}, {"cols", t.tensor->cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.tensor->size()) * 8;
  }

  json meta{{"model", json::parse(dump_stack_config(ckpt.model.config))},
            {"vocab", ckpt.vocab},
            {"tensors", manifest}};
  if (ckpt.config) meta["config"] = json::parse(dump_config(*ckpt.config, -1));
  if (ckpt.progress) meta["progress"] = progress_json(*ckpt.progress);
  const std::string meta_text = meta.dump();

  std::string out;
  out.reserve(kHeaderBytes + meta_text.size() + offset);
  out.append(kCheckpointMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, meta_text.size());
  out.append(meta_text);
  for (const auto& t : tensors) {
    for (double v : t.tensor->values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() || bytes.substr(0, 4) != kCheckpointMagic) {
    throw BadMagicError("bad magic: not a BPRN checkpoint");
  }
  if (bytes.size() < kHeaderBytes) throw MetadataError("truncated header");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw UnsupportedVersionError(
        fmt::format("unsupported checkpoint version {} (expected {})", version, kCheckpointVersion));
  }
  const auto meta_len = get_le<std::uint64_t>(bytes, 8);
  if (meta_len > bytes.size() - kHeaderBytes) {
    throw MetadataError(fmt::format("truncated metadata: header declares {} bytes, {} present",
                                    meta_len, bytes.size() - kHeaderBytes));
  }
  const std::string_view payload = bytes.substr(kHeaderBytes + meta_len);

  json meta;
  try {
    meta = json::parse(bytes.substr(kHeaderBytes, meta_len));
  } catch (const json::parse_error& e) {
    throw MetadataError(fmt::format("metadata is not valid JSON: {}", e.what()));
  }
  if (!meta.is_object() || !meta.contains("model") || !meta.contains("tensors") ||
      !meta.contains("vocab")) {
    throw MetadataError("metadata lacks model, vocab or tensors");
  }

  Checkpoint ckpt;
  StackConfig stack;
  try {
    stack = parse_stack_config(meta.at("model").dump());
  } catch (const ConfigError& e) {
    throw MetadataError(fmt::format("metadata model: {}", e.what()));
  }
  ckpt.vocab = field<std::vector<std::uint8_t>>(meta, "vocab");
  if (ckpt.vocab.size() != stack.vocab_size) {
    throw MetadataError(fmt::format("vocab has {} entries, model expects {}", ckpt.vocab.size(),
                                    stack.vocab_size));
  }
  if (meta.contains("config")) {
    try {
      ckpt.config = parse_config(meta.at("config").dump());
    } catch (const ConfigError& e) {
      throw MetadataError(fmt::format("metadata config: {}", e.what()));
    }
  }
  if (meta.contains("progress")) {
    try {
      ckpt.progress = parse_progress(meta.at("progress"));
    } catch (const json::exception& e) {
      throw MetadataError(fmt::format("metadata progress: {}", e.what()));
    }
  }

  // Shapes come from a freshly built model of the same architecture.
  Rng dummy(0);
  ckpt.model = make_model(stack, dummy);
  std::vector<Tensor2D*> targets;
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= stack.depth; ++i) {
    auto& l = ckpt.model.layer(i);
    for (auto [suffix, t] : {std::pair{"W", &l.W}, std::pair{"U", &l.U}, std::pair{"b", &l.b}}) {
      names.push_back(fmt::format("layer{}.{}", i, suffix));
      targets.push_back(t);
    }
  }
  names.insert(names.end(), {"head.V", "head.c", "head.embedding"});
  targets.insert(targets.end(), {&ckpt.model.head.V, &ckpt.model.head.c, &ckpt.model.head.embedding});
  if (ckpt.progress) {
    ckpt.progress->adam.m.clear();
    ckpt.progress->adam.v.clear();
    const auto params = trainable_tensors(ckpt.model);
    for (const Tensor2D* p : params) ckpt.progress->adam.m.emplace_back(p->rows(), p->cols());
    for (const Tensor2D* p : params) ckpt.progress->adam.v.emplace_back(p->rows(), p->cols());
    for (std::size_t k = 0; k < params.size(); ++k) {
      names.push_back(fmt::format("adam.m.{}", k));
      targets.push_back(&ckpt.progress->adam.m[k]);
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      names.push_back(fmt::format("adam.v.{}", k));
      targets.push_back(&ckpt.progress->adam.v[k]);
    }
  }

  const json& manifest = meta.at("tensors");
  if (!manifest.is_array() || manifest.size() != targets.size()) {
    throw MetadataError(fmt::format("manifest lists {} tensors, expected {}",
                                    manifest.is_array() ? manifest.size() : 0, targets.size()));
  }
  std::uint64_t expected_offset = 0;
  std::vector<std::uint64_t> offsets;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const json& e = manifest[k];
    const auto name = field<std::string>(e, "name");
    const auto rows = field<std::size_t>(e, "rows");
    const auto cols = field<std::size_t>(e, "cols");
    const auto off = field<std::uint64_t>(e, "offset");
    if (name != names[k]) {
      throw MetadataError(fmt::format("manifest entry {} is '{}', expected '{}'", k, name, names[k]));
    }
    if (rows != targets[k]->rows() || cols != targets[k]->cols()) {
      throw MetadataError(fmt::format("tensor '{}' is {}x{}, expected {}", name, rows, cols,
                                      targets[k]->shape_string()));
    }
    if (off != expected_offset) {
      throw MetadataError(fmt::format("tensor '{}' offset {} overlaps or leaves a gap (expected {})",
                                      name, off, expected_offset));
    }
    offsets.push_back(off);
    expected_offset += static_cast<std::uint64_t>(rows) * cols * 8;
  }
  if (payload.size() != expected_offset) {
    throw PayloadLengthError(fmt::format("payload length mismatch: expected {} bytes, found {}",
                                         expected_offset, payload.size()));
  }
  for (std::size_t k = 0; k < targets.size(); ++k) {
    auto vals = targets[k]->values();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      vals[j] = std::bit_cast<double>(get_le<std::uint64_t>(payload, offsets[k] + 8 * j));
    }
  }
  try {
    ckpt.model.validate();
  } catch (const Error& e) {
    throw MetadataError(fmt::format("checkpoint tensors are invalid: {}", e.what()));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(fmt::format("write to '{}' failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(fmt::format("cannot move checkpoint to '{}': {}", path.string(), ec.message()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open checkpoint '{}'", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace bprnn

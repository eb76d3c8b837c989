#include "ubert/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ubert/errors.hpp"

namespace ubert {
namespace {

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const char* what) {
  const auto n = get<std::uint32_t>(in, what);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw FormatError(std::string("checkpoint truncated in ") + what);
  return s;
}

}  // namespace

void write_parameters(std::ostream& out, const std::vector<const Parameter*>& params) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    put_string(out, p->name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape()) put<std::uint64_t>(out, d);
    for (double v : p->value.values()) put<double>(out, v);
  }
}

std::vector<Parameter> read_parameters(std::istream& in) {
  const auto count = get<std::uint32_t>(in, "parameter count");
  std::vector<Parameter> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(in, "parameter name");
    const auto rank = get<std::uint32_t>(in, "parameter rank");
    if (rank > 8) throw FormatError("parameter '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get<std::uint64_t>(in, "parameter dims"));
      n *= d;
    }
    std::vector<double> values(n);
    for (double& v : values) v = get<double>(in, "parameter values");
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

void save_checkpoint(std::ostream& out, const UbertModel& model, const Vocabulary& vocab) {
  const ModelConfig& c = model.config();
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  for (std::uint64_t v : {std::uint64_t(c.vocab_size), std::uint64_t(c.hidden_dim), std::uint64_t(c.ffn_dim),
                          std::uint64_t(c.encoder_layers), std::uint64_t(c.encoder_heads),
                          std::uint64_t(c.max_len), c.seed}) {
    put<std::uint64_t>(out, v);
  }
  put<std::uint8_t>(out, c.linear_span_ffn ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(vocab.size()));
  for (const std::string& e : vocab.entries()) put_string(out, e);
  write_parameters(out, model.parameters());
}

void save_checkpoint(const std::filesystem::path& path, const UbertModel& model, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  save_checkpoint(out, model, vocab);
  if (!out) throw ValidationError("failed writing " + path.string());
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.vocab_size = get<std::uint64_t>(in, "config");
  c.hidden_dim = get<std::uint64_t>(in, "config");
  c.ffn_dim = get<std::uint64_t>(in, "config");
  c.encoder_layers = get<std::uint64_t>(in, "config");
  c.encoder_heads = get<std::uint64_t>(in, "config");
  c.max_len = get<std::uint64_t>(in, "config");
  c.seed = get<std::uint64_t>(in, "config");
  c.linear_span_ffn = get<std::uint8_t>(in, "config") != 0;

  const auto vocab_count = get<std::uint32_t>(in, "vocabulary size");
  std::vector<std::string> entries;
  entries.reserve(vocab_count);
  for (std::uint32_t i = 0; i < vocab_count; ++i) entries.push_back(get_string(in, "vocabulary entry"));

  Checkpoint ck;
  ck.vocab = Vocabulary(std::move(entries));
  ck.model = std::make_unique<UbertModel>(c);
  std::vector<Parameter> stored = read_parameters(in);
  std::vector<Parameter*> params = ck.model->parameters();
  if (stored.size() != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(stored.size()) + " parameters, model expects " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (stored[i].name != params[i]->name || stored[i].value.shape() != params[i]->value.shape()) {
      throw FormatError("parameter '" + stored[i].name + "' " + shape_string(stored[i].value.shape()) +
                        " does not match model parameter '" + params[i]->name + "' " +
                        shape_string(params[i]->value.shape()));
    }
    params[i]->value = std::move(stored[i].value);
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace ubert

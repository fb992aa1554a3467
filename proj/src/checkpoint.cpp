#include "biastracer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "biastracer/error.hpp"

namespace bt {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

constexpr char kMagic[8] = {'B', 'T', 'C', 'K', 'P', 'T', 0, 0};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(ErrorCode::Io, "truncated checkpoint");
  return v;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 26)) throw Error(ErrorCode::Io, "corrupt checkpoint string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error(ErrorCode::Io, "truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path.string());
  const auto& c = ckpt.params.config;
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  for (int v : {c.n_layers, c.d_model, c.n_heads, c.d_ff, c.vocab_size, c.max_len}) {
    put<std::int32_t>(out, v);
  }
  put<std::uint64_t>(out, c.seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.vocab.size()));
  for (const auto& tok : ckpt.vocab.tokens()) put_string(out, tok);
  const auto tensors = ckpt.params.tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, data] : tensors) {
    put_string(out, name);
    put<std::uint64_t>(out, data.size());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  put_string(out, ckpt.metadata_json);
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::Io, path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::Io, "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.n_layers = get<std::int32_t>(in);
  c.d_model = get<std::int32_t>(in);
  c.n_heads = get<std::int32_t>(in);
  c.d_ff = get<std::int32_t>(in);
  c.vocab_size = get<std::int32_t>(in);
  c.max_len = get<std::int32_t>(in);
  c.seed = get<std::uint64_t>(in);
  c.validate();
  const auto n_vocab = get<std::uint32_t>(in);
  std::vector<std::string> tokens;
  tokens.reserve(n_vocab);
  for (std::uint32_t i = 0; i < n_vocab; ++i) tokens.push_back(get_string(in));
  Checkpoint ckpt{ModelParams::zeros(c), Vocab(std::move(tokens)), {}};
  if (static_cast<int>(ckpt.vocab.size()) != c.vocab_size) {
    throw Error(ErrorCode::Io, "checkpoint vocabulary size disagrees with its config");
  }
  auto tensors = ckpt.params.tensors();
  const auto n_tensors = get<std::uint32_t>(in);
  if (n_tensors != tensors.size()) throw Error(ErrorCode::Io, "checkpoint tensor count mismatch");
  for (auto& [name, data] : tensors) {
    const auto stored = get_string(in);
    const auto count = get<std::uint64_t>(in);
    if (stored != name || count != data.size()) {
      throw Error(ErrorCode::Io, "checkpoint tensor '" + stored + "' does not match '" + name + "'");
    }
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw Error(ErrorCode::Io, "truncated checkpoint");
  }
  ckpt.metadata_json = get_string(in);
  return ckpt;
}

}  // namespace bt

// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout (little-endian):
//   magic "SSDK" | version u32 | config digest u64 (FNV-1a over the config
//   text) | config length u32 | config text | array count u32 |
//   per array: name length u32, name, rank u32, dims u64[rank], f64 data |
//   epoch u32 | dev loss f64

#include <cstring>
#include <fstream>

#include "ssdkan/harness.hpp"

namespace ssdkan {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'D', 'K'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const char* field) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != sizeof(T)) {
    throw IoError(std::string("checkpoint: truncated while reading ") + field);
  }
  return v;
}

}  // namespace

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, fnv1a64(ckpt.config_text));
  put(out, static_cast<uint32_t>(ckpt.config_text.size()));
  out.write(ckpt.config_text.data(),
            static_cast<std::streamsize>(ckpt.config_text.size()));
  put(out, static_cast<uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, tensor] : ckpt.arrays) {
    put(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& shape = tensor.shape();
    put(out, static_cast<uint32_t>(shape.size()));
    for (int64_t d : shape) put(out, static_cast<uint64_t>(d));
    auto data = tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  put(out, ckpt.epoch);
  put(out, ckpt.dev_loss);
  if (!out) throw IoError("checkpoint: write failed on '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("checkpoint '" + path.string() + "': bad magic");
  }
  const auto version = take<uint32_t>(in, "version");
  if (version != kVersion) {
    throw IoError("checkpoint '" + path.string() + "': unsupported version " +
                  std::to_string(version));
  }
  const auto digest = take<uint64_t>(in, "config digest");
  const auto config_len = take<uint32_t>(in, "config length");
  Checkpoint ckpt;
  ckpt.config_text.resize(config_len);
  in.read(ckpt.config_text.data(), config_len);
  if (in.gcount() != static_cast<std::streamsize>(config_len)) {
    throw IoError("checkpoint: truncated while reading config text");
  }
  if (fnv1a64(ckpt.config_text) != digest) {
    throw IoError("checkpoint '" + path.string() + "': config digest mismatch");
  }
  const auto n_arrays = take<uint32_t>(in, "array count");
  ckpt.arrays.reserve(n_arrays);
  for (uint32_t i = 0; i < n_arrays; ++i) {
    const auto name_len = take<uint32_t>(in, "array name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw IoError("checkpoint: truncated while reading array name");
    }
    const auto rank = take<uint32_t>(in, "array rank");
    Shape shape(rank);
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int64_t>(take<uint64_t>(in, "array dimension"));
      numel *= shape[d];
    }
    if (numel < 1 || numel > (1ll << 32)) {
      throw IoError("checkpoint '" + path.string() + "': implausible array '" +
                    name + "'");
    }
    std::vector<double> data(numel);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (in.gcount() !=
        static_cast<std::streamsize>(data.size() * sizeof(double))) {
      throw IoError("checkpoint: truncated while reading array '" + name + "'");
    }
    ckpt.arrays.emplace_back(std::move(name),
                             Tensor::from_data(shape, std::move(data)));
  }
  ckpt.epoch = take<uint32_t>(in, "epoch");
  ckpt.dev_loss = take<double>(in, "dev loss");
  return ckpt;
}

}  // namespace ssdkan

// src/nn/checkpoint.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "notegate/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace notegate::nn {

namespace {

constexpr char kMagic[4] = {'N', 'G', 'C', 'K'};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const std::filesystem::path& path) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw DataError("truncated checkpoint: " + path.string());
  return v;
}

}  // namespace

const Checkpoint::NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f.write(kMagic, 4);
  write_pod(f, ck.version);
  const std::string meta = ck.metadata.dump();
  write_pod(f, static_cast<std::uint32_t>(meta.size()));
  f.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  write_pod(f, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    write_pod(f, static_cast<std::uint32_t>(t.name.size()));
    f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod(f, static_cast<std::uint8_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) write_pod(f, d);
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!f) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for reading: " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not an NGCK checkpoint (bad magic): " + path.string());
  Checkpoint ck;
  ck.version = read_pod<std::uint16_t>(f, path);
  if (ck.version != Checkpoint::kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(ck.version) +
                    " (supported: " + std::to_string(Checkpoint::kVersion) +
                    "): " + path.string());
  const auto meta_len = read_pod<std::uint32_t>(f, path);
  std::string meta(meta_len, '\0');
  f.read(meta.data(), meta_len);
  if (!f) throw DataError("truncated checkpoint: " + path.string());
  try {
    ck.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("bad checkpoint metadata in " + path.string() + ": " + e.what());
  }
  const auto count = read_pod<std::uint32_t>(f, path);
  ck.tensors.resize(count);
  for (auto& t : ck.tensors) {
    const auto name_len = read_pod<std::uint32_t>(f, path);
    t.name.resize(name_len);
    f.read(t.name.data(), name_len);
    const auto ndim = read_pod<std::uint8_t>(f, path);
    t.dims.resize(ndim);
    std::size_t n = 1;
    for (auto& d : t.dims) {
      d = read_pod<std::uint32_t>(f, path);
      n *= d;
    }
    if (ndim == 0) n = 0;
    t.data.resize(n);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(n * sizeof(float)));
    if (!f) throw DataError("truncated checkpoint: " + path.string());
  }
  return ck;
}

}  // namespace notegate::nn

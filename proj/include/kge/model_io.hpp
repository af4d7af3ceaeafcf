// Copyright 2026 The KGE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary model persistence.
//
// Layout (all integers and floats little-endian):
//   "KGEM"  u32 version  u8 task  u32 dim  u64 seed
//   u32 vocab_count  { str name  u32 n  { str token }* }*
//   u32 meta_count   { str key  str value }*
//   matrix input, matrix output   where matrix = u64 rows, u32 cols, f32*
//   str = u32 byte length + UTF-8 bytes

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kge/embedding.hpp"
#include "kge/kbc.hpp"

namespace kge {

inline constexpr std::array<char, 4> kModelMagic = {'K', 'G', 'E', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

class ModelFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagicError : public ModelFileError {
 public:
  BadMagicError() : ModelFileError("not a model file (bad magic)") {}
};
class VersionError : public ModelFileError {
 public:
  explicit VersionError(std::uint32_t v)
      : ModelFileError("unsupported model file version " + std::to_string(v)) {}
};
class TruncatedError : public ModelFileError {
 public:
  TruncatedError() : ModelFileError("model file is truncated") {}
};

struct ModelFile {
  Task task = Task::kEntityPrediction;
  EmbeddingModel model;
  std::map<std::string, std::vector<std::string>> vocabularies;
  std::map<std::string, std::string> metadata;

  const std::vector<std::string> &vocabulary(const std::string &name) const {
    auto it = vocabularies.find(name);
    if (it == vocabularies.end()) {
      throw ModelFileError("model file has no vocabulary '" + name + "'");
    }
    return it->second;
  }

  std::string meta(const std::string &key, const std::string &fallback = "") const {
    auto it = metadata.find(key);
    return it == metadata.end() ? fallback : it->second;
  }

  bool operator==(const ModelFile &) const = default;
};

namespace detail {

template <typename T>
void put_le(std::ostream &out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream &in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw TruncatedError();
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline void put_string(std::ostream &out, const std::string &s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream &in) {
  const auto n = get_le<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw TruncatedError();
  return s;
}

inline void put_matrix(std::ostream &out, const Matrix<float> &m) {
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char *>(m.values().data()),
              static_cast<std::streamsize>(m.values().size() * sizeof(float)));
  } else {
    for (float v : m.values()) put_le<float>(out, v);
  }
}

inline Matrix<float> get_matrix(std::istream &in, std::uint32_t dim) {
  const auto rows = get_le<std::uint64_t>(in);
  const auto cols = get_le<std::uint32_t>(in);
  if (cols != dim) throw ModelFileError("matrix width does not match dim");
  if (rows > (std::uint64_t{1} << 40) / std::max<std::uint32_t>(cols, 1)) {
    throw ModelFileError("implausible matrix size");
  }
  Matrix<float> m(rows, cols);
  if constexpr (std::endian::native == std::endian::little) {
    auto bytes = static_cast<std::streamsize>(m.values().size() * sizeof(float));
    if (bytes > 0 && !in.read(reinterpret_cast<char *>(m.values().data()), bytes)) {
      throw TruncatedError();
    }
  } else {
    for (float &v : m.values()) v = get_le<float>(in);
  }
  return m;
}

}  // namespace detail

inline void save_model(const ModelFile &file, std::ostream &out) {
  if (file.model.input.cols() != file.model.output.cols()) {
    throw std::invalid_argument("save_model: matrix widths differ");
  }
  out.write(kModelMagic.data(), kModelMagic.size());
  detail::put_le<std::uint32_t>(out, kModelVersion);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(file.task));
  detail::put_le<std::uint32_t>(out,
                                static_cast<std::uint32_t>(file.model.dim()));
  detail::put_le<std::uint64_t>(out, file.model.seed);
  detail::put_le<std::uint32_t>(
      out, static_cast<std::uint32_t>(file.vocabularies.size()));
  for (const auto &[name, tokens] : file.vocabularies) {
    detail::put_string(out, name);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tokens.size()));
    for (const auto &t : tokens) detail::put_string(out, t);
  }
  detail::put_le<std::uint32_t>(out,
                                static_cast<std::uint32_t>(file.metadata.size()));
  for (const auto &[key, value] : file.metadata) {
    detail::put_string(out, key);
    detail::put_string(out, value);
  }
  detail::put_matrix(out, file.model.input);
  detail::put_matrix(out, file.model.output);
  if (!out) throw std::runtime_error("save_model: write failed");
}

inline void save_model(const ModelFile &file,
                       const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_model(file, out);
}

inline ModelFile load_model(std::istream &in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) {
    if (in.gcount() == 0) throw BadMagicError();
    throw TruncatedError();
  }
  if (magic != kModelMagic) throw BadMagicError();
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kModelVersion) throw VersionError(version);

  ModelFile file;
  const auto task = detail::get_le<std::uint8_t>(in);
  if (task < 1 || task > 3) throw ModelFileError("unknown task tag");
  file.task = static_cast<Task>(task);
  const auto dim = detail::get_le<std::uint32_t>(in);
  if (dim == 0) throw ModelFileError("zero dimension");
  file.model.seed = detail::get_le<std::uint64_t>(in);
  const auto vocab_count = detail::get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < vocab_count; ++i) {
    std::string name = detail::get_string(in);
    const auto n = detail::get_le<std::uint32_t>(in);
    std::vector<std::string> tokens;
    tokens.reserve(std::min<std::uint32_t>(n, 1u << 20));
    for (std::uint32_t j = 0; j < n; ++j) tokens.push_back(detail::get_string(in));
    file.vocabularies.emplace(std::move(name), std::move(tokens));
  }
  const auto meta_count = detail::get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = detail::get_string(in);
    file.metadata.emplace(std::move(key), detail::get_string(in));
  }
  file.model.input = detail::get_matrix(in, dim);
  file.model.output = detail::get_matrix(in, dim);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ModelFileError("trailing bytes after model");
  }
  return file;
}

inline ModelFile load_model(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_model(in);
}

}  // namespace kge

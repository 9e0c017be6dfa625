// svtk/src/checkpoint.cc

// Copyright 2026 The svtk Authors
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

#include "svtk/checkpoint.h"

#include <fstream>
#include <limits>

#include "svtk/bytes.h"

namespace svtk {

std::string encode_checkpoint(const NamedTensors& tensors) {
  ByteWriter w;
  w.raw("SVCK");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw FormatError("tensor name too long: " + name);
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(2);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
  }
  return w.take();
}

NamedTensors decode_checkpoint(const std::string& bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "SVCK") throw FormatError("bad magic");
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError("unsupported SVCK version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  NamedTensors out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint16_t len = r.u16();
    std::string name(r.raw(len));
    const std::uint8_t rank = r.u8();
    if (rank < 1 || rank > 2)
      throw FormatError("tensor " + name + ": unsupported rank " + std::to_string(rank));
    std::uint64_t rows = 1, cols = r.u32();
    if (rank == 2) {
      rows = cols;
      cols = r.u32();
    }
    if (rows * cols > r.remaining() / 4) throw FormatError("truncated payload in " + name);
    ag::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f32();
    out.emplace_back(std::move(name), std::move(m));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint");
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot write");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  write_file(path, encode_checkpoint(tensors));
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace svtk

// svtk/checkpoint.h

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

#ifndef SVTK_CHECKPOINT_H_
#define SVTK_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "svtk/autograd.h"

namespace svtk {

using NamedTensors = std::vector<std::pair<std::string, ag::Matrix>>;

/// SVCK: "SVCK", u32 version=1, u32 tensor count, then per tensor: u16 name
/// length, UTF-8 name, u8 rank, u32 dims[rank], f32 values (row-major). LE.
/// Values are stored as f32.
std::string encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace svtk

#endif  // SVTK_CHECKPOINT_H_

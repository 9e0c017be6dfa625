// svtk/src/params.cc

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

#include "svtk/params.h"

#include <algorithm>

#include "svtk/error.h"

namespace svtk {

ag::Var ParamSet::add(std::string name, ag::Matrix init) {
  if (contains(name)) throw ConfigError("duplicate parameter " + name);
  ag::Var v = ag::Var::parameter(std::move(init));
  items_.push_back({std::move(name), v});
  return v;
}

const ag::Var& ParamSet::get(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return p.var;
  throw ConfigError("unknown parameter " + name);
}

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(items_.begin(), items_.end(),
                     [&](const NamedParam& p) { return p.name == name; });
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : items_) p.var.zero_grad();
}

void ParamSet::append(const ParamSet& other) {
  for (const auto& p : other.items_) {
    if (contains(p.name)) throw ConfigError("duplicate parameter " + p.name);
    items_.push_back(p);
  }
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& p : items_) out.add(p.name, p.var.value());
  return out;
}

void ParamSet::assign(const std::vector<std::pair<std::string, ag::Matrix>>& tensors) {
  for (auto& p : items_) {
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [&](const auto& t) { return t.first == p.name; });
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor " + p.name);
    if (it->second.rows() != p.var.rows() || it->second.cols() != p.var.cols())
      throw FormatError("checkpoint tensor " + p.name + " has shape " +
                        std::to_string(it->second.rows()) + "x" +
                        std::to_string(it->second.cols()) + ", expected " +
                        std::to_string(p.var.rows()) + "x" + std::to_string(p.var.cols()));
    p.var.mutable_value() = it->second;
  }
}

std::vector<std::pair<std::string, ag::Matrix>> ParamSet::tensors() const {
  std::vector<std::pair<std::string, ag::Matrix>> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.emplace_back(p.name, p.var.value());
  return out;
}

}  // namespace svtk

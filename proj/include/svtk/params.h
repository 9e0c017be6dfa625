// svtk/params.h

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

#ifndef SVTK_PARAMS_H_
#define SVTK_PARAMS_H_

#include <string>
#include <vector>

#include "svtk/autograd.h"

namespace svtk {

struct NamedParam {
  std::string name;
  ag::Var var;
};

/// Ordered collection of trainable tensors. Copies share the underlying
/// tensors; use clone() for an independent copy.
class ParamSet {
 public:
  ag::Var add(std::string name, ag::Matrix init);
  const ag::Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<NamedParam>& items() { return items_; }
  const std::vector<NamedParam>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  /// Total number of scalars.
  std::size_t count() const;
  void zero_grad();
  void append(const ParamSet& other);
  ParamSet clone() const;

  /// Copies values from a tensor list by name; every parameter must be present
  /// with a matching shape.
  void assign(const std::vector<std::pair<std::string, ag::Matrix>>& tensors);
  std::vector<std::pair<std::string, ag::Matrix>> tensors() const;

 private:
  std::vector<NamedParam> items_;
};

}  // namespace svtk

#endif  // SVTK_PARAMS_H_

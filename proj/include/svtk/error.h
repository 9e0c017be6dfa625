// svtk/error.h

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

#ifndef SVTK_ERROR_H_
#define SVTK_ERROR_H_

#include <stdexcept>
#include <string>

namespace svtk {

/// Base of every error thrown by the toolkit. The subclass decides the CLI
/// exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

/// Invalid configuration value, unknown key or out-of-range argument.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

/// Malformed or unsupported input file.
class FormatError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

/// Degenerate data or a numerically undefined quantity.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 4; }
};

}  // namespace svtk

#endif  // SVTK_ERROR_H_

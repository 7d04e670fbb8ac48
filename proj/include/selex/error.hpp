// Copyright 2026 The Selex Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace selex {

// Base for every error raised by the library. `code()` is a stable,
// machine-readable tag; the HTTP layer maps it onto status codes.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& message) : Error("load_error", message) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("invalid_argument", message) {}
};

class ClassifierError : public Error {
 public:
  explicit ClassifierError(const std::string& message)
      : Error("classifier_error", message) {}
};

class ExplanationError : public Error {
 public:
  explicit ExplanationError(const std::string& message)
      : Error("explanation_error", message) {}
};

class InsufficientInput : public Error {
 public:
  explicit InsufficientInput(const std::string& message)
      : Error("insufficient_input", message) {}
};

// Raised by the session protocol. Codes: wrong_phase, duplicate, unknown_doc,
// not_found, training_in_progress, invalid_input.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string code, const std::string& message)
      : Error(std::move(code), message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace selex

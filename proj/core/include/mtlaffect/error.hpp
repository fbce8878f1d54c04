// Copyright 2026 The mtlaffect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtlaffect {

/// Malformed input record (corpus line, config line, checkpoint header).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A well-formed record that breaks a data-model invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string unit_id, std::string invariant)
      : std::runtime_error("unit '" + unit_id + "': " + invariant),
        unit_id_(std::move(unit_id)),
        invariant_(std::move(invariant)) {}
  const std::string& unit_id() const noexcept { return unit_id_; }
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string unit_id_;
  std::string invariant_;
};

class StratificationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or mutually infeasible generator / model / training specification.
class SpecError : public std::runtime_error {
 public:
  SpecError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class RenderError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class RegimeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training stopped on a non-finite loss.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(std::size_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mtlaffect

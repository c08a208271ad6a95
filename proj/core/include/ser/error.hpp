// Copyright 2026 The serbench Authors
//
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ser {

enum class ErrorKind {
  // taxonomy
  UnknownDataset,
  UnknownLabel,
  AmbiguousMapping,
  // ingestion
  IoError,
  PatternError,
  UnsupportedCodec,
  CorruptHeader,
  DuplicateId,
  // embedding store
  BadMagic,
  TruncatedFile,
  InvalidVector,
  DimMismatch,
  // balancing
  EmptyClass,
  TooFewSamples,
  // splits
  SingleSpeakerDataset,
  EmptyTrainingSet,
  // classifier
  InvalidLabel,
  NonFiniteLoss,
  // metrics
  EmptyResult,
  FoldCountMismatch,
  // tsne
  DegenerateRow,
  NonFiniteKL,
  // configuration and file formats
  ParseError,
  ConfigError,
  InvalidArgument,
  Internal,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ser

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

#include "ser/error.hpp"

namespace ser {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownDataset: return "UnknownDataset";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::AmbiguousMapping: return "AmbiguousMapping";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::PatternError: return "PatternError";
    case ErrorKind::UnsupportedCodec: return "UnsupportedCodec";
    case ErrorKind::CorruptHeader: return "CorruptHeader";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::InvalidVector: return "InvalidVector";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::SingleSpeakerDataset: return "SingleSpeakerDataset";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyResult: return "EmptyResult";
    case ErrorKind::FoldCountMismatch: return "FoldCountMismatch";
    case ErrorKind::DegenerateRow: return "DegenerateRow";
    case ErrorKind::NonFiniteKL: return "NonFiniteKL";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace ser

// Copyright 2026 The causalconn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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

namespace causalconn {

enum class ErrorCode {
  // numerical
  RankDeficient,
  InsufficientSamples,
  NonStationaryProcess,
  DimensionMismatch,
  DegenerateResidual,
  Separation,
  RankDeficientDesign,
  NoConvergence,
  SingularInformation,
  EmptyActiveSet,
  // data
  SeriesTooShort,
  AlignmentMismatch,
  ParseError,
  ShapeMismatch,
  NonFiniteValue,
  // configuration
  ConfigInvalid,
  // anything else
  Internal,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NonStationaryProcess: return "NonStationaryProcess";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateResidual: return "DegenerateResidual";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularInformation: return "SingularInformation";
    case ErrorCode::EmptyActiveSet: return "EmptyActiveSet";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::AlignmentMismatch: return "AlignmentMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

/// Process exit status for a failure class: 2 config, 3 data, 4 numerical, 5 internal.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
      return 2;
    case ErrorCode::SeriesTooShort:
    case ErrorCode::AlignmentMismatch:
    case ErrorCode::ParseError:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFiniteValue:
      return 3;
    case ErrorCode::Internal:
      return 5;
    default:
      return 4;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace causalconn

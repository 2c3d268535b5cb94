// Copyright 2026 The PRISM Authors
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

#include <stdexcept>
#include <string>
#include <string_view>

namespace prism {

enum class Errc {
  // generic
  InvalidArgument,
  Config,
  Io,
  // ingest
  MalformedManifest,
  DuplicateId,
  MissingPhash,
  EmptyImage,
  UnsupportedImage,
  InsufficientData,
  UnknownStyle,
  BadMagic,
  BadHeader,
  TruncatedFile,
  TrailingData,
  NonFiniteValue,
  ZeroNormRow,
  MissingEmbedding,
  MissingImage,
  // grad
  SolverDiverged,
  // partition
  KOutOfRange,
  InconsistentPartition,
  TooFewDesigns,
  NoOtherCluster,
  // knowledge
  UnparseableKnowledge,
  EmptySummary,
  MalformedVerdict,
  EmptyFeedback,
  // retrieval
  NoStyleResolved,
  DimensionMismatch,
  EmptyStyleIndex,
  EmptyPlan,
  // evaluate
  KTooLarge,
  ShapeMismatch,
  DegenerateResample,
  MissingScore,
  // gateway
  GatewayTransport,
  GatewayStatus,
  GatewayTimeout,
  CassetteMiss,
};

/// Coarse grouping used for process exit codes.
enum class ErrorCategory { Config = 2, Data = 3, Gateway = 4 };

std::string_view errc_name(Errc code);
ErrorCategory category_of(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

  /// Same error with `context` prepended to the message.
  Error with_context(std::string_view context) const;

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(Errc::InvalidArgument, message);
}

}  // namespace prism

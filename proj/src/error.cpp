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

#include "prism/error.hpp"

namespace prism {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Config: return "Config";
    case Errc::Io: return "Io";
    case Errc::MalformedManifest: return "MalformedManifest";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::MissingPhash: return "MissingPhash";
    case Errc::EmptyImage: return "EmptyImage";
    case Errc::UnsupportedImage: return "UnsupportedImage";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::UnknownStyle: return "UnknownStyle";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadHeader: return "BadHeader";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::TrailingData: return "TrailingData";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::ZeroNormRow: return "ZeroNormRow";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::MissingImage: return "MissingImage";
    case Errc::SolverDiverged: return "SolverDiverged";
    case Errc::KOutOfRange: return "KOutOfRange";
    case Errc::InconsistentPartition: return "InconsistentPartition";
    case Errc::TooFewDesigns: return "TooFewDesigns";
    case Errc::NoOtherCluster: return "NoOtherCluster";
    case Errc::UnparseableKnowledge: return "UnparseableKnowledge";
    case Errc::EmptySummary: return "EmptySummary";
    case Errc::MalformedVerdict: return "MalformedVerdict";
    case Errc::EmptyFeedback: return "EmptyFeedback";
    case Errc::NoStyleResolved: return "NoStyleResolved";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyStyleIndex: return "EmptyStyleIndex";
    case Errc::EmptyPlan: return "EmptyPlan";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DegenerateResample: return "DegenerateResample";
    case Errc::MissingScore: return "MissingScore";
    case Errc::GatewayTransport: return "GatewayTransport";
    case Errc::GatewayStatus: return "GatewayStatus";
    case Errc::GatewayTimeout: return "GatewayTimeout";
    case Errc::CassetteMiss: return "CassetteMiss";
  }
  return "Unknown";
}

ErrorCategory category_of(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::Config:
    case Errc::UnknownStyle:
      return ErrorCategory::Config;
    case Errc::UnparseableKnowledge:
    case Errc::EmptySummary:
    case Errc::MalformedVerdict:
    case Errc::EmptyFeedback:
    case Errc::EmptyPlan:
    case Errc::GatewayTransport:
    case Errc::GatewayStatus:
    case Errc::GatewayTimeout:
    case Errc::CassetteMiss:
      return ErrorCategory::Gateway;
    default:
      return ErrorCategory::Data;
  }
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

Error Error::with_context(std::string_view context) const {
  Error out(*this);
  static_cast<std::runtime_error&>(out) =
      std::runtime_error(std::string(context) + ": " + what());
  return out;
}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace prism

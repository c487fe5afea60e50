// SPDX-License-Identifier: Apache-2.0
#include "phosphor/error.hpp"

namespace phosphor {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::SomaInsideDisc: return "SomaInsideDisc";
    case ErrorCode::OutOfExtent: return "OutOfExtent";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::BadExtent: return "BadExtent";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TableMismatch: return "TableMismatch";
    case ErrorCode::MissingAuxMap: return "MissingAuxMap";
    case ErrorCode::ManifestParse: return "ManifestParse";
    case ErrorCode::CategoryImbalance: return "CategoryImbalance";
    case ErrorCode::MissingFrames: return "MissingFrames";
    case ErrorCode::UnbalancedCatalog: return "UnbalancedCatalog";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::UndefinedRate: return "UndefinedRate";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace phosphor

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phosphor {

enum class ErrorCode {
  // retina-model
  SomaInsideDisc,
  OutOfExtent,
  IndexOutOfRange,
  BadExtent,
  // phosphene-renderer
  ShapeMismatch,
  TableMismatch,
  // scene-pipeline
  MissingAuxMap,
  // dataset-io
  ManifestParse,
  CategoryImbalance,
  MissingFrames,
  // psychophysics
  UnbalancedCatalog,
  DomainError,
  UndefinedRate,
  EmptyGroup,
  LengthMismatch,
  // shared
  InvalidArgument,
  Io,
  Internal,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace phosphor

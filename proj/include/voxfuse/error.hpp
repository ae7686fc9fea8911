// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voxfuse {

/// Contract violations raised by library operations.
enum class Errc {
  InvalidArgument,
  InvalidCamera,
  NonPositiveDepth,
  SingularIntrinsics,
  InfeasibleConstraints,
  UnknownKind,
  EmptyCloud,
  NotNormalized,
  NoViews,
  NoValidJoints,
  NoVisibleJoints,
  DegenerateFrame,
  DegenerateConfiguration,
  NonFiniteObjective,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidCamera: return "InvalidCamera";
    case Errc::NonPositiveDepth: return "NonPositiveDepth";
    case Errc::SingularIntrinsics: return "SingularIntrinsics";
    case Errc::InfeasibleConstraints: return "InfeasibleConstraints";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::EmptyCloud: return "EmptyCloud";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::NoViews: return "NoViews";
    case Errc::NoValidJoints: return "NoValidJoints";
    case Errc::NoVisibleJoints: return "NoVisibleJoints";
    case Errc::DegenerateFrame: return "DegenerateFrame";
    case Errc::DegenerateConfiguration: return "DegenerateConfiguration";
    case Errc::NonFiniteObjective: return "NonFiniteObjective";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace voxfuse

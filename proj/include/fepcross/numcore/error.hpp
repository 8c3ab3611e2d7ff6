// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fepcross::numcore {

/// Raised when an operation receives operands whose shapes do not compose.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for log/division/sqrt outside the operand domain, or non-finite values.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace fepcross::numcore

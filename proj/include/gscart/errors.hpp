// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gsc {

/// Configuration document is malformed or contains invalid values.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File could not be read or written; message carries the path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A computation produced non-finite values and was aborted.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Inputs are individually valid but mutually inconsistent
/// (shape mismatch between model and data, schedule hash mismatch, ...).
struct CompatibilityError : std::runtime_error {
    explicit CompatibilityError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace gsc

// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sarstream {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid argument to an operation (bad token id, shape mismatch, ...).
struct InputError : Error {
  using Error::Error;
};

// Run-config parse or semantic failure. CLI exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// On-disk artifact is malformed (bad magic, truncation, ...). Message
// names the file and byte offset where parsing stopped.
struct FormatError : Error {
  using Error::Error;
};

// A pipeline stage was invoked before its prerequisites. CLI exit code 3.
struct MissingArtifactError : Error {
  using Error::Error;
};

// NaN/inf surfaced where a finite value is required. CLI exit code 4.
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace sarstream

// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy. The CLI maps each family onto a process exit code.

#pragma once

#include <stdexcept>
#include <string>

namespace llf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad flags, invalid or unknown config keys, shape contracts violated by the caller.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated files, bad magic, out-of-range token ids.
class FormatError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf values surfaced by an op or a non-finite loss.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace llf

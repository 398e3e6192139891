// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hico {

// Invalid argument or violated precondition of a pure operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed configuration, schedule string or preset reference.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Generator ran out of library items or haystack positions.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failure (open, write, rename).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ParseErrorKind { bad_magic, bad_version, bad_shape, truncated, size_mismatch, non_finite, format };

// Corrupt file content. Distinct kinds let callers tell failure modes apart.
class ParseError : public IoError {
public:
    ParseError(ParseErrorKind kind, const std::string& what) : IoError(what), kind_(kind) {}
    ParseErrorKind kind() const { return kind_; }

private:
    ParseErrorKind kind_;
};

}  // namespace hico

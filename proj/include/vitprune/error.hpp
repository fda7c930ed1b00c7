// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vitprune {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed data that violates an operation's precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A PruneConfig (or derived count) that cannot be applied.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated file content.
class FormatError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class TensorNotFound : public Error {
public:
    explicit TensorNotFound(const std::string& name)
        : Error("tensor not found: " + name), m_name(name) {}
    const std::string& name() const { return m_name; }

private:
    std::string m_name;
};

class IncompleteCheckpoint : public Error {
public:
    explicit IncompleteCheckpoint(const std::string& name)
        : Error("incomplete checkpoint: missing tensor '" + name + "'"), m_name(name) {}
    const std::string& missing() const { return m_name; }

private:
    std::string m_name;
};

}  // namespace vitprune

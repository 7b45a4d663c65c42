// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gta {

// Malformed user input (empty text, bad CLI arguments).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dataset or label problems: unknown labels, missing fields, duplicate ids.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid hyperparameters or inconsistent run setup.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sequence does not fit in the model context window.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Broken internal invariant (span out of range, size mismatch).
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gta

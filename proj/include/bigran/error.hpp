// Copyright 2026 The bigran Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace bigran {

/// Base class for all bigran errors. Subclasses map to CLI exit codes:
/// ValidationError -> 3, FormatError/IoError -> 4, NumericalError -> 5.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Contract violations: bad arguments, shape mismatches, invalid configs.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed artifact files: bad magic, truncation, checksum mismatch.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Operating-system level I/O failures.
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failures: divergence, non-finite values in computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

} // namespace bigran

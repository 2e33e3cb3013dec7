// Copyright 2026 The listalign Authors
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

namespace listalign {

enum class ErrorCode {
    kDegenerateInput,
    kShapeMismatch,
    kStaleTape,
    kConfigError,
    kUnknownId,
    kIoError,
    kFormatError,
};

/// Base of every exception thrown by the library. `code()` lets callers that
/// do not care about the concrete type (the CLI) map failures to exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define LISTALIGN_DEFINE_ERROR(Name, Code)                                   \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
    }

LISTALIGN_DEFINE_ERROR(DegenerateInput, kDegenerateInput);
LISTALIGN_DEFINE_ERROR(ShapeMismatch, kShapeMismatch);
LISTALIGN_DEFINE_ERROR(StaleTape, kStaleTape);
LISTALIGN_DEFINE_ERROR(ConfigError, kConfigError);
LISTALIGN_DEFINE_ERROR(UnknownId, kUnknownId);
LISTALIGN_DEFINE_ERROR(IoError, kIoError);
LISTALIGN_DEFINE_ERROR(FormatError, kFormatError);

#undef LISTALIGN_DEFINE_ERROR

}  // namespace listalign

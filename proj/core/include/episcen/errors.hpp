// Copyright 2026 The episcen Authors
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

namespace episcen {

/// Caller broke a documented precondition (mismatched lengths, unevaluated cells, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Bad user-supplied data: out-of-range genome, empty sample, malformed file.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite activations, diverging training.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Should never happen; signals a bug or a pathological random stream.
class InternalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace episcen

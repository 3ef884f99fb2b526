// Copyright 2026 The uidtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace uidtrace {

// Every error the library raises derives from Error, so callers that only
// care about "data problem vs. bug" can catch the base.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Record is not well-formed JSON or a field has the wrong JSON type.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Record is well-formed but violates the corpus schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Mathematical precondition failed (empty span, non-positive probability).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A trace lacks data an operation needs, e.g. per-token entropy.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// The endpoint answered but cannot provide what we need (no logprobs).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace uidtrace

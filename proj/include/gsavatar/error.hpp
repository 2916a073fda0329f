// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gsavatar {

/// Root of every error the library throws. Callers that only need a message
/// catch this; the CLI maps the concrete subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splat_io
class FormatError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& property, const std::string& what)
      : Error(what), property_(property)
  {
  }
  const std::string& property() const noexcept { return property_; }

 private:
  std::string property_;
};

class LengthError : public Error {
 public:
  LengthError(std::size_t expected, std::size_t actual);
  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class DecodeError : public Error {
 public:
  DecodeError(std::size_t splat_index, const std::string& what)
      : Error(what), splat_index_(splat_index)
  {
  }
  std::size_t splat_index() const noexcept { return splat_index_; }

 private:
  std::size_t splat_index_;
};

// Empty clouds and similar precondition failures on in-memory values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable input file.
class FileError : public Error {
 public:
  using Error::Error;
};

// rig_model
class RigError : public Error {
 public:
  using Error::Error;
};

// runtime / binding
class OrientationError : public Error {
 public:
  using Error::Error;
};

class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsavatar

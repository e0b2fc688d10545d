// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dprt {

// Root of every error the library throws. Subclasses group failures by who
// has to act on them: the caller (Usage/Validation), the input (Parse/Decode),
// or the distributed session (Transport and friends).
class Error : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error
{
 public:
  using Error::Error;
};

class ValidationError : public Error
{
 public:
  using Error::Error;
};

class ParseError : public Error
{
 public:
  using Error::Error;
};

class DecodeError : public Error
{
 public:
  DecodeError(const std::string &what, size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), m_offset(offset)
  {}

  size_t offset() const
  {
    return m_offset;
  }

 private:
  size_t m_offset;
};

class TransportError : public Error
{
 public:
  using Error::Error;
};

class TimeoutError : public TransportError
{
 public:
  using TransportError::TransportError;
};

class ProtocolError : public TransportError
{
 public:
  using TransportError::TransportError;
};

// All ranks did not agree on the parameters of a collective call.
class ContractError : public Error
{
 public:
  using Error::Error;
};

} // namespace dprt

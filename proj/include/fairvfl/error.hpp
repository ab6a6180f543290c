#pragma once

#include <stdexcept>
#include <string>

namespace fairvfl {

enum class ErrorKind {
  Dimension,
  Label,
  Config,
  Numeric,
  Protocol,
  Lookup,
  Data,
  Parse,
  Io,
  Vocabulary,
  Checkpoint,
  Evaluation,
  Oracle,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Thrown for messages on edges the protocol does not permit.
class ProtocolViolation : public Error {
 public:
  explicit ProtocolViolation(const std::string& what) : Error(ErrorKind::Protocol, what) {}
};

// Non-finite loss or gradient; carries the round (or sample) index that blew up.
class NumericFailure : public Error {
 public:
  NumericFailure(const std::string& what, long long index)
      : Error(ErrorKind::Numeric, what), index_(index) {}

  long long index() const noexcept { return index_; }

 private:
  long long index_;
};

}  // namespace fairvfl

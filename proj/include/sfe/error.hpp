#pragma once

#include <stdexcept>
#include <string>

namespace sfe {

// Base class for everything the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition or type invariant on an input.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The exact W2 oracle was asked to solve an instance above its size cap.
class OracleTooLarge : public Error {
 public:
  using Error::Error;
};

// A certified inequality failed; indicates a solver or normalization bug.
class BoundViolation : public Error {
 public:
  using Error::Error;
};

// An inner solve did not reach its tolerance and the caller cannot continue.
class NotConverged : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, long line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace sfe
